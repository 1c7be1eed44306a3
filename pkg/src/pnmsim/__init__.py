"""Functional-plus-analytical simulator of near-memory KV-cache management
for long-context LLM decoding.

The functional layer executes paging, digest scoring, Top-K selection,
cache replacement, and online-softmax partial merging exactly at desk
scale; the analytical layer prices latency, energy, and tokens-per-dollar
for baseline, pnm-kv, and png-kv execution across GPU/PNM clusters.
"""

from .attention import (AttentionPartial, KVPage, PageDigest, ScoreList,
                        attention_exact, attention_partial, finalize,
                        identity_partial, make_digest, merge_partials,
                        partition_pages, score_page, select_pages, top_k)
from .cache import (BudgetConfig, ReplacementPlan, ResidencySet, apply_plan,
                    arkvale_replace, bitmask_select, page_bytes, recall_volume,
                    steady_budget, steady_capacity, steady_replace)
from .cluster import (ClusterConfig, CommProfile, DeviceSpec, Mapping, Mode,
                      activation_bytes, builtin_devices, comm_profile,
                      dp_assign, make_cluster, steady_ratio)
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .fidelity import FidelityParams, FidelityReport, run_fidelity
from .models import (ModelSpec, SizingReport, builtin_specs, fc_flops_per_token,
                     fc_param_count, get_model, kv_bytes_per_token,
                     kv_cache_bytes, max_batch, sizing_report)
from .perf import (InfeasibleError, LatencyBreakdown, PerfParams, RecallStats,
                   RunReport, attention_time, energy_per_token, fc_time,
                   recall_time, run, step_latency, tokens_per_dollar, topk_time)
from .rng import Rng, derive_seed
from .stream import StreamParams, gen_stream
from .sweep import reports_to_csv, run_sweep

__version__ = "0.1.0"

__all__ = [
    "AttentionPartial", "KVPage", "PageDigest", "ScoreList",
    "attention_exact", "attention_partial", "finalize", "identity_partial",
    "make_digest", "merge_partials", "partition_pages", "score_page",
    "select_pages", "top_k",
    "BudgetConfig", "ReplacementPlan", "ResidencySet", "apply_plan",
    "arkvale_replace", "bitmask_select", "page_bytes", "recall_volume",
    "steady_budget", "steady_capacity", "steady_replace",
    "ClusterConfig", "CommProfile", "DeviceSpec", "Mapping", "Mode",
    "activation_bytes", "builtin_devices", "comm_profile", "dp_assign",
    "make_cluster", "steady_ratio",
    "ConfigError", "ExperimentConfig", "load_config", "parse_config",
    "FidelityParams", "FidelityReport", "run_fidelity",
    "ModelSpec", "SizingReport", "builtin_specs", "fc_flops_per_token",
    "fc_param_count", "get_model", "kv_bytes_per_token", "kv_cache_bytes",
    "max_batch", "sizing_report",
    "InfeasibleError", "LatencyBreakdown", "PerfParams", "RecallStats",
    "RunReport", "attention_time", "energy_per_token", "fc_time",
    "recall_time", "run", "step_latency", "tokens_per_dollar", "topk_time",
    "Rng", "derive_seed",
    "StreamParams", "gen_stream",
    "reports_to_csv", "run_sweep",
    "__version__",
]
