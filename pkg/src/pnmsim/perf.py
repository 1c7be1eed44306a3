"""Roofline latency, energy, and cost model for the three execution modes.

Per decode step: FC projections run on the GPUs (memory- or compute-bound,
whichever dominates), attention is a memory-bound GEMV on whichever device
class holds the pages, recalled pages cross the interconnect, and Top-K
sorting plus activation scatter-gather round out the step.

baseline keeps the full KV in switch-attached memory and recalls budget
pages to a GPU working set every step; pnm-kv runs selection and attention
next to the memory, which zeroes recall; png-kv splits attention, keeping a
small steady page subset on the GPU and overlapping the two device classes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .cache import (BudgetConfig, ResidencySet, apply_plan, arkvale_replace,
                    page_bytes, steady_budget, steady_capacity, steady_replace)
from .cache import default_budget_pages as _default_budget_pages
from .cluster import ClusterConfig, Mode, comm_profile, activation_bytes
from .cluster import steady_ratio as _steady_ratio
from .models import (ModelSpec, fc_flops_per_token, fc_param_count,
                     kv_bytes_per_token, max_batch)
from .attention import ScoreList
from .rng import Rng, derive_seed
from .stream import DEFAULT_DRIFT, DEFAULT_LOCALITY, StreamParams, gen_stream


class InfeasibleError(Exception):
    """A configuration that cannot run; .constraint names the violated limit."""

    def __init__(self, constraint: str, message: str):
        super().__init__(message)
        self.constraint = constraint


@dataclass(frozen=True)
class PerfParams:
    """Model knobs; defaults reproduce the built-in experiment setup."""

    page_size: int = 32
    sorter_rate: float = 1e10  # pages/s through one device's Top-K sorter
    b_sat: int = 96            # batch at which GPU FC reaches peak efficiency
    weight_bytes: int | None = None  # None: FC parameter bytes of the model
    step_overhead_s: float = 0.0
    idle_fraction: float = 0.0
    activation_fields: str = "qkv_out"
    recall_source: str = "trace"  # or "analytic"
    churn_probability: float = 0.02
    batch: int = 0  # 0 = largest memory-feasible batch
    locality: float = DEFAULT_LOCALITY
    drift: float = DEFAULT_DRIFT
    trace_streams: int = 3
    trace_steps: int = 48
    trace_warmup: int = 16
    trace_dim: int = 32

    def __post_init__(self):
        if self.page_size < 1:
            raise ValueError("page_size must be >= 1")
        if self.sorter_rate <= 0:
            raise ValueError("sorter_rate must be positive")
        if self.b_sat < 1:
            raise ValueError("b_sat must be >= 1")
        if self.recall_source not in ("trace", "analytic"):
            raise ValueError(f"unknown recall_source {self.recall_source!r}")
        if self.activation_fields not in ("qkv_out", "q_only"):
            raise ValueError(f"unknown activation_fields {self.activation_fields!r}")
        if self.batch < 0:
            raise ValueError("batch must be >= 0 (0 selects the memory maximum)")
        if not 0.0 <= self.churn_probability <= 1.0:
            raise ValueError("churn_probability must lie in [0, 1]")
        if not 0.0 <= self.idle_fraction <= 1.0:
            raise ValueError("idle_fraction must lie in [0, 1]")
        if not 0.0 <= self.locality <= 1.0:
            raise ValueError("locality must lie in [0, 1]")
        if self.step_overhead_s < 0:
            raise ValueError("step_overhead_s must be non-negative")
        if self.trace_streams < 1 or self.trace_dim < 1:
            raise ValueError("trace_streams and trace_dim must be >= 1")
        if not 0 <= self.trace_warmup < self.trace_steps:
            raise ValueError("trace_steps must exceed trace_warmup >= 0")


@dataclass(frozen=True)
class LatencyBreakdown:
    fc_s: float
    attention_s: float
    recall_s: float
    topk_s: float
    comm_s: float
    total_s: float
    attention_gpu_s: float = 0.0
    attention_pnm_s: float = 0.0

    def __post_init__(self):
        for f in ("fc_s", "attention_s", "recall_s", "topk_s", "comm_s", "total_s",
                  "attention_gpu_s", "attention_pnm_s"):
            if getattr(self, f) < 0:
                raise ValueError(f"LatencyBreakdown.{f} must be non-negative")


@dataclass(frozen=True)
class RecallStats:
    """Mean pages recalled per sample per step, and where the number came from."""

    pages_per_step: float
    source: str = "trace"


@dataclass(frozen=True)
class RunReport:
    mode: Mode
    model: str
    context: int
    n_gpu: int
    n_pnm: int
    batch: int
    breakdown: LatencyBreakdown
    throughput: float
    energy_per_token: float
    tokens_per_dollar: float
    seed: int
    status: str = "ok"


def fc_time(spec: ModelSpec, batch: int, gpus, b_sat: int = 96,
            weight_bytes: int | None = None) -> float:
    """Roofline FC step time: weights streamed once, work scaled by batch.

    GPU efficiency below b_sat grows linearly with batch, so the compute
    term is flat until saturation and linear beyond it.
    """
    if not gpus:
        raise ValueError("fc_time requires at least one GPU")
    if batch < 1:
        raise ValueError("batch must be >= 1")
    if weight_bytes is None:
        weight_bytes = fc_param_count(spec) * spec.bytes_per_elem
    mem_s = weight_bytes / sum(g.mem_bandwidth for g in gpus)
    peak = sum(g.peak_compute for g in gpus)
    effective = peak * min(1.0, batch / b_sat)
    comp_s = batch * fc_flops_per_token(spec) / effective
    return max(mem_s, comp_s)


def attention_time(spec: ModelSpec, batch: int, budget_tokens: int,
                   devices, share: float) -> float:
    """Memory-bound GEMV over this device class's share of the budget tokens."""
    if not 0.0 <= share <= 1.0:
        raise ValueError("share must lie in [0, 1]")
    if share == 0.0:
        return 0.0
    if not devices:
        raise ValueError("attention share > 0 assigned to an empty device class")
    bw = sum(d.mem_bandwidth for d in devices)
    return batch * share * budget_tokens * kv_bytes_per_token(spec) / bw


def recall_time(recall_bytes_per_step: float, link_bandwidth: float) -> float:
    if link_bandwidth <= 0:
        raise ValueError("link_bandwidth must be positive")
    return recall_bytes_per_step / link_bandwidth


def topk_time(context_pages: int, batch: float, sorter_rate: float) -> float:
    """Merge-sort cost model: batch * pages * log2(pages) sorter operations."""
    if sorter_rate <= 0:
        raise ValueError("sorter_rate must be positive")
    if context_pages == 0:
        return 0.0
    return batch * context_pages * math.log2(max(context_pages, 2)) / sorter_rate


def _comm_time(cluster: ClusterConfig, spec: ModelSpec, batch: int, params: PerfParams) -> float:
    if cluster.n_pnm == 0:
        return 0.0
    profile = comm_profile(cluster.mapping, cluster.n_pnm,
                           activation_bytes(spec, batch, params.activation_fields))
    t = profile.scatter_gather_bytes / cluster.host_link_bandwidth
    if profile.reduction_msgs:
        # host-mediated store-and-forward: two device-link traversals per message
        reduction_bytes = batch * spec.n_l * spec.d_in * spec.bytes_per_elem
        t += profile.reduction_msgs * 2 * reduction_bytes / cluster.pnms[0].link_bandwidth
    return t


def default_budgets(cluster: ClusterConfig, context: int, page_size: int,
                    ratio: float | None = None) -> BudgetConfig:
    """Mode-appropriate budget defaults for a given context length."""
    total_pages = -(-context // page_size)
    budget_pages = min(total_pages, _default_budget_pages(total_pages))
    t_budget = budget_pages * page_size
    if cluster.mode is Mode.BASELINE:
        return BudgetConfig(t_budget=t_budget, t_steady=t_budget, steady_ratio=1.0)
    if cluster.mode is Mode.PNM_KV:
        return BudgetConfig(t_budget=t_budget, t_steady=0, steady_ratio=0.0)
    if ratio is None:
        ratio = _steady_ratio(cluster.n_gpu, cluster.n_pnm)
    return steady_budget(t_budget, ratio, page_size)


def resolve_operating_point(cluster: ClusterConfig, spec: ModelSpec, context: int,
                            budgets: BudgetConfig | None,
                            params: PerfParams) -> tuple[int, BudgetConfig]:
    """Feasible batch plus final budgets, or InfeasibleError naming the limit."""
    if context < 1:
        raise ValueError("context must be >= 1")
    if not cluster.gpus:
        raise ValueError("a cluster needs at least one GPU for FC layers")
    weight_bytes = (params.weight_bytes if params.weight_bytes is not None
                    else fc_param_count(spec) * spec.bytes_per_elem)
    gpu_mem = sum(g.mem_capacity for g in cluster.gpus)
    if weight_bytes > gpu_mem:
        raise InfeasibleError(
            "weights-exceed-gpu-memory",
            f"model weights {weight_bytes} B exceed GPU memory {gpu_mem} B")
    gpu_free = gpu_mem - weight_bytes

    if budgets is None:
        budgets = default_budgets(cluster, context, params.page_size)

    if cluster.mode is Mode.BASELINE:
        limit = max_batch(spec, gpu_free, max(budgets.t_budget, 1))
        constraint = "budget-tokens-exceed-gpu-memory"
    else:
        kv_per_sample = context * kv_bytes_per_token(spec)
        pnm_mem = sum(p.mem_capacity for p in cluster.pnms)
        limit = pnm_mem // kv_per_sample
        constraint = "kv-exceeds-pnm-memory"
        if cluster.mode is Mode.PNG_KV and budgets.t_steady > 0:
            gpu_limit = max_batch(spec, gpu_free, budgets.t_steady)
            if gpu_limit < limit:
                limit = gpu_limit
                constraint = "steady-tokens-exceed-gpu-memory"

    if limit < 1:
        raise InfeasibleError(constraint, f"no batch >= 1 fits ({constraint})")
    if params.batch:
        if params.batch > limit:
            raise InfeasibleError(
                "requested-batch-exceeds-memory",
                f"requested batch {params.batch} exceeds feasible maximum {limit}")
        batch = params.batch
    else:
        batch = limit

    if cluster.mode is Mode.PNG_KV and budgets.t_steady > 0:
        cap = steady_capacity(gpu_free, spec, batch, params.page_size)
        if cap < budgets.t_steady:
            budgets = replace(budgets, t_steady=cap)
    return batch, budgets


def analytic_recall_rate(capacity_pages: int, churn_probability: float) -> float:
    """Closed-form expectation: a churn fraction of the resident set per step."""
    return churn_probability * capacity_pages


def trace_recall_rate(seed: int, n_pages: int, budget_pages: int, capacity_pages: int,
                      policy: str, params: PerfParams) -> float:
    """Mean recalled pages per step from replaying replacement on a query walk.

    Pages are summarized by synthetic digests (a center vector plus a
    non-negative spread). Post-step residency membership depends only on the
    top budget_pages of each ranking, so the score list handed to the
    replacement policy is truncated there; recall counts are unaffected.
    """
    if budget_pages < capacity_pages:
        raise ValueError("budget_pages must be >= capacity_pages")
    if capacity_pages == 0 or params.trace_steps == 0:
        return 0.0
    rates = []
    for stream_idx in range(params.trace_streams):
        root = Rng(derive_seed(seed, "recall-trace", stream_idx))
        d = params.trace_dim
        center = root.derive("digest-center").normal_matrix(n_pages, d)
        spread = np.abs(root.derive("digest-spread").normal_matrix(n_pages, d))
        mins, maxs = center - spread, center + spread
        n_steps = params.trace_warmup + params.trace_steps
        queries = gen_stream(
            StreamParams(seed=derive_seed(seed, "recall-trace", stream_idx, "queries"),
                         length=n_steps, locality=params.locality, drift=params.drift), d)
        scores = np.maximum(queries @ mins.T, queries @ maxs.T)
        state = ResidencySet(capacity_pages, n_pages)
        recalled = 0
        for t in range(n_steps):
            s_t = scores[t]
            if budget_pages < n_pages:
                cand = np.argpartition(-s_t, budget_pages)[:budget_pages]
            else:
                cand = np.arange(n_pages)
            order = cand[np.lexsort((cand, -s_t[cand]))]
            ranking = ScoreList(tuple((int(i), float(s_t[i])) for i in order))
            if policy == "arkvale":
                plan = arkvale_replace(state, ranking, budget_pages)
            else:
                plan = steady_replace(state, ranking, budget_pages)
            state = apply_plan(state, plan)
            if t >= params.trace_warmup:
                recalled += len(plan.recall)
        rates.append(recalled / params.trace_steps)
    return float(np.mean(rates))


def recall_stats(cluster: ClusterConfig, spec: ModelSpec, context: int,
                 budgets: BudgetConfig, seed: int, params: PerfParams) -> RecallStats:
    """Per-sample recall pages/step for the cluster's mode on this config."""
    if cluster.mode is Mode.PNM_KV:
        return RecallStats(0.0, source="structural")
    budget_pages = budgets.t_budget // params.page_size
    if cluster.mode is Mode.BASELINE:
        capacity_pages, policy = budget_pages, "arkvale"
    else:
        capacity_pages, policy = budgets.t_steady // params.page_size, "steady"
    if capacity_pages == 0 or budget_pages == 0:
        return RecallStats(0.0, source="structural")
    if params.recall_source == "analytic":
        return RecallStats(analytic_recall_rate(capacity_pages, params.churn_probability),
                           source="analytic")
    total_pages = -(-context // params.page_size)
    rate = trace_recall_rate(seed, total_pages, budget_pages, capacity_pages,
                             policy, params)
    return RecallStats(rate, source="trace")


def step_latency(cluster: ClusterConfig, spec: ModelSpec, batch: int, context: int,
                 budgets: BudgetConfig, recall: RecallStats,
                 params: PerfParams | None = None) -> LatencyBreakdown:
    """Compose per-step latency under the cluster's execution mode."""
    params = params or PerfParams()
    if batch < 1:
        raise ValueError("batch must be >= 1")
    total_pages = -(-context // params.page_size)
    recall_bytes = recall.pages_per_step * page_bytes(spec, params.page_size) * batch
    fc = fc_time(spec, batch, cluster.gpus, b_sat=params.b_sat,
                 weight_bytes=params.weight_bytes)

    if cluster.mode is Mode.BASELINE:
        att_gpu = attention_time(spec, batch, budgets.t_budget, cluster.gpus, 1.0)
        att_pnm = 0.0
        rec = recall_time(recall_bytes, cluster.host_link_bandwidth)
        tk = topk_time(total_pages, batch / cluster.n_gpu, params.sorter_rate)
        comm = 0.0
        att_reported = att_gpu
        total = fc + att_gpu + rec + tk + comm
    elif cluster.mode is Mode.PNM_KV:
        att_gpu = 0.0
        att_pnm = attention_time(spec, batch, budgets.t_budget, cluster.pnms, 1.0)
        rec = 0.0
        tk = topk_time(total_pages, batch / cluster.n_pnm, params.sorter_rate)
        comm = _comm_time(cluster, spec, batch, params)
        att_reported = att_pnm
        total = fc + att_pnm + tk + comm
    else:
        share_gpu = budgets.t_steady / budgets.t_budget if budgets.t_budget else 0.0
        att_gpu = attention_time(spec, batch, budgets.t_budget, cluster.gpus, share_gpu)
        att_pnm = attention_time(spec, batch, budgets.t_budget, cluster.pnms,
                                 1.0 - share_gpu)
        rec = recall_time(recall_bytes, cluster.host_link_bandwidth)
        tk = topk_time(total_pages, batch / cluster.n_pnm, params.sorter_rate)
        comm = _comm_time(cluster, spec, batch, params)
        att_reported = max(att_gpu, att_pnm)
        # GPU steady attention plus its recalls overlap the PNM attention
        total = fc + max(att_pnm, att_gpu + rec) + tk + comm

    return LatencyBreakdown(fc_s=fc, attention_s=att_reported, recall_s=rec,
                            topk_s=tk, comm_s=comm,
                            total_s=total + params.step_overhead_s,
                            attention_gpu_s=att_gpu, attention_pnm_s=att_pnm)


def energy_per_token(breakdown: LatencyBreakdown, cluster: ClusterConfig,
                     batch: int, idle_fraction: float = 0.0) -> float:
    """Active-time energy at device max power, divided over the batch."""
    if batch < 1:
        raise ValueError("batch must be >= 1")
    gpu_active = breakdown.fc_s + breakdown.attention_gpu_s + breakdown.recall_s
    pnm_active = breakdown.attention_pnm_s + breakdown.topk_s
    if cluster.n_pnm == 0:
        gpu_active += breakdown.topk_s
        pnm_active = 0.0
    total = breakdown.total_s
    energy = 0.0
    for dev in cluster.gpus:
        energy += dev.max_power * (gpu_active + idle_fraction * (total - gpu_active))
    for dev in cluster.pnms:
        energy += dev.max_power * (pnm_active + idle_fraction * (total - pnm_active))
    return energy / batch


def tokens_per_dollar(throughput: float, cluster: ClusterConfig) -> float:
    if throughput < 0:
        raise ValueError("throughput must be non-negative")
    cost_per_hour = sum(d.cost_per_hour for d in cluster.gpus + cluster.pnms)
    if cost_per_hour <= 0:
        raise ValueError("cluster has zero cost per hour")
    return throughput * 3600.0 / cost_per_hour


def run(cluster: ClusterConfig, spec: ModelSpec, context: int, mode: Mode | None = None,
        budgets: BudgetConfig | None = None, seed: int = 0,
        params: PerfParams | None = None) -> RunReport:
    """One operating point: feasible batch, recall stats, latency, figures of merit."""
    params = params or PerfParams()
    if mode is not None and mode is not cluster.mode:
        raise ValueError(f"mode {mode.value} conflicts with cluster mode {cluster.mode.value}")
    batch, budgets = resolve_operating_point(cluster, spec, context, budgets, params)
    stats = recall_stats(cluster, spec, context, budgets, seed, params)
    breakdown = step_latency(cluster, spec, batch, context, budgets, stats, params)
    throughput = batch / breakdown.total_s
    return RunReport(
        mode=cluster.mode, model=spec.name, context=context,
        n_gpu=cluster.n_gpu, n_pnm=cluster.n_pnm, batch=batch,
        breakdown=breakdown, throughput=throughput,
        energy_per_token=energy_per_token(breakdown, cluster, batch, params.idle_fraction),
        tokens_per_dollar=tokens_per_dollar(throughput, cluster),
        seed=seed)
