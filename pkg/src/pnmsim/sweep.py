"""Experiment sweeps over (mode, context, n_gpu, n_pnm) and CSV emission.

Rows appear in config order regardless of worker count, numbers render
with six significant digits (scientific past 1e+-7), and infeasible points
stay in the output with a status naming the violated constraint, so a
(config, seed) pair always produces byte-identical files.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .cache import BudgetConfig, default_budget_pages, steady_budget
from .cluster import Mode, make_cluster, steady_ratio
from .config import ExperimentConfig
from .perf import InfeasibleError, LatencyBreakdown, RunReport, run

CSV_COLUMNS = ("mode", "model", "context", "n_gpu", "n_pnm", "batch",
               "fc_s", "attention_s", "recall_s", "topk_s", "comm_s", "total_s",
               "throughput", "energy_per_token", "tokens_per_dollar", "seed", "status")

CSV_HEADER = ",".join(CSV_COLUMNS)


def format_number(value) -> str:
    """Locale-independent: 6 significant digits, scientific beyond 1e+-7."""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    x = float(value)
    if x == 0.0:
        return "0"
    if abs(x) >= 1e7 or abs(x) < 1e-7:
        return np.format_float_scientific(x, precision=5, unique=False,
                                          trim="-", exp_digits=2)
    return np.format_float_positional(x, precision=6, unique=False,
                                      fractional=False, trim="-")


def sweep_points(config: ExperimentConfig) -> list[tuple[Mode, int, int, int]]:
    """(mode, context, n_gpu, n_pnm) tuples in deterministic config order."""
    points = []
    for mode in config.modes:
        for context in config.contexts:
            for n_gpu in config.n_gpus:
                pnm_counts = (0,) if mode is Mode.BASELINE else config.n_pnms
                for n_pnm in pnm_counts:
                    points.append((mode, context, n_gpu, n_pnm))
    return points


def _budgets_for(config: ExperimentConfig, mode: Mode, context: int,
                 n_gpu: int, n_pnm: int) -> BudgetConfig | None:
    if config.budget_pages is None and config.steady_ratio is None:
        return None  # per-run defaults apply
    page_size = config.perf.page_size
    total_pages = -(-context // page_size)
    budget_pages = min(total_pages,
                       config.budget_pages if config.budget_pages is not None
                       else default_budget_pages(total_pages))
    t_budget = budget_pages * page_size
    if mode is Mode.BASELINE:
        return BudgetConfig(t_budget=t_budget, t_steady=t_budget, steady_ratio=1.0)
    if mode is Mode.PNM_KV:
        return BudgetConfig(t_budget=t_budget, t_steady=0, steady_ratio=0.0)
    ratio = (config.steady_ratio if config.steady_ratio is not None
             else steady_ratio(n_gpu, n_pnm))
    return steady_budget(t_budget, ratio, page_size)


def _zero_breakdown() -> LatencyBreakdown:
    return LatencyBreakdown(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def run_point(config: ExperimentConfig, point: tuple[Mode, int, int, int]) -> RunReport:
    """One sweep point; infeasible points become status rows, not exceptions."""
    mode, context, n_gpu, n_pnm = point
    cluster = make_cluster(n_gpu, n_pnm, mode, mapping=config.mapping,
                           gpu=config.gpu, pnm=config.pnm,
                           host_link_bandwidth=config.host_link_bandwidth)
    budgets = _budgets_for(config, mode, context, n_gpu, n_pnm)
    try:
        return run(cluster, config.model, context, budgets=budgets,
                   seed=config.seed, params=config.perf)
    except InfeasibleError as exc:
        return RunReport(mode=mode, model=config.model.name, context=context,
                         n_gpu=n_gpu, n_pnm=n_pnm, batch=0,
                         breakdown=_zero_breakdown(), throughput=0.0,
                         energy_per_token=0.0, tokens_per_dollar=0.0,
                         seed=config.seed, status=exc.constraint)


def run_sweep(config: ExperimentConfig, jobs: int = 1) -> list[RunReport]:
    """All sweep points, buffered back into config order."""
    points = sweep_points(config)
    if jobs <= 1 or len(points) <= 1:
        return [run_point(config, p) for p in points]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda p: run_point(config, p), points))


def report_to_row(r: RunReport) -> str:
    b = r.breakdown
    fields = (r.mode.value, r.model, str(r.context), str(r.n_gpu), str(r.n_pnm),
              str(r.batch), format_number(b.fc_s), format_number(b.attention_s),
              format_number(b.recall_s), format_number(b.topk_s),
              format_number(b.comm_s), format_number(b.total_s),
              format_number(r.throughput), format_number(r.energy_per_token),
              format_number(r.tokens_per_dollar), str(r.seed), r.status)
    return ",".join(fields)


def reports_to_csv(reports) -> str:
    lines = [CSV_HEADER]
    lines.extend(report_to_row(r) for r in reports)
    return "\n".join(lines) + "\n"


def write_csv(text: str, path: str):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def parse_csv(text: str) -> list[dict[str, str]]:
    """Rows as column->string dicts; re-joining reproduces the input bytes."""
    lines = text.splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError("unrecognized CSV header")
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != len(CSV_COLUMNS):
            raise ValueError(f"malformed CSV row: {line!r}")
        rows.append(dict(zip(CSV_COLUMNS, parts)))
    return rows


def rows_to_csv(rows: list[dict[str, str]]) -> str:
    lines = [CSV_HEADER]
    lines.extend(",".join(row[c] for c in CSV_COLUMNS) for row in rows)
    return "\n".join(lines) + "\n"
