"""Functional desk-scale experiments over the real paging/selection pipeline.

Everything here runs the actual page, digest, Top-K, replacement, and
partial-merge code on synthetic key/value data and a drifting query stream,
at one (layer, head) and reduced head dimension so a full report takes
seconds. Three questions are answered per run: how per-step recall counts
move with context size and with residency capacity, how well digest-based
selection tracks exact per-page relevance, and how far device-split partial
merging strays from monolithic attention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import (ScoreList, attention_exact, attention_partial, finalize,
                        make_digest, merge_partials, partition_pages, top_k)
from .cache import ResidencySet, apply_plan, arkvale_replace, format_trace_line, steady_replace
from .rng import Rng, derive_seed
from .stream import StreamParams, gen_stream


@dataclass(frozen=True)
class FidelityParams:
    """Desk-scale experiment shape; defaults finish in a few seconds."""

    seed: int = 0
    d_h: int = 32
    page_size: int = 8
    context_pages: tuple[int, ...] = (1024, 2048, 4096, 8192)
    capacity_pages: int = 128
    budget_pages: int = 64
    steady_budget_pages: int = 256
    n_pnm_range: tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7, 8)
    steps: int = 96
    warmup: int = 32
    locality: float = 0.98
    drift: float = 1.0
    merge_samples: int = 32
    trace_lines: int = 0

    def __post_init__(self):
        if self.d_h < 1 or self.d_h > 64:
            raise ValueError("fidelity d_h must lie in [1, 64]")
        if max(self.context_pages) * self.page_size > 65536:
            raise ValueError("fidelity contexts must stay at or below 64K tokens")
        if self.warmup >= self.steps:
            raise ValueError("steps must exceed warmup")


@dataclass(frozen=True)
class FidelityReport:
    recall_curve: tuple[tuple[int, float], ...]
    steady_curve: tuple[tuple[int, int, float], ...]
    policy_compare: tuple[float, float]
    selection_overlap: float
    merge_max_rel_err: float
    trace: tuple[str, ...] = ()


def _build_instance(seed: int, n_pages: int, page_size: int, d_h: int):
    """Pages, digests, and stacked digest matrices for one synthetic context."""
    rng = Rng(seed)
    n_tokens = n_pages * page_size
    keys = rng.derive("keys").normal_matrix(n_tokens, d_h)
    values = rng.derive("values").normal_matrix(n_tokens, d_h)
    pages = partition_pages(keys, values, page_size)
    digests = [make_digest(p) for p in pages]
    mins = np.stack([d.min_vec for d in digests])
    maxs = np.stack([d.max_vec for d in digests])
    return pages, digests, mins, maxs


def _score_table(queries: np.ndarray, mins: np.ndarray, maxs: np.ndarray) -> np.ndarray:
    """All digest scores at once; row t equals score_page over every page."""
    return np.maximum(queries @ mins.T, queries @ maxs.T)


def _ranking(scores_t: np.ndarray, keep: int) -> ScoreList:
    # residency membership only ever depends on the top `keep` entries
    n = scores_t.shape[0]
    if keep < n:
        cand = np.argpartition(-scores_t, keep)[:keep]
    else:
        cand = np.arange(n)
    order = cand[np.lexsort((cand, -scores_t[cand]))]
    return ScoreList(tuple((int(i), float(scores_t[i])) for i in order))


def replay_replacement(scores: np.ndarray, capacity: int, budget: int,
                       policy: str) -> tuple[list[int], list[str]]:
    """Run one residency state machine over a score table; recalls per step."""
    n_steps, n_pages = scores.shape
    state = ResidencySet(capacity, n_pages)
    recalls, lines = [], []
    for t in range(n_steps):
        ranking = _ranking(scores[t], budget)
        if policy == "arkvale":
            plan = arkvale_replace(state, ranking, budget)
        elif policy == "steady":
            plan = steady_replace(state, ranking, budget)
        else:
            raise ValueError(f"unknown policy {policy!r}")
        state = apply_plan(state, plan)
        recalls.append(len(plan.recall))
        lines.append(format_trace_line(t, plan))
    return recalls, lines


def _stream_scores(cfg: FidelityParams, seed: int, n_pages: int):
    # tags omit n_pages: counter-based draws make smaller contexts exact
    # prefixes of larger ones, and one query trajectory serves every size,
    # so context comparisons are paired rather than independent
    _, _, mins, maxs = _build_instance(derive_seed(seed, "instance"),
                                       n_pages, cfg.page_size, cfg.d_h)
    queries = gen_stream(StreamParams(seed=derive_seed(seed, "fidelity-queries"),
                                      length=cfg.steps, locality=cfg.locality,
                                      drift=cfg.drift), cfg.d_h)
    return _score_table(queries, mins, maxs)


def recall_curve(cfg: FidelityParams, seed: int | None = None) -> list[tuple[int, float]]:
    """Mean full-topk recalls/step at fixed capacity across context sizes."""
    seed = cfg.seed if seed is None else seed
    curve = []
    for n_pages in cfg.context_pages:
        scores = _stream_scores(cfg, seed, n_pages)
        recalls, _ = replay_replacement(scores, cfg.capacity_pages,
                                        cfg.budget_pages, "arkvale")
        curve.append((n_pages, float(np.mean(recalls[cfg.warmup:]))))
    return curve


def steady_capacity_for(n_pnm: int, budget_pages: int) -> int:
    """Resident steady pages when one GPU shares the budget with n PNM devices."""
    return max(1, int(budget_pages / (1 + n_pnm) + 0.5))


def steady_curve(cfg: FidelityParams, seed: int | None = None) -> list[tuple[int, int, float]]:
    """(n_pnm, capacity_pages, recalls/step) on one shared stream."""
    seed = cfg.seed if seed is None else seed
    n_pages = cfg.context_pages[-1]
    scores = _stream_scores(cfg, seed, n_pages)
    out = []
    for n_pnm in cfg.n_pnm_range:
        capacity = steady_capacity_for(n_pnm, cfg.steady_budget_pages)
        recalls, _ = replay_replacement(scores, capacity,
                                        cfg.steady_budget_pages, "steady")
        out.append((n_pnm, capacity, float(np.mean(recalls[cfg.warmup:]))))
    return out


def policy_compare(cfg: FidelityParams, seed: int | None = None) -> tuple[float, float]:
    """Mean recalls/step for full-topk vs steady-select at equal capacity."""
    seed = cfg.seed if seed is None else seed
    n_pages = cfg.context_pages[-1]
    scores = _stream_scores(cfg, seed, n_pages)
    ark, _ = replay_replacement(scores, cfg.capacity_pages, cfg.capacity_pages, "arkvale")
    steady, _ = replay_replacement(scores, cfg.capacity_pages,
                                   cfg.steady_budget_pages, "steady")
    return (float(np.mean(ark[cfg.warmup:])), float(np.mean(steady[cfg.warmup:])))


def selection_overlap(cfg: FidelityParams, seed: int | None = None) -> float:
    """Mean overlap between digest-selected and exact-relevance top pages."""
    seed = cfg.seed if seed is None else seed
    n_pages = cfg.context_pages[0]
    pages, digests, mins, maxs = _build_instance(derive_seed(seed, "instance"),
                                                 n_pages, cfg.page_size, cfg.d_h)
    keys = np.concatenate([p.keys for p in pages])
    queries = gen_stream(StreamParams(seed=derive_seed(seed, "overlap-queries"),
                                      length=cfg.steps, locality=cfg.locality,
                                      drift=cfg.drift), cfg.d_h)
    digest_scores = _score_table(queries, mins, maxs)
    k = cfg.budget_pages
    overlaps = []
    for t in range(cfg.steps):
        exact = (keys @ queries[t]).reshape(n_pages, cfg.page_size).max(axis=1)
        chosen = set(_ranking(digest_scores[t], k).ids())
        best = set(_ranking(exact, k).ids())
        overlaps.append(len(chosen & best) / k)
    return float(np.mean(overlaps))


def merge_residual(cfg: FidelityParams, seed: int | None = None) -> float:
    """Max relative error of device-split partial merging vs exact attention."""
    seed = cfg.seed if seed is None else seed
    n_pages = cfg.context_pages[0]
    pages, _, mins, maxs = _build_instance(derive_seed(seed, "instance"),
                                           n_pages, cfg.page_size, cfg.d_h)
    queries = gen_stream(StreamParams(seed=derive_seed(seed, "merge-queries"),
                                      length=cfg.merge_samples, locality=cfg.locality,
                                      drift=cfg.drift), cfg.d_h)
    scale = 1.0 / np.sqrt(cfg.d_h)
    split_rng = Rng(derive_seed(seed, "merge-splits"))
    worst = 0.0
    for t in range(cfg.merge_samples):
        score_row = _score_table(queries[t:t + 1], mins, maxs)[0]
        selected = [pages[pid] for pid in _ranking(score_row, cfg.budget_pages).ids()]
        gpu_side = split_rng.uniform(len(selected)) < 0.5
        part_a = attention_partial(queries[t], [p for p, g in zip(selected, gpu_side) if g], scale)
        part_b = attention_partial(queries[t], [p for p, g in zip(selected, gpu_side) if not g], scale)
        merged = finalize(merge_partials(part_a, part_b))
        exact = attention_exact(queries[t], selected, scale)
        denom = max(float(np.max(np.abs(exact))), 1e-300)
        worst = max(worst, float(np.max(np.abs(merged - exact))) / denom)
    return worst


def run_fidelity(cfg: FidelityParams) -> FidelityReport:
    trace: tuple[str, ...] = ()
    if cfg.trace_lines:
        scores = _stream_scores(cfg, cfg.seed, cfg.context_pages[0])
        _, lines = replay_replacement(scores, cfg.capacity_pages,
                                      cfg.budget_pages, "arkvale")
        trace = tuple(lines[:cfg.trace_lines])
    return FidelityReport(
        recall_curve=tuple(recall_curve(cfg)),
        steady_curve=tuple(steady_curve(cfg)),
        policy_compare=policy_compare(cfg),
        selection_overlap=selection_overlap(cfg),
        merge_max_rel_err=merge_residual(cfg),
        trace=trace)


def format_report(report: FidelityReport) -> str:
    lines = ["recall curve (context pages -> mean recalls/step):"]
    for pages, mean in report.recall_curve:
        lines.append(f"  {pages:>6d} pages  {mean:.4f}")
    lines.append("steady sweep (n_pnm, capacity pages -> mean recalls/step):")
    for n_pnm, capacity, mean in report.steady_curve:
        lines.append(f"  n_pnm={n_pnm}  capacity={capacity:>4d}  {mean:.4f}")
    ark, steady = report.policy_compare
    lines.append(f"policy compare at equal capacity: full-topk {ark:.4f} vs steady {steady:.4f}")
    lines.append(f"selection overlap vs exact ranking: {report.selection_overlap:.4f}")
    lines.append(f"merge max relative error: {report.merge_max_rel_err:.3e}")
    for line in report.trace:
        lines.append("trace " + line)
    return "\n".join(lines)
