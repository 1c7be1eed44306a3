"""On-GPU KV-cache residency: replacement planning, bitmask selection, sizing.

Two replacement policies over a scored page ranking S and resident set P:

* full-topk: recall everything in S[:k] missing from P, evict the
  lowest-ranked resident pages only as far as capacity forces.
* steady-select: evict every resident page outside S[:budget], recall the
  best absent budget pages to refill.

Both fill free slots before forcing evictions. Eviction order is lowest
score first (pages absent from S rank below all scored pages), ties broken
by evicting the larger page_id, so plans are fully deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .models import ModelSpec, kv_bytes_per_token

_NEG_INF = float("-inf")


@dataclass(frozen=True)
class ResidencySet:
    """The resident page set P with fixed capacity over a page universe [0, n_pages)."""

    capacity: int
    n_pages: int
    resident: tuple[int, ...] = ()

    def __post_init__(self):
        if self.capacity < 0 or self.n_pages < 0:
            raise ValueError("capacity and n_pages must be non-negative")
        ordered = tuple(sorted(set(self.resident)))
        if len(ordered) != len(self.resident):
            raise ValueError("resident page_ids must be unique")
        object.__setattr__(self, "resident", ordered)
        if len(ordered) > self.capacity:
            raise ValueError(f"{len(ordered)} resident pages exceed capacity {self.capacity}")
        if ordered and (ordered[0] < 0 or ordered[-1] >= self.n_pages):
            raise ValueError("resident page_ids must lie in [0, n_pages)")

    def __len__(self) -> int:
        return len(self.resident)

    def __contains__(self, page_id: int) -> bool:
        return page_id in set(self.resident)

    @property
    def free_slots(self) -> int:
        return self.capacity - len(self.resident)

    def bitmask(self) -> np.ndarray:
        mask = np.zeros(self.n_pages, dtype=bool)
        mask[list(self.resident)] = True
        return mask

    def with_universe(self, n_pages: int) -> "ResidencySet":
        """Same state over a grown page universe (decode appends pages)."""
        return ResidencySet(self.capacity, n_pages, self.resident)


@dataclass(frozen=True)
class ReplacementPlan:
    evict: tuple[int, ...]
    recall: tuple[int, ...]
    recall_bytes: int = 0

    def __post_init__(self):
        object.__setattr__(self, "evict", tuple(self.evict))
        object.__setattr__(self, "recall", tuple(self.recall))
        if set(self.evict) & set(self.recall):
            raise ValueError("evict and recall sets overlap")
        if len(set(self.evict)) != len(self.evict) or len(set(self.recall)) != len(self.recall):
            raise ValueError("duplicate page_ids in plan")

    @property
    def empty(self) -> bool:
        return not self.evict and not self.recall


@dataclass(frozen=True)
class BudgetConfig:
    """Per-sample token budgets: selection budget and on-GPU steady allotment."""

    t_budget: int
    t_steady: int
    steady_ratio: float

    def __post_init__(self):
        if self.t_budget < 0 or self.t_steady < 0:
            raise ValueError("budgets must be non-negative")
        if self.t_steady > self.t_budget:
            raise ValueError(f"t_steady {self.t_steady} exceeds t_budget {self.t_budget}")
        if not 0.0 <= self.steady_ratio <= 1.0:
            raise ValueError("steady_ratio must lie in [0, 1]")


def _eviction_order(candidates, score_of: dict[int, float]) -> list[int]:
    # lowest score evicted first; unscored pages rank below everything;
    # ties evict the larger page_id first
    return sorted(candidates, key=lambda pid: (score_of.get(pid, _NEG_INF), -pid))


def arkvale_replace(p: ResidencySet, s, k: int, page_bytes: int = 0) -> ReplacementPlan:
    """Recall all of S[:k] absent from P; evict only as capacity requires."""
    if k > len(s):
        raise ValueError(f"k={k} exceeds ranking length {len(s)}")
    if p.capacity < k:
        raise ValueError(f"capacity {p.capacity} cannot host the full Top-{k}")
    wanted = [pid for pid, _ in s[:k]]
    resident = set(p.resident)
    recall = [pid for pid in wanted if pid not in resident]
    n_evict = max(0, len(p) + len(recall) - p.capacity)
    victims = _eviction_order(resident - set(wanted), {pid: sc for pid, sc in s})
    return ReplacementPlan(evict=tuple(victims[:n_evict]), recall=tuple(recall),
                           recall_bytes=len(recall) * page_bytes)


def steady_replace(p: ResidencySet, s, budget_pages: int, page_bytes: int = 0) -> ReplacementPlan:
    """Evict residents outside S[:budget]; refill (and fill free slots) from it."""
    if budget_pages > len(s):
        raise ValueError(f"budget_pages={budget_pages} exceeds ranking length {len(s)}")
    if budget_pages < p.capacity:
        raise ValueError(
            f"budget_pages={budget_pages} below capacity {p.capacity}: "
            "the budget set cannot cover residency")
    score_of = {pid: sc for pid, sc in s}
    budget_ids = [pid for pid, _ in s[:budget_pages]]
    budget_set = set(budget_ids)
    resident = set(p.resident)
    evict = _eviction_order(resident - budget_set, score_of)
    candidates = [pid for pid in budget_ids if pid not in resident]
    n_recall = min(len(candidates), len(evict) + p.free_slots)
    return ReplacementPlan(evict=tuple(evict), recall=tuple(candidates[:n_recall]),
                           recall_bytes=n_recall * page_bytes)


def apply_plan(p: ResidencySet, plan: ReplacementPlan) -> ResidencySet:
    resident = set(p.resident)
    bad_evict = set(plan.evict) - resident
    if bad_evict:
        raise ValueError(f"plan evicts non-resident pages {sorted(bad_evict)}")
    bad_recall = set(plan.recall) & resident
    if bad_recall:
        raise ValueError(f"plan recalls already-resident pages {sorted(bad_recall)}")
    new_resident = (resident - set(plan.evict)) | set(plan.recall)
    return ResidencySet(p.capacity, p.n_pages, tuple(sorted(new_resident)))


def bitmask_select(topk_mask: np.ndarray, p_mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """evict = ~topk & p; recall = ~p & topk."""
    topk_mask = np.asarray(topk_mask, dtype=bool)
    p_mask = np.asarray(p_mask, dtype=bool)
    if topk_mask.shape != p_mask.shape:
        raise ValueError(f"mask lengths differ: {topk_mask.shape} vs {p_mask.shape}")
    return ~topk_mask & p_mask, ~p_mask & topk_mask


def steady_capacity(gpu_free_bytes: int, spec: ModelSpec, batch: int, page_size: int) -> int:
    """Largest page-aligned per-sample token count fitting in free GPU bytes."""
    if batch < 1:
        raise ValueError("batch must be >= 1")
    if page_size < 1:
        raise ValueError("page_size must be >= 1")
    if gpu_free_bytes <= 0:
        return 0
    per_token = batch * kv_bytes_per_token(spec)
    return (gpu_free_bytes // per_token // page_size) * page_size


def recall_volume(plan: ReplacementPlan, page_bytes: int) -> int:
    if page_bytes < 0:
        raise ValueError("page_bytes must be non-negative")
    return len(plan.recall) * page_bytes


def page_bytes(spec: ModelSpec, page_size: int) -> int:
    """Transfer size of one recalled page across all layers and KV heads."""
    return page_size * kv_bytes_per_token(spec)


def default_budget_pages(context_pages: int) -> int:
    """Selection budget: at least 64 pages, growing as 1/16 of the context."""
    return max(64, math.ceil(context_pages / 16))


def steady_budget(t_budget: int, ratio: float, page_size: int,
                  capacity_tokens: int | None = None) -> BudgetConfig:
    """Round ratio * t_budget to page granularity, clamped to budget and capacity."""
    pages = int(ratio * t_budget / page_size + 0.5)
    t_steady = min(pages * page_size, t_budget)
    if capacity_tokens is not None:
        t_steady = min(t_steady, capacity_tokens)
    return BudgetConfig(t_budget=t_budget, t_steady=t_steady, steady_ratio=ratio)


def format_trace_line(step: int, plan: ReplacementPlan) -> str:
    """One per-step trace line: step, evict ids, recall ids, bytes."""
    ev = ",".join(str(i) for i in plan.evict) or "-"
    rc = ",".join(str(i) for i in plan.recall) or "-"
    return f"step {step} evict {ev} recall {rc} bytes {plan.recall_bytes}"
