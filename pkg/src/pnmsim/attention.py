"""Paged attention primitives: digests, Top-K selection, and online-softmax partials.

Pages hold contiguous token ranges of K/V rows. A digest keeps elementwise
min/max key vectors per page; a page score is max(q.min_vec, q.max_vec).
Attention over a page subset is carried as an (out, m, l) partial so results
computed on different devices merge exactly before normalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

NEG_INF = float("-inf")


@dataclass(frozen=True)
class KVPage:
    """One page of the KV-cache: token rows [start, end) for a single head."""

    page_id: int
    start: int
    end: int
    keys: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.keys.ndim != 2 or self.values.ndim != 2:
            raise ValueError("keys and values must be 2-D matrices")
        if self.keys.shape != self.values.shape:
            raise ValueError(f"keys shape {self.keys.shape} != values shape {self.values.shape}")
        if self.keys.shape[0] != self.end - self.start:
            raise ValueError("row count must equal end - start")

    @property
    def n_tokens(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class PageDigest:
    """Elementwise min/max key vectors summarizing one page."""

    page_id: int
    min_vec: np.ndarray
    max_vec: np.ndarray


@dataclass(frozen=True)
class ScoreList:
    """(page_id, score) entries sorted by score descending, ties by smaller id."""

    entries: tuple[tuple[int, float], ...]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, idx):
        return self.entries[idx]

    def ids(self) -> list[int]:
        return [pid for pid, _ in self.entries]

    def score_of(self) -> dict[int, float]:
        return {pid: s for pid, s in self.entries}


@dataclass(frozen=True)
class AttentionPartial:
    """Online-softmax state: unnormalized output, running max logit, exp sum."""

    out: np.ndarray
    m: float
    l: float  # noqa: E741 - matches the standard online-softmax notation

    def __post_init__(self):
        if self.l < 0:
            raise ValueError("l must be non-negative")


def identity_partial(d_h: int, dtype=np.float64) -> AttentionPartial:
    """The merge identity: zero tokens covered."""
    return AttentionPartial(out=np.zeros(d_h, dtype=dtype), m=NEG_INF, l=0.0)


def partition_pages(keys: np.ndarray, values: np.ndarray, page_size: int) -> list[KVPage]:
    """Split T token rows into ceil(T/page_size) pages; the last may be short."""
    if page_size < 1:
        raise ValueError("page_size must be >= 1")
    keys = np.asarray(keys)
    values = np.asarray(values)
    if keys.shape != values.shape:
        raise ValueError(f"keys shape {keys.shape} != values shape {values.shape}")
    n_tokens = keys.shape[0]
    pages = []
    for pid, start in enumerate(range(0, n_tokens, page_size)):
        end = min(start + page_size, n_tokens)
        pages.append(KVPage(page_id=pid, start=start, end=end,
                            keys=keys[start:end], values=values[start:end]))
    return pages


def make_digest(page: KVPage) -> PageDigest:
    if page.n_tokens == 0:
        raise ValueError(f"cannot digest empty page {page.page_id}")
    return PageDigest(page_id=page.page_id,
                      min_vec=page.keys.min(axis=0),
                      max_vec=page.keys.max(axis=0))


def score_page(query: np.ndarray, digest: PageDigest) -> float:
    """max of the query's inner products with the digest's min and max vectors."""
    query = np.asarray(query)
    if query.shape != digest.min_vec.shape:
        raise ValueError(f"query dim {query.shape} != digest dim {digest.min_vec.shape}")
    return float(max(np.dot(query, digest.min_vec), np.dot(query, digest.max_vec)))


def top_k(scores, k: int) -> ScoreList:
    """The k largest entries under (score desc, page_id asc); deterministic."""
    if k < 0:
        raise ValueError("k must be >= 0")
    pairs = [(int(pid), float(s)) for pid, s in scores]
    ids = [pid for pid, _ in pairs]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate page_ids in score input")
    pairs.sort(key=lambda e: (-e[1], e[0]))
    return ScoreList(entries=tuple(pairs[:k]))


def select_pages(query: np.ndarray, digests, budget_pages: int) -> ScoreList:
    """Score every digest against the query, then keep the top budget_pages."""
    return top_k(((d.page_id, score_page(query, d)) for d in digests), budget_pages)


def selection_query(group_queries: np.ndarray) -> np.ndarray:
    """One selecting query per KV head: the elementwise mean over its g query heads."""
    group_queries = np.asarray(group_queries)
    if group_queries.ndim != 2:
        raise ValueError("expected a g x d_h matrix of query-head vectors")
    return group_queries.mean(axis=0)


def _gather(query: np.ndarray, pages, dtype):
    query = np.asarray(query, dtype=dtype)
    mats_k, mats_v = [], []
    for page in pages:
        if page.keys.shape[1] != query.shape[0]:
            raise ValueError(f"page {page.page_id} dim {page.keys.shape[1]} != query dim {query.shape[0]}")
        if page.n_tokens:
            mats_k.append(np.asarray(page.keys, dtype=dtype))
            mats_v.append(np.asarray(page.values, dtype=dtype))
    if not mats_k:
        return query, None, None
    return query, np.concatenate(mats_k), np.concatenate(mats_v)


def attention_exact(query: np.ndarray, pages, scale: float, dtype=np.float64) -> np.ndarray:
    """Monolithic softmax(scale * K q)^T V reference over all given pages."""
    query, keys, values = _gather(query, pages, dtype)
    if keys is None:
        raise ValueError("attention requires at least one token")
    logits = scale * (keys @ query)
    w = np.exp(logits - logits.max())
    w /= w.sum()
    return w @ values


def attention_partial(query: np.ndarray, pages, scale: float, dtype=np.float64) -> AttentionPartial:
    """Unnormalized attention over a page subset; empty subsets give the identity."""
    query, keys, values = _gather(query, pages, dtype)
    if keys is None:
        return identity_partial(query.shape[0], dtype=dtype)
    logits = scale * (keys @ query)
    m = float(logits.max())
    w = np.exp(logits - m)
    return AttentionPartial(out=w @ values, m=m, l=float(w.sum()))


def merge_partials(a: AttentionPartial, b: AttentionPartial) -> AttentionPartial:
    if a.out.shape != b.out.shape:
        raise ValueError(f"partial dims differ: {a.out.shape} vs {b.out.shape}")
    m_new = max(a.m, b.m)
    if m_new == NEG_INF:  # both identities
        return identity_partial(a.out.shape[0], dtype=a.out.dtype)
    # exp(-inf - m_new) must contribute exactly zero
    wa = math.exp(a.m - m_new) if a.m != NEG_INF else 0.0
    wb = math.exp(b.m - m_new) if b.m != NEG_INF else 0.0
    return AttentionPartial(out=a.out * wa + b.out * wb, m=m_new, l=a.l * wa + b.l * wb)


def finalize(p: AttentionPartial) -> np.ndarray:
    if p.l <= 0:
        raise ValueError("cannot finalize a partial covering zero tokens (l = 0)")
    return p.out / p.l


def dump_digests(digests) -> str:
    """Plain-text digest listing for test triage."""
    lines = []
    for d in digests:
        lo = " ".join(f"{x:.6g}" for x in d.min_vec)
        hi = " ".join(f"{x:.6g}" for x in d.max_vec)
        lines.append(f"page {d.page_id} min [{lo}] max [{hi}]")
    return "\n".join(lines)


def dump_scores(scores: ScoreList) -> str:
    return "\n".join(f"page {pid} score {s:.12g}" for pid, s in scores)
