"""Cosine-ranked retrieval over app vectors, plus the ranking metrics.

The index is an exhaustive linear scan (corpora are thousands of entries at
most); what makes queries fast is the vector dimension, not an index
structure. Ties are broken by ascending app id so rankings are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DuplicateAppId, EmptyCorpus
from .validation import as_float_vector

SYSTEMS = ("macneto", "pure_pca", "naive")


def cosine(a, b) -> float:
    """a.b / (|a||b|); 0 when either norm is 0 so the measure stays total."""
    a = as_float_vector(a, name="a")
    b = as_float_vector(b, length=a.shape[0], name="b")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(a @ b / (na * nb))


@dataclass(frozen=True)
class RankedHit:
    app_id: str
    similarity: float


@dataclass(frozen=True)
class RankedResult:
    query_id: str
    hits: tuple[RankedHit, ...]
    n: int

    def rank_of(self, app_id: str) -> int | None:
        """1-based rank of app_id among the hits, None when absent."""
        for rank, hit in enumerate(self.hits, start=1):
            if hit.app_id == app_id:
                return rank
        return None


class CosineIndex:
    """Immutable cosine-similarity index over (app_id, vector) entries."""

    def __init__(self, app_ids: list[str], matrix: np.ndarray, system: str):
        if system not in SYSTEMS:
            raise ValueError(f"unknown system {system!r}")
        self.app_ids = app_ids
        self.matrix = matrix
        self.system = system
        self.norms = np.linalg.norm(matrix, axis=1)
        self.zero_mask = self.norms == 0.0
        self._safe_norms = np.where(self.zero_mask, 1.0, self.norms)

    @classmethod
    def build(cls, entries: list[tuple[str, np.ndarray]], system: str) -> "CosineIndex":
        if not entries:
            raise EmptyCorpus("cannot build an index over zero apps")
        seen: set[str] = set()
        for app_id, _ in entries:
            if app_id in seen:
                raise DuplicateAppId(f"app id {app_id!r} appears twice in the index")
            seen.add(app_id)
        app_ids = [app_id for app_id, _ in entries]
        matrix = np.stack([np.asarray(v, dtype=np.float64) for _, v in entries])
        if matrix.ndim != 2:
            raise DimensionMismatch("index vectors must all share one length")
        return cls(app_ids, matrix, system)

    def __len__(self) -> int:
        return len(self.app_ids)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[1]

    def search(self, query_vector, n: int, query_id: str = "") -> RankedResult:
        """Top-n entries by cosine similarity; ties by ascending app id."""
        q = as_float_vector(query_vector, name="query")
        if q.shape[0] != self.dimension:
            raise DimensionMismatch(
                f"query has dimension {q.shape[0]}, index has {self.dimension}"
            )
        size = len(self.app_ids)
        k = min(max(n, 0), size)
        if k == 0:
            return RankedResult(query_id=query_id, hits=(), n=n)
        qn = float(np.linalg.norm(q))
        if qn == 0.0:
            sims = np.zeros(size)
        else:
            sims = (self.matrix @ q) / (self._safe_norms * qn)
            sims[self.zero_mask] = 0.0
        if k == size:
            candidates = range(size)
        else:
            kth_value = np.partition(sims, size - k)[size - k]
            candidates = np.flatnonzero(sims >= kth_value)
        ranked = sorted(candidates, key=lambda i: (-sims[i], self.app_ids[i]))[:k]
        hits = tuple(RankedHit(self.app_ids[i], float(sims[i])) for i in ranked)
        return RankedResult(query_id=query_id, hits=hits, n=n)

    def best(self, vector, query_id: str = "") -> str:
        """The single most similar app id."""
        return self.search(vector, 1, query_id=query_id).hits[0].app_id


def top_at_k(ground_truth: str, result: RankedResult, k: int) -> int:
    """1 when the truth ranks at or above k, else 0 (absent counts as 0)."""
    rank = result.rank_of(ground_truth)
    return 1 if rank is not None and rank <= k else 0


def mrr(ground_truths: list[str], results: list[RankedResult]) -> float:
    """Mean reciprocal rank; a truth absent from its result list contributes 0."""
    if len(ground_truths) != len(results):
        raise ValueError("one ground truth per result is required")
    if not results:
        return 0.0
    total = 0.0
    for truth, result in zip(ground_truths, results):
        rank = result.rank_of(truth)
        if rank is not None:
            total += 1.0 / rank
    return total / len(results)
