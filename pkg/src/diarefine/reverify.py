"""Acoustic re-verification of segment labels via exact embedding search.

Each segment's label is re-derived as the plurality label of its top-k
most similar segments (by inner product over L2-normalized embeddings)
within the same recording.  A disagreement between the re-verified and
original labels marks the segment as having low acoustic confidence.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import UNKNOWN
from .errors import DimensionMismatch


@dataclass(frozen=True)
class ReverifyResult:
    segment_id: int
    original: str
    reverified: str
    neighbor_labels: tuple[str, ...]

    @property
    def low_confidence(self) -> bool:
        return self.reverified != self.original


class SimilarityIndex:
    """Exact (non-approximate) inner-product index over segment embeddings.

    Vectors are L2-normalized at build time so inner product equals cosine
    similarity.  Rows are keyed by segment id; segments labeled Unknown may
    be queried but never serve as neighbors (their labels carry no
    information).
    """

    def __init__(self, vectors: np.ndarray, labels: Sequence[str], ids: Sequence[int]):
        norms = np.linalg.norm(vectors, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise ValueError("embeddings must have positive L2 norm")
        self.vectors = vectors / norms
        self.labels = list(labels)
        self.ids = list(ids)
        self._row_of = {seg_id: row for row, seg_id in enumerate(self.ids)}

    def __len__(self) -> int:
        return len(self.ids)

    def row_of(self, segment_id: int) -> int:
        return self._row_of[segment_id]

    def neighbors(self, segment_id: int, k: int) -> list[tuple[int, float]]:
        """The k rows most similar to the query, as (row, score) pairs.

        The query itself and Unknown-labeled rows are excluded.  Ordering is
        deterministic: descending score, then ascending row index.
        """
        row = self.row_of(segment_id)
        scores = self.vectors @ self.vectors[row]
        candidates = [
            r for r in range(len(self.ids))
            if r != row and self.labels[r] != UNKNOWN
        ]
        candidates.sort(key=lambda r: (-scores[r], r))
        return [(r, float(scores[r])) for r in candidates[:k]]


def build_index(
    embeddings: Sequence[np.ndarray],
    labels: Sequence[str],
    ids: Sequence[int] | None = None,
) -> SimilarityIndex:
    """Stack per-segment embeddings into a :class:`SimilarityIndex`.

    Raises :class:`DimensionMismatch` if the embeddings do not all share
    one dimensionality.
    """
    if not len(embeddings):
        raise ValueError("cannot build an index over zero embeddings")
    if len(embeddings) != len(labels):
        raise ValueError("embeddings and labels must have equal length")
    dims = {np.asarray(e).shape for e in embeddings}
    if len(dims) != 1 or len(next(iter(dims))) != 1:
        raise DimensionMismatch(f"mixed embedding shapes: {sorted(dims)}")
    matrix = np.stack([np.asarray(e, dtype=np.float64) for e in embeddings])
    if ids is None:
        ids = list(range(len(embeddings)))
    return SimilarityIndex(matrix, labels, ids)


def reverify_segment(idx: SimilarityIndex, query: int, k: int) -> ReverifyResult:
    """Re-derive one segment's label from its k nearest neighbors.

    The re-verified label is the plurality label among the neighbors.
    Ties are broken conservatively: if the original label is among the
    tied leaders it wins; otherwise the tied label with the highest summed
    similarity (then lexicographically smallest) wins.  With no usable
    neighbors the original label is kept.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    original = idx.labels[idx.row_of(query)]
    hits = idx.neighbors(query, k)
    neighbor_labels = tuple(idx.labels[r] for r, _ in hits)
    if not neighbor_labels:
        return ReverifyResult(query, original, original, ())

    counts = Counter(neighbor_labels)
    top = max(counts.values())
    leaders = [label for label, n in counts.items() if n == top]
    if len(leaders) == 1:
        reverified = leaders[0]
    elif original in leaders:
        reverified = original
    else:
        sims = {label: 0.0 for label in leaders}
        for (r, score), label in zip(hits, neighbor_labels):
            if label in sims:
                sims[label] += score
        reverified = max(leaders, key=lambda label: (sims[label], label))
    return ReverifyResult(query, original, reverified, neighbor_labels)


def reverify_all(
    labels: Sequence[str],
    embeddings: Mapping[int, np.ndarray],
    k: int,
) -> list[ReverifyResult]:
    """Re-verify every segment of a recording.

    ``labels[i]`` is segment i's current label; ``embeddings`` maps segment
    ids to vectors and may omit segments too short to embed, which keep
    their original label unflagged.
    """
    results: list[ReverifyResult] = []
    ids = sorted(embeddings)
    index = None
    if ids:
        index = build_index([embeddings[i] for i in ids], [labels[i] for i in ids], ids)
    for i, label in enumerate(labels):
        if index is not None and i in embeddings:
            results.append(reverify_segment(index, i, k))
        else:
            results.append(ReverifyResult(i, label, label, ()))
    return results
