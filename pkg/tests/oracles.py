"""Independent reference implementations used only to check the real ones.

Everything here deliberately takes a different algorithmic route from the
package code: plain recursion for edit distance, 10 ms frame counting for
DER, exhaustive permutation search for the assignment, and a per-query
scan for nearest neighbors.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from diarefine.core import UNKNOWN
from diarefine.metrics import Annotation


def recursive_edit_distance(a: str, b: str) -> int:
    """Textbook recursive Levenshtein distance (memoized)."""

    @lru_cache(maxsize=None)
    def rec(x: str, y: str) -> int:
        if not x:
            return len(y)
        if not y:
            return len(x)
        if x[0] == y[0]:
            return rec(x[1:], y[1:])
        return 1 + min(rec(x[1:], y), rec(x, y[1:]), rec(x[1:], y[1:]))

    return rec(a, b)


def brute_force_neighbors(vectors: np.ndarray, labels, query: int, k: int) -> list[int]:
    """Top-k rows by inner product against normalized vectors, scanning all
    candidates; excludes the query row and Unknown-labeled rows."""
    unit = vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
    scored = []
    for row in range(len(unit)):
        if row == query or labels[row] == UNKNOWN:
            continue
        scored.append((-float(np.dot(unit[row], unit[query])), row))
    scored.sort()
    return [row for _, row in scored[:k]]


def brute_force_assignment(overlap: np.ndarray) -> float:
    """Best total overlap over all injective hyp->ref assignments."""
    n_hyp, n_ref = overlap.shape
    best = 0.0
    if n_hyp <= n_ref:
        for cols in itertools.permutations(range(n_ref), n_hyp):
            best = max(best, sum(overlap[i, c] for i, c in enumerate(cols)))
    else:
        for rows in itertools.permutations(range(n_hyp), n_ref):
            best = max(best, sum(overlap[r, j] for j, r in enumerate(rows)))
    return best


def frame_der(
    reference: Annotation,
    hypothesis: Annotation,
    collar: float,
    frame: float = 0.01,
) -> dict | None:
    """Frame-counting DER on a 10 ms grid.

    Valid only when every boundary (and the collar) is a multiple of the
    frame size.  Returns None when no reference speech survives the collar.
    """

    def frames(t: float) -> int:
        return int(round(t / frame))

    horizon = 0.0
    for ann in (reference, hypothesis):
        for iv, _ in ann.segments:
            horizon = max(horizon, iv.end)
    n = frames(horizon) + frames(collar) + 2

    def activity(ann: Annotation) -> dict[str, np.ndarray]:
        act: dict[str, np.ndarray] = {}
        for iv, label in ann.segments:
            arr = act.setdefault(label, np.zeros(n, dtype=bool))
            arr[frames(iv.start): frames(iv.end)] = True
        return act

    ref_act = activity(reference)
    hyp_act = activity(hypothesis)

    excluded = np.zeros(n, dtype=bool)
    c = frames(collar)
    if c:
        for iv, _ in reference.segments:
            for b in (frames(iv.start), frames(iv.end)):
                excluded[max(0, b - c): b + c] = True
    for act in (ref_act, hyp_act):
        for arr in act.values():
            arr &= ~excluded

    total = int(sum(arr.sum() for arr in ref_act.values()))
    if total == 0:
        return None

    ref_labels = sorted(ref_act)
    hyp_labels = sorted(hyp_act)
    overlap = np.zeros((len(hyp_labels), len(ref_labels)))
    for i, h in enumerate(hyp_labels):
        for j, r in enumerate(ref_labels):
            overlap[i, j] = int((hyp_act[h] & ref_act[r]).sum())

    # Exhaustive assignment; only the optimum matters for the error counts.
    best_pairs: list[tuple[int, int]] = []
    best_score = -1.0
    k = min(len(hyp_labels), len(ref_labels))
    if len(hyp_labels) <= len(ref_labels):
        candidates = (
            list(enumerate(perm))  # (hyp_i, ref_j)
            for perm in itertools.permutations(range(len(ref_labels)), k)
        )
    else:
        candidates = (
            [(h, j) for j, h in enumerate(perm)]
            for perm in itertools.permutations(range(len(hyp_labels)), k)
        )
    for pairs in candidates:
        score = sum(overlap[p] for p in pairs)
        if score > best_score:
            best_score = score
            best_pairs = pairs

    n_ref = np.zeros(n, dtype=np.int64)
    for arr in ref_act.values():
        n_ref += arr
    n_hyp = np.zeros(n, dtype=np.int64)
    for arr in hyp_act.values():
        n_hyp += arr
    correct = np.zeros(n, dtype=np.int64)
    for i, j in best_pairs:
        if overlap[i, j] > 0:
            correct += ref_act[ref_labels[j]] & hyp_act[hyp_labels[i]]

    missed = int(np.maximum(n_ref - n_hyp, 0).sum())
    false_alarm = int(np.maximum(n_hyp - n_ref, 0).sum())
    confusion = int((np.minimum(n_ref, n_hyp) - correct).sum())
    return {
        "der": (missed + false_alarm + confusion) / total,
        "missed": missed / total,
        "false_alarm": false_alarm / total,
        "confusion": confusion / total,
        "total_reference": total * frame,
    }


def random_annotation(
    rng: np.random.Generator,
    max_speakers: int = 5,
    horizon_s: float = 60.0,
    grid: float = 0.01,
    max_segments_per_speaker: int = 3,
    min_frames: int = 30,
) -> Annotation:
    """Random overlapping annotation with boundaries on the frame grid."""
    horizon = int(round(horizon_s / grid))
    triples = []
    for spk in range(int(rng.integers(1, max_speakers + 1))):
        for _ in range(int(rng.integers(1, max_segments_per_speaker + 1))):
            a = int(rng.integers(0, horizon - min_frames))
            b = int(rng.integers(a + min_frames, min(horizon, a + 2000) + 1))
            triples.append((a * grid, b * grid, f"s{spk}"))
    return Annotation.from_triples(triples)
