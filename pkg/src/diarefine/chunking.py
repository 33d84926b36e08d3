"""Long-recording support: overlapping chunk planning, cross-chunk label
unification via embedding clustering, and overlap stitching.

Diarizers with short training windows do not generalize to long audio, so
the recording is diarized in overlapping chunks whose local label spaces
are then aligned: each chunk speaker is summarized by the mean of its
segment embeddings, and the means are clustered agglomeratively (average
linkage on cosine similarity) under a cannot-link constraint that two
speakers from the same chunk never merge.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import DiarSegment, SegmentOrigin, TimeInterval
from .errors import DimensionMismatch, InvalidPlan

_TOUCH_EPS = 1e-9


@dataclass(frozen=True)
class ChunkPlan:
    chunk_length: float
    overlap: float
    windows: tuple[TimeInterval, ...]


@dataclass(frozen=True)
class ChunkSpeaker:
    """One local speaker within one chunk, summarized by its mean embedding."""

    chunk_index: int
    local_label: str
    mean_embedding: np.ndarray
    total_duration: float


def plan_chunks(duration: float, chunk_length: float = 250.0, overlap: float = 5.0) -> ChunkPlan:
    """Overlapping windows covering [0, duration].

    Windows advance by ``chunk_length - overlap``; the final window is
    clipped to the recording end.  A recording shorter than one chunk gets
    a single window.
    """
    if duration <= 0:
        raise InvalidPlan("duration must be > 0")
    if overlap <= 0 or overlap >= chunk_length:
        raise InvalidPlan(
            f"need 0 < overlap < chunk_length, got overlap={overlap}, chunk_length={chunk_length}"
        )
    windows = []
    start = 0.0
    stride = chunk_length - overlap
    while True:
        end = start + chunk_length
        if end >= duration:
            windows.append(TimeInterval(start, duration))
            break
        windows.append(TimeInterval(start, end))
        start += stride
    return ChunkPlan(chunk_length, overlap, tuple(windows))


def chunk_speakers(
    chunk_index: int,
    segments: Sequence[DiarSegment],
    embeddings: Mapping[int, np.ndarray],
) -> list[ChunkSpeaker]:
    """Summarize one chunk's diarization into per-speaker mean embeddings.

    ``embeddings`` maps positions in ``segments`` to vectors; segments
    without an embedding still count toward the speaker's duration.  The
    mean is unweighted over segments and re-normalized.
    """
    order: dict[str, int] = {}
    vectors: dict[str, list[np.ndarray]] = {}
    duration: dict[str, float] = {}
    for i, seg in enumerate(segments):
        order.setdefault(seg.label, len(order))
        duration[seg.label] = duration.get(seg.label, 0.0) + seg.interval.duration()
        if i in embeddings:
            vectors.setdefault(seg.label, []).append(np.asarray(embeddings[i], dtype=np.float64))
    speakers = []
    for label in sorted(order, key=order.get):
        if label not in vectors:
            continue
        mean = np.mean(vectors[label], axis=0)
        norm = np.linalg.norm(mean)
        if norm == 0:
            continue
        speakers.append(ChunkSpeaker(chunk_index, label, mean / norm, duration[label]))
    return speakers


def unify_labels(
    speakers: Sequence[ChunkSpeaker], sim_threshold: float = 0.65
) -> dict[tuple[int, str], str]:
    """Cluster chunk speakers into global labels.

    Average-linkage agglomerative clustering on cosine similarity: merge
    the most similar pair of clusters while that similarity is at least
    ``sim_threshold``, never merging two speakers observed in the same
    chunk.  Returns a total mapping (chunk_index, local_label) -> global
    label, with global labels numbered by order of first appearance.
    """
    if not speakers:
        return {}
    dims = {s.mean_embedding.shape for s in speakers}
    if len(dims) != 1:
        raise DimensionMismatch(f"mixed embedding shapes: {sorted(dims)}")

    vectors = np.stack([s.mean_embedding for s in speakers])
    vectors = vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
    sim = vectors @ vectors.T

    clusters: list[list[int]] = [[i] for i in range(len(speakers))]
    chunk_sets: list[set[int]] = [{speakers[i].chunk_index} for i in range(len(speakers))]

    def linkage(a: list[int], b: list[int]) -> float:
        return float(np.mean([sim[i, j] for i in a for j in b]))

    while len(clusters) > 1:
        best: tuple[float, int, int] | None = None
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                if chunk_sets[i] & chunk_sets[j]:
                    continue
                score = linkage(clusters[i], clusters[j])
                if best is None or score > best[0]:
                    best = (score, i, j)
        if best is None or best[0] < sim_threshold:
            break
        _, i, j = best
        clusters[i] = clusters[i] + clusters[j]
        chunk_sets[i] = chunk_sets[i] | chunk_sets[j]
        del clusters[j]
        del chunk_sets[j]

    clusters.sort(key=min)
    mapping: dict[tuple[int, str], str] = {}
    for rank, members in enumerate(clusters):
        for m in members:
            mapping[(speakers[m].chunk_index, speakers[m].local_label)] = f"spk{rank}"
    return mapping


def stitch(
    per_chunk: Sequence[tuple[int, Sequence[DiarSegment]]],
    mapping: Mapping[tuple[int, str], str],
    plan: ChunkPlan,
) -> list[DiarSegment]:
    """Merge per-chunk diarization into one globally labeled segment list.

    Each chunk owns the recording up to the midpoint of its overlap with
    the next chunk; segments are clipped to their chunk's owned region (a
    segment straddling the midpoint is cut there) and relabeled through
    ``mapping``.  Abutting or overlapping pieces with the same global
    label are coalesced, so a segment duplicated by both sides of an
    overlap survives exactly once.
    """
    windows = plan.windows
    mids = [
        0.5 * (windows[i + 1].start + windows[i].end) for i in range(len(windows) - 1)
    ]
    owned = []
    for i, w in enumerate(windows):
        lo = w.start if i == 0 else mids[i - 1]
        hi = w.end if i == len(windows) - 1 else mids[i]
        owned.append((lo, hi))

    pieces: list[DiarSegment] = []
    for chunk_index, segments in per_chunk:
        lo, hi = owned[chunk_index]
        for seg in segments:
            clipped = seg.interval.clip(lo, hi)
            if clipped is None:
                continue
            label = mapping[(chunk_index, seg.label)]
            words = tuple(w for w in seg.words if clipped.start <= w.start <= clipped.end)
            pieces.append(DiarSegment(clipped, label, words, SegmentOrigin.CHUNKED))

    pieces.sort(key=lambda s: (s.start, s.end, s.label))
    out: list[DiarSegment] = []
    for seg in pieces:
        prev = out[-1] if out else None
        if (
            prev is not None
            and seg.label == prev.label
            and seg.start - prev.end <= _TOUCH_EPS
        ):
            out[-1] = DiarSegment(
                TimeInterval(prev.start, max(prev.end, seg.end)),
                prev.label,
                prev.words + seg.words,
                SegmentOrigin.CHUNKED,
            )
        else:
            out.append(seg)
    return out
