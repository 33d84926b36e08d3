"""Alignment of diarization segments with ASR words.

Words are matched to segments by start-time containment.  Two mismatch
classes fall out of the alignment: ASR words that no segment covers
(grouped into Unknown segments) and segments that cover no words.  Both
are re-checked with a focused ASR pass; the retention rules decide
whether each mismatched segment survives.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

from .core import (
    UNKNOWN,
    DiarSegment,
    SegmentOrigin,
    TimeInterval,
    Word,
    WordSource,
)
from .textnorm import edit_distance, normalize_text


class MismatchKind(enum.Enum):
    ORPHAN_WORDS = "orphan_words"
    EMPTY_SEGMENT = "empty_segment"


@dataclass(frozen=True)
class Mismatch:
    """A segment flagged by alignment as needing a focused ASR re-check."""

    kind: MismatchKind
    segment: DiarSegment

    def __post_init__(self):
        if self.kind is MismatchKind.ORPHAN_WORDS:
            if self.segment.label != UNKNOWN or not self.segment.words:
                raise ValueError("orphan mismatch must be an Unknown segment with words")
        else:
            if self.segment.words or self.segment.label == UNKNOWN:
                raise ValueError("empty mismatch must be a wordless labeled segment")


@dataclass
class ReconcileOutput:
    """Aligned segments plus the mismatch and drop audit trail."""

    segments: list[DiarSegment] = field(default_factory=list)
    mismatches: list[Mismatch] = field(default_factory=list)
    dropped: list[DiarSegment] = field(default_factory=list)


def levenshtein_similarity(a: str, b: str) -> float:
    """Character-level similarity in [0, 1]; 1.0 iff the strings are equal."""
    if not a and not b:
        return 1.0
    return 1.0 - edit_distance(a, b) / max(len(a), len(b))


def group_orphans(words: Sequence[Word], gap_threshold: float = 1.0) -> list[DiarSegment]:
    """Group unmatched words into Unknown segments.

    Maximal runs of consecutive words whose inter-word silence is at most
    ``gap_threshold`` seconds become one segment spanning first start to
    last end.
    """
    segments: list[DiarSegment] = []
    run: list[Word] = []
    for w in words:
        if run and w.start - run[-1].end > gap_threshold:
            segments.append(_orphan_segment(run))
            run = []
        run.append(w)
    if run:
        segments.append(_orphan_segment(run))
    return segments


def _orphan_segment(run: list[Word]) -> DiarSegment:
    interval = TimeInterval(run[0].start, max(w.end for w in run))
    return DiarSegment(interval, UNKNOWN, tuple(run), SegmentOrigin.ORPHAN_WORDS)


def align(
    sd: Sequence[DiarSegment],
    words: Sequence[Word],
    orphan_gap: float = 1.0,
) -> ReconcileOutput:
    """Assign each ASR word to the diarization segment containing its start.

    When several overlapping segments contain a word's start, the segment
    with the latest start wins (most specific container); among equal
    starts, the one ending earliest.  Words covered by no segment are
    grouped into Unknown segments; segments left without words are flagged
    as empty.  No word is lost: every input word ends up in exactly one
    output segment.
    """
    assigned: dict[int, list[Word]] = {i: [] for i in range(len(sd))}
    orphans: list[Word] = []

    active: list[int] = []
    nxt = 0
    for w in sorted(words, key=lambda w: (w.start, w.end)):
        while nxt < len(sd) and sd[nxt].interval.start <= w.start:
            active.append(nxt)
            nxt += 1
        active = [j for j in active if sd[j].interval.end >= w.start]
        if active:
            best = max(active, key=lambda j: (sd[j].interval.start, -sd[j].interval.end))
            assigned[best].append(w)
        else:
            orphans.append(w)

    out = ReconcileOutput()
    for i, seg in enumerate(sd):
        seg = seg.with_words(assigned[i])
        out.segments.append(seg)
        if not seg.words:
            out.mismatches.append(Mismatch(MismatchKind.EMPTY_SEGMENT, seg))
    for seg in group_orphans(orphans, orphan_gap):
        out.segments.append(seg)
        out.mismatches.append(Mismatch(MismatchKind.ORPHAN_WORDS, seg))
    out.segments.sort(key=lambda s: (s.start, s.end, s.label))
    out.mismatches.sort(key=lambda m: (m.segment.start, m.segment.end))
    return out


def rerun_policy(
    m: Mismatch,
    rerun_words: Sequence[Word],
    similarity_threshold: float = 0.9,
) -> DiarSegment | None:
    """Decide whether a mismatched segment survives its focused ASR re-check.

    Orphan segments are kept (with their original words) only when the
    re-run transcript is highly similar to the original; empty segments
    are kept only when the re-run recognizes at least one word, and adopt
    the re-run words.  Returns the surviving segment or None to drop.
    """
    if m.kind is MismatchKind.ORPHAN_WORDS:
        original = normalize_text(m.segment.text)
        rerun = normalize_text(" ".join(w.text for w in rerun_words))
        if levenshtein_similarity(original, rerun) >= similarity_threshold:
            return m.segment
        return None
    if not rerun_words:
        return None
    adopted = tuple(replace(w, source=WordSource.RERUN_PASS) for w in rerun_words)
    return m.segment.with_words(adopted)


def resolve_mismatches(
    out: ReconcileOutput,
    rerun: Callable[[TimeInterval], Sequence[Word]],
    similarity_threshold: float = 0.9,
) -> ReconcileOutput:
    """Apply :func:`rerun_policy` to every mismatch in an alignment.

    ``rerun`` maps a segment interval to that interval's re-run ASR words.
    Returns a new output whose surviving segments are sorted by start time
    and whose ``dropped`` list preserves the removed segments for auditing.
    """
    resolution: dict[int, DiarSegment | None] = {}
    for m in out.mismatches:
        resolution[id(m.segment)] = rerun_policy(m, rerun(m.segment.interval), similarity_threshold)

    kept: list[DiarSegment] = []
    dropped = list(out.dropped)
    for seg in out.segments:
        if id(seg) in resolution:
            res = resolution[id(seg)]
            if res is None:
                dropped.append(seg)
            else:
                kept.append(res)
        else:
            kept.append(seg)
    kept.sort(key=lambda s: (s.start, s.end, s.label))
    return ReconcileOutput(segments=kept, mismatches=[], dropped=dropped)
