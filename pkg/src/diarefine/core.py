"""Shared domain types and time-interval primitives.

All types here are immutable values and safe to share across threads.
Times are double-precision recording seconds; comparisons are exact
(no epsilon), since timestamps come from model output and are never
re-derived arithmetically at matching time.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

#: Reserved speaker label / identity for speech that cannot be attributed.
UNKNOWN = "Unknown"

# Speaker labels ("spk0", ...) and identities ("Patient", ...) are plain
# strings; UNKNOWN is reserved and never produced by model backends.
SpeakerLabel = str
Identity = str
IdentityMap = dict[str, str]


@dataclass(frozen=True, order=True)
class TimeInterval:
    """A [start, end] interval in seconds, end >= start."""

    start: float
    end: float

    def __post_init__(self):
        if self.end < self.start:
            raise ValueError(f"interval end {self.end} < start {self.start}")

    def duration(self) -> float:
        return self.end - self.start

    def midpoint(self) -> float:
        return 0.5 * (self.start + self.end)

    def clip(self, lo: float, hi: float) -> "TimeInterval | None":
        """Intersection with [lo, hi], or None if empty."""
        a, b = max(self.start, lo), min(self.end, hi)
        if b <= a:
            return None
        return TimeInterval(a, b)


def interval_overlap(a: TimeInterval, b: TimeInterval) -> float:
    """Overlap duration of two intervals; 0.0 for disjoint or touching ones."""
    return max(0.0, min(a.end, b.end) - max(a.start, b.start))


class WordSource(enum.Enum):
    INITIAL_PASS = "initial"
    RERUN_PASS = "rerun"


@dataclass(frozen=True)
class Word:
    """An ASR token with word-level timestamps."""

    text: str
    interval: TimeInterval
    source: WordSource = WordSource.INITIAL_PASS

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("word text must be non-empty")

    @property
    def start(self) -> float:
        return self.interval.start

    @property
    def end(self) -> float:
        return self.interval.end


class SegmentOrigin(enum.Enum):
    DIARIZER = "diarizer"
    ORPHAN_WORDS = "orphan_words"
    CHUNKED = "chunked"


@dataclass(frozen=True)
class DiarSegment:
    """A diarization segment: a time interval, a speaker label, and the
    ASR words assigned to it (sorted by start time)."""

    interval: TimeInterval
    label: SpeakerLabel
    words: tuple[Word, ...] = ()
    origin: SegmentOrigin = SegmentOrigin.DIARIZER

    def __post_init__(self):
        words = tuple(sorted(self.words, key=lambda w: (w.start, w.end)))
        object.__setattr__(self, "words", words)
        if self.origin is SegmentOrigin.DIARIZER:
            for w in words:
                if not self.interval.start <= w.start <= self.interval.end:
                    raise ValueError(
                        f"word at {w.start} outside segment "
                        f"[{self.interval.start}, {self.interval.end}]"
                    )

    @property
    def start(self) -> float:
        return self.interval.start

    @property
    def end(self) -> float:
        return self.interval.end

    @property
    def text(self) -> str:
        return " ".join(w.text for w in self.words)

    def with_words(self, words) -> "DiarSegment":
        return replace(self, words=tuple(words))

    def with_label(self, label: str) -> "DiarSegment":
        return replace(self, label=label)


def word_in_segment(w: Word, s: DiarSegment) -> bool:
    """True iff the word's start time falls within the segment's interval.

    Both boundaries are inclusive, so a word landing exactly on a segment
    edge is still matched.
    """
    return s.interval.start <= w.start <= s.interval.end
