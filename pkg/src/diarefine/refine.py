"""Label fusion and final-segment cleanup.

Fuses three signals per segment (original diarization label, acoustic
re-verification, LLM labeling) through the identity map to produce the
final identity-labeled segments, then merges adjacent same-identity
segments and removes duplicated ones.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, replace
from typing import Sequence

from .adjudicate import LlmLabelResult, is_confident
from .core import UNKNOWN, DiarSegment, TimeInterval, Word, interval_overlap
from .errors import MissingIdentity
from .textnorm import normalize_words


class Provenance(enum.Enum):
    ORIGINAL_AGREED = "original_agreed"
    LLM_ASSIGNED = "llm_assigned"
    MAJORITY_VOTE = "majority_vote"
    UNKNOWN_RETAINED = "unknown_retained"


@dataclass(frozen=True)
class AdjudicationRecord:
    """Per-segment bundle of the three label signals.

    ``llm`` is present only for segments that were flagged low-confidence
    or labeled Unknown; for all other segments the LLM was never asked.
    """

    segment_id: int
    original: str
    reverified: str
    llm: LlmLabelResult | None = None


@dataclass(frozen=True)
class FinalSegment:
    interval: TimeInterval
    identity: str
    words: tuple[Word, ...] = ()
    provenance: Provenance = Provenance.ORIGINAL_AGREED
    source_ids: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.identity:
            raise ValueError("identity must be non-empty")
        object.__setattr__(
            self, "words", tuple(sorted(self.words, key=lambda w: (w.start, w.end)))
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


def majority_vote(a: str, b: str, c: str) -> str:
    """The identity occurring at least twice; with all three distinct, the
    first argument (the original label's identity) wins."""
    counts = Counter((a, b, c))
    winner, n = counts.most_common(1)[0]
    return winner if n >= 2 else a


def _identity_for(label: str, identity_map: dict[str, str]) -> str:
    try:
        return identity_map[label]
    except KeyError:
        raise MissingIdentity(f"label {label!r} has no identity-map entry") from None


def refine_segment(
    segment: DiarSegment,
    rec: AdjudicationRecord,
    identity_map: dict[str, str],
    threshold: float,
) -> FinalSegment:
    """Fuse one segment's label signals into a final identity.

    Decision order: an Unknown segment takes the LLM's label when the LLM
    is confident and names a real speaker, and otherwise stays Unknown; a
    known segment keeps its own identity when re-verification agrees or
    the LLM is not confident; only a three-way disagreement goes to a
    majority vote over the identity-mapped labels.
    """
    confident = rec.llm is not None and is_confident(rec.llm, threshold)

    def final(identity: str, provenance: Provenance) -> FinalSegment:
        return FinalSegment(
            interval=segment.interval,
            identity=identity,
            words=segment.words,
            provenance=provenance,
            source_ids=(rec.segment_id,),
        )

    if rec.original == UNKNOWN:
        if not confident or rec.llm.llm_label == UNKNOWN:
            return final(UNKNOWN, Provenance.UNKNOWN_RETAINED)
        return final(_identity_for(rec.llm.llm_label, identity_map), Provenance.LLM_ASSIGNED)
    if rec.original == rec.reverified or not confident:
        return final(_identity_for(rec.original, identity_map), Provenance.ORIGINAL_AGREED)
    vote = majority_vote(
        _identity_for(rec.original, identity_map),
        _identity_for(rec.llm.llm_label, identity_map),
        _identity_for(rec.reverified, identity_map),
    )
    return final(vote, Provenance.MAJORITY_VOTE)


def merge_adjacent(segments: Sequence[FinalSegment], max_gap: float = 0.0) -> list[FinalSegment]:
    """Concatenate consecutive same-identity segments separated by at most
    ``max_gap`` seconds.  Unknown-identity segments never merge."""
    merged: list[FinalSegment] = []
    for seg in sorted(segments, key=lambda s: (s.start, s.end)):
        prev = merged[-1] if merged else None
        if (
            prev is not None
            and seg.identity == prev.identity
            and seg.identity != UNKNOWN
            and seg.start - prev.end <= max_gap
        ):
            merged[-1] = replace(
                prev,
                interval=TimeInterval(prev.start, max(prev.end, seg.end)),
                words=prev.words + seg.words,
                source_ids=prev.source_ids + seg.source_ids,
            )
        else:
            merged.append(seg)
    return merged


def _contains(inner: list[str], outer: list[str]) -> bool:
    """True iff ``inner`` is a non-empty contiguous sublist of ``outer``."""
    if not inner or len(inner) > len(outer):
        return False
    return any(
        outer[i : i + len(inner)] == inner for i in range(len(outer) - len(inner) + 1)
    )


def clean_duplicates(segments: Sequence[FinalSegment]) -> list[FinalSegment]:
    """Drop segments duplicated by an overlapping same-identity segment.

    A segment is removed when another segment overlaps it in time, carries
    the same identity, and contains its entire (normalized) transcript as
    a contiguous subsequence.  When two segments are mutually redundant,
    only the shorter one (then the later, then the higher-indexed) is
    removed, so identical twins leave exactly one survivor.  The pass is
    idempotent.
    """
    norm = [normalize_words([w.text for w in s.words]) for s in segments]

    def redundant(i: int, j: int) -> bool:
        s, t = segments[i], segments[j]
        return (
            s.identity == t.identity
            and interval_overlap(s.interval, t.interval) > 0
            and _contains(norm[i], norm[j])
        )

    def rank(i: int):
        return (segments[i].interval.duration(), -segments[i].start, -i)

    removed: set[int] = set()
    for i in range(len(segments)):
        for j in range(len(segments)):
            if i == j or not redundant(i, j):
                continue
            if redundant(j, i) and rank(i) >= rank(j):
                continue  # mutual pair: only the lower-ranked one goes
            removed.add(i)
            break
    return [s for i, s in enumerate(segments) if i not in removed]
