"""Diarization and transcription scoring.

DER is computed by exact interval sweep-line over segment boundaries (no
frame quantization): a collar around every reference boundary is excluded
from scoring, hypothesis labels are mapped to reference labels by solving
the maximum-overlap assignment problem exactly, and the error is
decomposed into missed detection, false alarm, and speaker confusion.
Overlapping speech is scored (each simultaneous reference speaker counts).
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import TimeInterval
from .errors import EmptyReference, ParseError
from .textnorm import edit_distance, normalize_words


@dataclass(frozen=True)
class Annotation:
    """A set of labeled speech intervals; may contain overlapping speech."""

    segments: tuple[tuple[TimeInterval, str], ...]

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[TimeInterval, str]]) -> "Annotation":
        return cls(tuple(sorted(pairs, key=lambda p: (p[0].start, p[0].end, p[1]))))

    @classmethod
    def from_triples(cls, triples: Iterable[tuple[float, float, str]]) -> "Annotation":
        return cls.from_pairs((TimeInterval(a, b), label) for a, b, label in triples)

    def labels(self) -> set[str]:
        return {label for _, label in self.segments}

    def label_support(self) -> dict[str, list[TimeInterval]]:
        """Per-label speaking time as merged, disjoint intervals."""
        by_label: dict[str, list[TimeInterval]] = defaultdict(list)
        for interval, label in self.segments:
            by_label[label].append(interval)
        return {label: merge_intervals(ivs) for label, ivs in by_label.items()}

    def relabeled(self, mapping: Mapping[str, str]) -> "Annotation":
        return Annotation.from_pairs(
            (iv, mapping.get(label, label)) for iv, label in self.segments
        )


@dataclass(frozen=True)
class DerReport:
    """DER with its error decomposition, all as fractions of reference time."""

    der: float
    false_alarm: float
    confusion: float
    missed: float
    total_reference: float
    mapping: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "der": self.der,
            "false_alarm": self.false_alarm,
            "confusion": self.confusion,
            "missed": self.missed,
            "total_reference": self.total_reference,
            "mapping": dict(sorted(self.mapping.items())),
        }


def merge_intervals(intervals: Iterable[TimeInterval]) -> list[TimeInterval]:
    """Union of intervals as a sorted list of disjoint intervals."""
    merged: list[list[float]] = []
    for iv in sorted(intervals, key=lambda iv: (iv.start, iv.end)):
        if merged and iv.start <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], iv.end)
        else:
            merged.append([iv.start, iv.end])
    return [TimeInterval(a, b) for a, b in merged]


def subtract_intervals(
    interval: TimeInterval, exclusions: Sequence[TimeInterval]
) -> list[TimeInterval]:
    """Pieces of ``interval`` not covered by the (merged, sorted) exclusions."""
    pieces = []
    cursor = interval.start
    for ex in exclusions:
        if ex.end <= cursor:
            continue
        if ex.start >= interval.end:
            break
        if ex.start > cursor:
            pieces.append(TimeInterval(cursor, min(ex.start, interval.end)))
        cursor = max(cursor, ex.end)
        if cursor >= interval.end:
            break
    if cursor < interval.end:
        pieces.append(TimeInterval(cursor, interval.end))
    return pieces


def apply_collar(reference: Annotation, collar: float) -> list[TimeInterval]:
    """Scoring exclusion mask: ±collar around every reference boundary.

    A zero collar yields an empty mask.  Exclusion bands around nearby
    boundaries are merged.
    """
    if collar < 0:
        raise ValueError("collar must be >= 0")
    if collar == 0:
        return []
    bands = []
    for interval, _ in reference.segments:
        bands.append(TimeInterval(interval.start - collar, interval.start + collar))
        bands.append(TimeInterval(interval.end - collar, interval.end + collar))
    return merge_intervals(bands)


def crop_annotation(ann: Annotation, exclusions: Sequence[TimeInterval]) -> Annotation:
    """Remove the excluded time from every segment, splitting as needed."""
    if not exclusions:
        return ann
    pairs = []
    for interval, label in ann.segments:
        for piece in subtract_intervals(interval, exclusions):
            pairs.append((piece, label))
    return Annotation.from_pairs(pairs)


def _support_overlap(a: Sequence[TimeInterval], b: Sequence[TimeInterval]) -> float:
    total = 0.0
    i = j = 0
    while i < len(a) and j < len(b):
        lo = max(a[i].start, b[j].start)
        hi = min(a[i].end, b[j].end)
        if hi > lo:
            total += hi - lo
        if a[i].end <= b[j].end:
            i += 1
        else:
            j += 1
    return total


def optimal_mapping(reference: Annotation, hypothesis: Annotation) -> dict[str, str]:
    """One-to-one partial mapping hypothesis label -> reference label that
    maximizes the total co-occurring speech duration.

    Solved exactly as a linear assignment problem; labels whose best
    assignment has zero overlap are left unmapped.
    """
    ref_support = reference.label_support()
    hyp_support = hypothesis.label_support()
    ref_labels = sorted(ref_support)
    hyp_labels = sorted(hyp_support)
    if not ref_labels or not hyp_labels:
        return {}
    overlap = np.zeros((len(hyp_labels), len(ref_labels)))
    for i, h in enumerate(hyp_labels):
        for j, r in enumerate(ref_labels):
            overlap[i, j] = _support_overlap(hyp_support[h], ref_support[r])
    rows, cols = linear_sum_assignment(-overlap)
    return {
        hyp_labels[i]: ref_labels[j]
        for i, j in zip(rows, cols)
        if overlap[i, j] > 0
    }


def der(reference: Annotation, hypothesis: Annotation, collar: float = 0.0) -> DerReport:
    """Diarization error rate of a hypothesis against a reference.

    The collar is excluded around reference boundaries before anything
    else, including the label-mapping search.  Components satisfy
    der == false_alarm + confusion + missed and are invariant under any
    bijective renaming of hypothesis labels.
    """
    exclusions = apply_collar(reference, collar)
    ref = crop_annotation(reference, exclusions)
    hyp = crop_annotation(hypothesis, exclusions)
    ref_support = ref.label_support()
    hyp_support = hyp.label_support()

    total = sum(iv.duration() for ivs in ref_support.values() for iv in ivs)
    if total <= 0:
        raise EmptyReference("reference has no scored speech")

    mapping = optimal_mapping(ref, hyp)

    events: list[tuple[float, int, str, int]] = []
    for label, ivs in ref_support.items():
        for iv in ivs:
            events.append((iv.start, 0, label, +1))
            events.append((iv.end, 0, label, -1))
    for label, ivs in hyp_support.items():
        for iv in ivs:
            events.append((iv.start, 1, label, +1))
            events.append((iv.end, 1, label, -1))
    events.sort(key=lambda e: e[0])

    active_ref: set[str] = set()
    active_hyp: set[str] = set()
    miss_s = fa_s = conf_s = 0.0
    prev_t: float | None = None
    i = 0
    while i < len(events):
        t = events[i][0]
        if prev_t is not None and t > prev_t and (active_ref or active_hyp):
            dt = t - prev_t
            n_ref = len(active_ref)
            n_hyp = len(active_hyp)
            correct = sum(
                1 for h, r in mapping.items() if h in active_hyp and r in active_ref
            )
            miss_s += dt * max(0, n_ref - n_hyp)
            fa_s += dt * max(0, n_hyp - n_ref)
            conf_s += dt * (min(n_ref, n_hyp) - correct)
        while i < len(events) and events[i][0] == t:
            _, side, label, delta = events[i]
            target = active_ref if side == 0 else active_hyp
            if delta > 0:
                target.add(label)
            else:
                target.discard(label)
            i += 1
        prev_t = t

    false_alarm = fa_s / total
    confusion = conf_s / total
    missed = miss_s / total
    return DerReport(
        der=false_alarm + confusion + missed,
        false_alarm=false_alarm,
        confusion=confusion,
        missed=missed,
        total_reference=total,
        mapping=mapping,
    )


def wer(reference_words: Sequence[str], hypothesis_words: Sequence[str]) -> float:
    """Word error rate after normalization; may exceed 1 for insertion-heavy
    hypotheses."""
    ref = normalize_words(reference_words)
    hyp = normalize_words(hypothesis_words)
    if not ref:
        raise EmptyReference("reference transcript is empty after normalization")
    return edit_distance(ref, hyp) / len(ref)


def relative_reduction(baseline: float, improved: float) -> float:
    """Fractional error reduction of ``improved`` relative to ``baseline``."""
    if baseline == 0:
        raise ZeroDivisionError("baseline error rate is zero")
    return (baseline - improved) / baseline


# ---------------------------------------------------------------------------
# Aggregation and report formatting


def aggregate_reports(reports: Mapping[str, DerReport]) -> dict:
    """Micro (duration-weighted) and macro (unweighted mean) aggregates."""
    if not reports:
        return {"micro": None, "macro": None}
    total = sum(r.total_reference for r in reports.values())

    def micro(attr: str) -> float:
        return sum(getattr(r, attr) * r.total_reference for r in reports.values()) / total

    def macro(attr: str) -> float:
        return sum(getattr(r, attr) for r in reports.values()) / len(reports)

    fields = ("der", "false_alarm", "confusion", "missed")
    return {
        "micro": {name: micro(name) for name in fields},
        "macro": {name: macro(name) for name in fields},
        "total_reference": total,
    }


def format_der_table(rows: Sequence[tuple[str, DerReport, float | None]]) -> str:
    """Plain-text scoring table (percentages): DER, FA, Conf., Miss Det."""
    has_wer = any(w is not None for _, _, w in rows)
    header = ["", "DER", "FA", "Conf.", "Miss Det."] + (["WER"] if has_wer else [])
    body = []
    for name, report, wer_value in rows:
        cells = [
            name,
            f"{100 * report.der:.2f}",
            f"{100 * report.false_alarm:.2f}",
            f"{100 * report.confusion:.2f}",
            f"{100 * report.missed:.2f}",
        ]
        if has_wer:
            cells.append("-" if wer_value is None else f"{100 * wer_value:.2f}")
        body.append(cells)
    widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
    lines = []
    for row in [header] + body:
        lines.append("  ".join(cell.rjust(w) for cell, w in zip(row, widths)))
    return "\n".join(lines)


def report_to_json(report: DerReport, **extra) -> str:
    doc = report.to_dict()
    doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# RTTM interchange

_RTTM_FIELDS = 9


def read_rttm(text: str) -> dict[str, Annotation]:
    """Parse RTTM text into one Annotation per file id.

    Raises :class:`ParseError` naming the offending line.
    """
    pairs: dict[str, list[tuple[TimeInterval, str]]] = defaultdict(list)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith(";;"):
            continue
        fields = line.split()
        if len(fields) < _RTTM_FIELDS or fields[0] != "SPEAKER":
            raise ParseError(f"not a SPEAKER record: {raw!r}", lineno)
        try:
            onset = float(fields[3])
            duration = float(fields[4])
        except ValueError:
            raise ParseError(f"bad onset/duration in {raw!r}", lineno) from None
        if duration < 0:
            raise ParseError(f"negative duration in {raw!r}", lineno)
        pairs[fields[1]].append((TimeInterval(onset, onset + duration), fields[7]))
    return {file_id: Annotation.from_pairs(p) for file_id, p in pairs.items()}


def read_rttm_file(path) -> dict[str, Annotation]:
    with open(path, encoding="utf-8") as fh:
        return read_rttm(fh.read())


def write_rttm(file_id: str, annotation: Annotation) -> str:
    """Serialize an annotation as RTTM SPEAKER lines."""
    lines = []
    for interval, label in annotation.segments:
        lines.append(
            f"SPEAKER {file_id} 1 {interval.start:.3f} {interval.duration():.3f} "
            f"<NA> <NA> {label} <NA> <NA>"
        )
    return "\n".join(lines) + ("\n" if lines else "")
