"""End-to-end orchestration of the refinement pipeline.

Stage order for one recording: chunked diarization -> full-pass ASR ->
word/segment alignment -> focused ASR re-runs on mismatches -> embedding
re-verification -> LLM identity detection -> LLM labeling of flagged
segments -> per-segment label fusion -> adjacent merge -> duplicate
cleanup.  Every stage records a snapshot in the trace so each final
segment's provenance chain can be reconstructed; on failure the partial
trace survives attached to the raised error.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from . import adjudicate, chunking, reconcile, refine, reverify
from .backends import AudioRef, BackendConfig
from .core import UNKNOWN, DiarSegment, TimeInterval, Word, WordSource
from .errors import PipelineStageError
from .metrics import Annotation, DerReport, der
from .reverify import ReverifyResult


@dataclass
class PipelineConfig:
    """Tunable parameters of the whole pipeline, with defaults that match
    the intended operating point."""

    chunk_length: float = 250.0
    overlap: float = 5.0
    knn_k: int = 10
    llm_confidence_threshold: float = 0.9
    levenshtein_threshold: float = 0.9
    collar: float = 0.25
    orphan_gap: float = 1.0
    cluster_threshold: float = 0.65
    merge_max_gap: float = 0.0
    context_radius: int = 6
    context_max_words: int = 2000
    identity_max_words: int = 8000
    safeguards: bool = False
    backend_parallelism: int = 4
    backends: dict[str, BackendConfig] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("llm_confidence_threshold", "levenshtein_threshold", "cluster_threshold"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be within [0, 1], got {value}")
        for name in ("chunk_length", "overlap", "orphan_gap"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.collar < 0 or self.merge_max_gap < 0:
            raise ValueError("collar and merge_max_gap must be >= 0")
        if self.knn_k < 1 or self.backend_parallelism < 1:
            raise ValueError("knn_k and backend_parallelism must be >= 1")

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(doc)
        if "backends" in kwargs:
            kwargs["backends"] = {
                role: BackendConfig(**cfg) for role, cfg in kwargs["backends"].items()
            }
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh) or {}
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        doc = {
            f.name: getattr(self, f.name) for f in fields(self) if f.name != "backends"
        }
        doc["backends"] = {role: cfg.redacted() for role, cfg in self.backends.items()}
        return doc


@dataclass
class PipelineBackends:
    """The four model roles the pipeline talks to."""

    diarizer: Any
    transcriber: Any
    embedder: Any
    llm: Any
    llm_config: BackendConfig = field(default_factory=BackendConfig)


class PipelineTrace:
    """Ordered per-stage snapshots, JSON-serializable for auditing."""

    def __init__(self):
        self.stages: dict[str, Any] = {}

    def record(self, stage: str, payload: Any) -> None:
        self.stages[stage] = payload

    def get(self, stage: str, default=None):
        return self.stages.get(stage, default)

    def to_json(self) -> str:
        return json.dumps(self.stages, indent=2, sort_keys=True)


def _segment_snapshot(seg: DiarSegment) -> dict:
    return {
        "start": seg.start,
        "end": seg.end,
        "label": seg.label,
        "origin": seg.origin.value,
        "n_words": len(seg.words),
        "text": seg.text,
    }


def _final_snapshot(seg: refine.FinalSegment) -> dict:
    return {
        "start": seg.start,
        "end": seg.end,
        "identity": seg.identity,
        "provenance": seg.provenance.value,
        "source_ids": list(seg.source_ids),
        "n_words": len(seg.words),
    }


def _parallel_map(fn, items: Sequence, max_workers: int) -> list:
    """Map preserving order; results are deterministic regardless of
    scheduling because each call depends only on its own arguments."""
    if len(items) <= 1 or max_workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(fn, items))


def run_chunked_diarization(
    audio: AudioRef,
    config: PipelineConfig,
    backends: PipelineBackends,
    trace: PipelineTrace | None = None,
) -> list[DiarSegment]:
    """Diarize in overlapping chunks and unify labels across them.

    Recordings no longer than one chunk are diarized in a single window
    and keep their labels as-is (modulo global renaming).
    """
    duration = audio.duration_s
    if duration is None:
        raise ValueError("audio.duration_s is required for chunk planning")
    plan = chunking.plan_chunks(duration, config.chunk_length, config.overlap)

    if len(plan.windows) == 1:
        segments = backends.diarizer.diarize(audio, plan.windows[0])
        if trace is not None:
            trace.record(
                "chunking",
                {
                    "windows": [[w.start, w.end] for w in plan.windows],
                    "label_mapping": {},
                    "segments": [_segment_snapshot(s) for s in segments],
                },
            )
        return list(segments)

    def diarize_window(window: TimeInterval) -> list[DiarSegment]:
        return backends.diarizer.diarize(audio, window)

    per_chunk = list(enumerate(_parallel_map(diarize_window, plan.windows, config.backend_parallelism)))

    speakers: list[chunking.ChunkSpeaker] = []
    for chunk_index, segments in per_chunk:
        embeddings = _embed_segments(audio, segments, backends, config)
        speakers.extend(chunking.chunk_speakers(chunk_index, segments, embeddings))
    mapping = chunking.unify_labels(speakers, config.cluster_threshold)
    for chunk_index, segments in per_chunk:
        for seg in segments:
            mapping.setdefault((chunk_index, seg.label), f"chunk{chunk_index}_{seg.label}")

    stitched = chunking.stitch(per_chunk, mapping, plan)
    if trace is not None:
        trace.record(
            "chunking",
            {
                "windows": [[w.start, w.end] for w in plan.windows],
                "label_mapping": {f"{c}/{l}": g for (c, l), g in sorted(mapping.items())},
                "segments": [_segment_snapshot(s) for s in stitched],
            },
        )
    return stitched


def _embed_segments(
    audio: AudioRef,
    segments: Sequence[DiarSegment],
    backends: PipelineBackends,
    config: PipelineConfig,
) -> dict[int, np.ndarray]:
    """Embeddings for every segment long enough to embed."""
    eligible = [
        i for i, seg in enumerate(segments)
        if seg.interval.duration() >= backends.embedder.min_window
    ]

    def embed(i: int) -> np.ndarray:
        return backends.embedder.embed(audio, segments[i].interval)

    vectors = _parallel_map(embed, eligible, config.backend_parallelism)
    return dict(zip(eligible, vectors))


def run_reconciliation(
    audio: AudioRef,
    segments: Sequence[DiarSegment],
    config: PipelineConfig,
    backends: PipelineBackends,
    trace: PipelineTrace | None = None,
) -> reconcile.ReconcileOutput:
    """Full-pass ASR, alignment, and focused re-runs on mismatches."""
    words = backends.transcriber.transcribe(audio)
    if trace is not None:
        trace.record("asr", {"n_words": len(words)})

    aligned = reconcile.align(segments, words, orphan_gap=config.orphan_gap)
    if trace is not None:
        trace.record(
            "align",
            {
                "segments": [_segment_snapshot(s) for s in aligned.segments],
                "mismatches": [
                    {"kind": m.kind.value, **_segment_snapshot(m.segment)}
                    for m in aligned.mismatches
                ],
            },
        )

    def rerun_words(m: reconcile.Mismatch) -> list[Word]:
        out = backends.transcriber.transcribe(audio, m.segment.interval)
        return [replace(w, source=WordSource.RERUN_PASS) for w in out]

    reruns = _parallel_map(rerun_words, aligned.mismatches, config.backend_parallelism)
    by_interval = {
        m.segment.interval: words for m, words in zip(aligned.mismatches, reruns)
    }
    resolved = reconcile.resolve_mismatches(
        aligned, lambda interval: by_interval[interval], config.levenshtein_threshold
    )
    if trace is not None:
        trace.record(
            "rerun",
            {
                "kept": [_segment_snapshot(s) for s in resolved.segments],
                "dropped": [_segment_snapshot(s) for s in resolved.dropped],
            },
        )
    return resolved


def run_pipeline(
    audio: AudioRef,
    config: PipelineConfig,
    backends: PipelineBackends,
) -> tuple[list[refine.FinalSegment], PipelineTrace]:
    """Run every stage for one recording.

    Returns the final identity-labeled segments and the full trace.  A
    stage failure raises :class:`PipelineStageError` naming the stage,
    with the partial trace attached.
    """
    trace = PipelineTrace()

    def stage(name: str, fn):
        try:
            return fn()
        except Exception as exc:
            raise PipelineStageError(name, str(exc), trace) from exc

    sd_segments = stage("diarize", lambda: run_chunked_diarization(audio, config, backends, trace))
    reconciled = stage("reconcile", lambda: run_reconciliation(audio, sd_segments, config, backends, trace))
    segments = reconciled.segments

    if not segments:
        trace.record("final", {"segments": []})
        return [], trace

    embeddings = stage("embed", lambda: _embed_segments(audio, segments, backends, config))
    labels = [s.label for s in segments]
    reverified: list[ReverifyResult] = stage(
        "reverify", lambda: reverify.reverify_all(labels, embeddings, config.knn_k)
    )
    trace.record(
        "reverify",
        [
            {
                "id": r.segment_id,
                "original": r.original,
                "reverified": r.reverified,
                "low_confidence": r.low_confidence,
                "neighbors": list(r.neighbor_labels),
            }
            for r in reverified
        ],
    )

    identity = stage(
        "detect_identities",
        lambda: adjudicate.detect_identities(
            segments,
            backends.llm,
            config.backends.get("llm", backends.llm_config),
            safeguards=config.safeguards,
            max_words=config.identity_max_words,
        ),
    )
    trace.record("identity_map", {"map": identity.mapping, "raw_response": identity.raw_response})

    flagged = [
        r.segment_id
        for r in reverified
        if r.low_confidence or r.original == UNKNOWN
    ]
    known_labels = sorted({label for label in labels if label != UNKNOWN})

    def label_flagged() -> dict[int, adjudicate.LlmLabelResult]:
        results = {}
        for segment_id in flagged:  # sequential: each prompt may depend on prior context
            results[segment_id] = adjudicate.label_segment(
                segments,
                segment_id,
                backends.llm,
                config.backends.get("llm", backends.llm_config),
                known_labels=known_labels,
                radius=config.context_radius,
                max_words=config.context_max_words,
            )
        return results

    llm_labels = stage("label_segments", label_flagged)
    trace.record(
        "llm_labels",
        {
            str(i): {"label": r.llm_label, "confidence": r.confidence}
            for i, r in sorted(llm_labels.items())
        },
    )

    def refine_all() -> list[refine.FinalSegment]:
        out = []
        for i, seg in enumerate(segments):
            rec = refine.AdjudicationRecord(
                segment_id=i,
                original=seg.label,
                reverified=reverified[i].reverified,
                llm=llm_labels.get(i),
            )
            out.append(refine.refine_segment(seg, rec, identity.mapping, config.llm_confidence_threshold))
        return out

    refined = stage("refine", refine_all)
    trace.record("refine", [_final_snapshot(s) for s in refined])

    merged = stage("merge", lambda: refine.merge_adjacent(refined, config.merge_max_gap))
    trace.record("merge", [_final_snapshot(s) for s in merged])

    final = stage("dedup", lambda: refine.clean_duplicates(merged))
    trace.record(
        "dedup",
        {
            "removed": [
                _final_snapshot(s) for s in merged if s not in final
            ],
        },
    )
    trace.record("final", {"segments": [_final_snapshot(s) for s in final]})
    return final, trace


def final_annotation(segments: Sequence[refine.FinalSegment]) -> Annotation:
    """Scoring view of the final output. Unknown-identity segments carry
    unattributable speech and are not projected as a speaker."""
    return Annotation.from_pairs(
        (s.interval, s.identity) for s in segments if s.identity != UNKNOWN
    )


def segments_annotation(segments: Sequence[DiarSegment]) -> Annotation:
    return Annotation.from_pairs((s.interval, s.label) for s in segments)


def run_baseline(
    audio: AudioRef,
    config: PipelineConfig,
    backends: PipelineBackends,
) -> list[DiarSegment]:
    """The reconciled-only baseline: chunked SD + ASR alignment + re-runs,
    with no semantic post-processing."""
    sd_segments = run_chunked_diarization(audio, config, backends)
    return run_reconciliation(audio, sd_segments, config, backends).segments


def sweep_chunks(
    recordings: Sequence[tuple[AudioRef, Annotation]],
    lengths: Sequence[float],
    config: PipelineConfig,
    backends_for: Mapping[str, PipelineBackends] | PipelineBackends,
) -> list[tuple[float, float]]:
    """Grid-search chunk lengths: diarize each recording chunked at each
    length and score the stitched labeling against its reference.

    Returns (chunk_length, duration-weighted DER) rows in input order.
    """
    rows = []
    for length in lengths:
        reports: list[DerReport] = []
        for i, (audio, reference) in enumerate(recordings):
            backends = (
                backends_for if isinstance(backends_for, PipelineBackends)
                else backends_for[audio.uri]
            )
            cfg = replace(config, chunk_length=float(length))
            stitched = run_chunked_diarization(audio, cfg, backends)
            reports.append(der(reference, segments_annotation(stitched), cfg.collar))
        total = sum(r.total_reference for r in reports)
        micro = sum(r.der * r.total_reference for r in reports) / total if total else 0.0
        rows.append((float(length), micro))
    return rows
