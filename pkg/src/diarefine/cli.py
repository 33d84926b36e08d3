"""Command-line driver: run the pipeline, score results, sweep chunk
lengths, and generate mock fixtures."""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import mockgen
from .backends import BackendConfig, HttpChatCompleter
from .errors import DiarefineError, ParseError, PipelineStageError
from .metrics import (
    Annotation,
    aggregate_reports,
    der,
    format_der_table,
    read_rttm_file,
    wer,
    write_rttm,
)
from .mock import MockScript, mock_backends
from .pipeline import (
    PipelineBackends,
    PipelineConfig,
    final_annotation,
    run_pipeline,
    sweep_chunks,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diarefine",
        description="Speaker-diarization refinement pipeline and scorer.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the full pipeline on recordings")
    run.add_argument("--mock-script", action="append", default=[],
                     help="mock script JSON (repeatable); enables the mock backends")
    run.add_argument("--audio", action="append", default=[],
                     help="audio path for a real-backend run (requires user-supplied shims)")
    run.add_argument("--out-dir", default="out", help="directory for result JSON and RTTM")
    run.add_argument("--trace-dir", default=None, help="directory for per-stage trace JSON")
    run.add_argument("--seed", type=int, default=0, help="mock backend seed")
    run.add_argument("--stable-labels", action="store_true",
                     help="keep the mock diarizer's labels stable across chunks")
    run.add_argument("--llm-endpoint", default=None, help="chat-completion endpoint URL")
    run.add_argument("--llm-model", default=None, help="model name for the LLM endpoint")
    run.add_argument("--jobs", type=int, default=1, help="recordings processed concurrently")
    _add_config_flags(run)

    score = sub.add_parser("score", help="score a hypothesis against a reference")
    score.add_argument("--hypothesis", required=True,
                       help="pipeline output JSON or RTTM file")
    score.add_argument("--reference", required=True, help="reference RTTM file")
    score.add_argument("--collar", type=float, default=0.25)
    score.add_argument("--reference-transcript", default=None,
                       help="reference words as JSON (list of strings or {\"words\": [...]})")
    score.add_argument("--out", default=None, help="write the report as JSON here")

    sweep = sub.add_parser("sweep-chunks", help="grid-search chunk lengths on mock recordings")
    sweep.add_argument("--mock-script", action="append", required=True)
    sweep.add_argument("--lengths", required=True,
                       help="comma-separated chunk lengths in seconds, e.g. 90,250")
    sweep.add_argument("--seed", type=int, default=0)
    sweep.add_argument("--out", default=None, help="write rows as JSON here")
    _add_config_flags(sweep)

    gen = sub.add_parser("mock-gen", help="generate a mock conversation fixture")
    gen.add_argument("--scenario", choices=mockgen.SCENARIOS, default="clean")
    gen.add_argument("--duration", type=float, default=None)
    gen.add_argument("--speakers", type=int, default=None)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("-o", "--out", required=True)
    return parser


_CONFIG_FLAGS = {
    "chunk_length": ("--chunk-length", float),
    "overlap": ("--overlap", float),
    "knn_k": ("--knn-k", int),
    "llm_confidence_threshold": ("--llm-threshold", float),
    "levenshtein_threshold": ("--levenshtein-threshold", float),
    "collar": ("--collar", float),
    "orphan_gap": ("--orphan-gap", float),
    "cluster_threshold": ("--cluster-threshold", float),
    "merge_max_gap": ("--merge-max-gap", float),
}


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="YAML config file")
    for _, (flag, typ) in _CONFIG_FLAGS.items():
        parser.add_argument(flag, type=typ, default=None)
    parser.add_argument("--safeguards", action="store_true", default=None,
                        help="add strict output-format constraints to the identity prompt")


def load_config(args: argparse.Namespace) -> PipelineConfig:
    """Flag > config file > default precedence."""
    config = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    overrides = {}
    for name in _CONFIG_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "safeguards", None):
        overrides["safeguards"] = True
    return replace(config, **overrides) if overrides else config


def _mock_pipeline_backends(script: MockScript, uri: str, args) -> PipelineBackends:
    llm = None
    llm_config = BackendConfig()
    if getattr(args, "llm_endpoint", None):
        llm = HttpChatCompleter()
        llm_config = BackendConfig(
            endpoint=args.llm_endpoint,
            model_name=args.llm_model or "default",
            auth_token=os.environ.get("LLM_AUTH_TOKEN"),
        )
    mocks = mock_backends(
        script,
        seed=args.seed,
        uri=uri,
        relabel_per_window=not getattr(args, "stable_labels", False),
        llm=llm,
    )
    return PipelineBackends(
        diarizer=mocks.diarizer,
        transcriber=mocks.transcriber,
        embedder=mocks.embedder,
        llm=mocks.llm,
        llm_config=llm_config,
    )


def render_result(segments, trace, config: PipelineConfig) -> str:
    identity_map = trace.get("identity_map", {}).get("map", {})
    doc = {
        "segments": [
            {
                "start": s.start,
                "end": s.end,
                "identity": s.identity,
                "provenance": s.provenance.value,
                "source_ids": list(s.source_ids),
                "words": [
                    {"text": w.text, "start": w.start, "end": w.end} for w in s.words
                ],
            }
            for s in segments
        ],
        "identity_map": identity_map,
        "config_echo": config.to_dict(),
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def _run_one(script_path: str, args, config: PipelineConfig) -> str:
    script = MockScript.from_file(script_path)
    stem = Path(script_path).stem
    backends = _mock_pipeline_backends(script, script_path, args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_dir = Path(args.trace_dir) if args.trace_dir else None
    if trace_dir:
        trace_dir.mkdir(parents=True, exist_ok=True)

    try:
        segments, trace = run_pipeline(script.audio_ref(script_path), config, backends)
    except PipelineStageError as exc:
        if trace_dir and exc.trace is not None:
            (trace_dir / f"{stem}.trace.json").write_text(exc.trace.to_json(), encoding="utf-8")
        raise

    (out_dir / f"{stem}.json").write_text(render_result(segments, trace, config), encoding="utf-8")
    (out_dir / f"{stem}.rttm").write_text(write_rttm(stem, final_annotation(segments)), encoding="utf-8")
    if trace_dir:
        (trace_dir / f"{stem}.trace.json").write_text(trace.to_json(), encoding="utf-8")
    return str(out_dir / f"{stem}.json")


def cmd_run(args) -> int:
    if args.audio and not args.mock_script:
        print(
            "diarefine ships only mock SD/ASR/embedding backends and an HTTP LLM "
            "client; real-model runs need user-supplied shims behind the backend "
            "protocols. Use --mock-script for a self-contained run.",
            file=sys.stderr,
        )
        return 2
    if not args.mock_script:
        print("nothing to do: provide --mock-script", file=sys.stderr)
        return 2
    config = load_config(args)

    def one(path: str) -> str:
        return _run_one(path, args, config)

    if args.jobs > 1 and len(args.mock_script) > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            outputs = list(pool.map(one, args.mock_script))
    else:
        outputs = [one(path) for path in args.mock_script]
    for path in outputs:
        print(f"wrote {path}")
    return 0


def _load_hypothesis(path: str) -> tuple[Annotation, list[str] | None]:
    """Hypothesis annotation plus its words when the file carries them."""
    if path.endswith(".json"):
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if "segments" not in doc:
            raise ParseError(f"{path}: expected a pipeline output JSON with 'segments'")
        pairs = []
        words: list[str] = []
        for seg in doc["segments"]:
            if seg["identity"] != "Unknown":
                pairs.append((seg["start"], seg["end"], seg["identity"]))
            words.extend(w["text"] for w in seg.get("words", []))
        return Annotation.from_triples(pairs), words
    annotations = read_rttm_file(path)
    if len(annotations) != 1:
        raise ParseError(f"{path}: expected exactly one file id, got {sorted(annotations)}")
    return next(iter(annotations.values())), None


def _load_reference_words(path: str) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if isinstance(doc, dict):
        doc = doc.get("words", [])
    words = []
    for item in doc:
        words.append(item["text"] if isinstance(item, dict) else str(item))
    return words


def cmd_score(args) -> int:
    hypothesis, hyp_words = _load_hypothesis(args.hypothesis)
    references = read_rttm_file(args.reference)
    if len(references) != 1:
        raise ParseError(
            f"{args.reference}: expected exactly one file id, got {sorted(references)}"
        )
    reference = next(iter(references.values()))
    report = der(reference, hypothesis, args.collar)

    wer_value = None
    if args.reference_transcript:
        if hyp_words is None:
            print("WER needs a hypothesis JSON with words; got RTTM", file=sys.stderr)
            return 2
        wer_value = wer(_load_reference_words(args.reference_transcript), hyp_words)

    print(format_der_table([(Path(args.hypothesis).name, report, wer_value)]))
    if args.out:
        doc = report.to_dict()
        if wer_value is not None:
            doc["wer"] = wer_value
        Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True), encoding="utf-8")
        print(f"wrote {args.out}")
    return 0


def cmd_sweep(args) -> int:
    config = load_config(args)
    lengths = [float(x) for x in args.lengths.split(",") if x.strip()]
    recordings = []
    backends_by_uri = {}
    for path in args.mock_script:
        script = MockScript.from_file(path)
        audio = script.audio_ref(path)
        recordings.append((audio, script.reference_by_speaker()))
        backends_by_uri[path] = _mock_pipeline_backends(script, path, args)

    rows = sweep_chunks(recordings, lengths, config, backends_by_uri)
    print(f"{'chunk_length':>12}  {'DER':>8}")
    for length, value in rows:
        print(f"{length:>12.0f}  {100 * value:>7.2f}%")
    if args.out:
        Path(args.out).write_text(
            json.dumps([{"chunk_length": l, "der": d} for l, d in rows], indent=2),
            encoding="utf-8",
        )
        print(f"wrote {args.out}")
    return 0


def cmd_mock_gen(args) -> int:
    kwargs = {}
    if args.duration is not None and args.scenario != "messy":
        kwargs["duration"] = args.duration
    if args.speakers is not None and args.scenario in ("clean", "drift"):
        kwargs["n_speakers"] = args.speakers
    script = mockgen.generate(args.scenario, seed=args.seed, **kwargs)
    Path(args.out).write_text(script.to_json(), encoding="utf-8")
    print(f"wrote {args.out} ({len(script.turns)} turns, {script.duration:.1f}s)")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "score":
            return cmd_score(args)
        if args.command == "sweep-chunks":
            return cmd_sweep(args)
        if args.command == "mock-gen":
            return cmd_mock_gen(args)
    except PipelineStageError as exc:
        print(f"pipeline failed at {exc}", file=sys.stderr)
        return 1
    except DiarefineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
