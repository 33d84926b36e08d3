"""LLM prompt construction, response parsing, and the confidence gate.

Two prompts drive the semantic stage: identity detection over the whole
transcript (one JSON object mapping speaker labels to identities) and
per-segment labeling of low-confidence segments (JSON with a label and a
self-reported confidence).  Prompt templates live in ``prompts/`` so they
can be tuned without code changes; construction is deterministic so a
given transcript always produces byte-identical prompts.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from string import Template
from typing import Sequence

from .backends import BackendConfig, ChatCompleter
from .core import UNKNOWN, DiarSegment, TimeInterval
from .errors import IncompleteMap, UnparseableResponse

SAFEGUARDS_TEXT = (
    'Use specific identities rather than general labels like "main" or '
    '"background". Make sure every original speaker label appears as a key '
    "in the JSON object.\n"
)

TRUNCATION_MARKER = "[... middle of conversation omitted ...]"

REPROMPT_SUFFIX = (
    "\n\nYour previous reply could not be used. "
    "Reply with only the JSON object described above."
)

TARGET_LABEL = "???"

_LINE_RE = re.compile(r"^\[(\d+(?:\.\d+)?)-(\d+(?:\.\d+)?)\] ([^:]+): (.*)$")


@dataclass(frozen=True)
class IdentityDetectionResult:
    mapping: dict[str, str]
    raw_response: str


@dataclass(frozen=True)
class LlmLabelResult:
    segment_id: int
    llm_label: str
    confidence: float
    raw_response: str


def load_template(name: str) -> str:
    return resources.files(__package__).joinpath(f"prompts/{name}.txt").read_text("utf-8")


def serialize_segment(seg: DiarSegment, label: str | None = None) -> str:
    shown = seg.label if label is None else label
    return f"[{seg.start:.2f}-{seg.end:.2f}] {shown}: {seg.text}"


def _word_count(seg: DiarSegment) -> int:
    return len(seg.words)


def _truncate_head_tail(segments: Sequence[DiarSegment], max_words: int) -> list[str]:
    """Serialized lines, keeping the head and tail halves of the word budget.

    Identity cues concentrate at conversation boundaries (greetings and
    sign-offs), so the middle is dropped first.
    """
    total = sum(_word_count(s) for s in segments)
    if total <= max_words:
        return [serialize_segment(s) for s in segments]
    half = max_words // 2
    head: list[str] = []
    used = 0
    for s in segments:
        if used + _word_count(s) > half and head:
            break
        head.append(serialize_segment(s))
        used += _word_count(s)
    tail: list[str] = []
    used = 0
    for s in reversed(segments[len(head):]):
        if used + _word_count(s) > half and tail:
            break
        tail.append(serialize_segment(s))
        used += _word_count(s)
    return head + [TRUNCATION_MARKER] + list(reversed(tail))


def build_identity_prompt(
    segments: Sequence[DiarSegment],
    safeguards: bool = False,
    max_words: int = 8000,
) -> str:
    template = Template(load_template("identity_detection"))
    transcript = "\n".join(_truncate_head_tail(segments, max_words))
    return template.substitute(
        safeguards=SAFEGUARDS_TEXT if safeguards else "",
        transcript=transcript,
    )


def build_label_prompt(
    segments: Sequence[DiarSegment],
    target: int,
    known_labels: Sequence[str],
    radius: int = 6,
    max_words: int = 2000,
) -> str:
    template = Template(load_template("segment_labeling"))
    lo = max(0, target - radius)
    hi = min(len(segments), target + radius + 1)
    context_ids = [i for i in range(lo, hi) if i != target]
    # Trim the outermost context first until the word budget is met.
    budget = sum(_word_count(segments[i]) for i in context_ids) + _word_count(segments[target])
    while context_ids and budget > max_words:
        far = max(context_ids, key=lambda i: (abs(i - target), i))
        context_ids.remove(far)
        budget -= _word_count(segments[far])
    context = "\n".join(serialize_segment(segments[i]) for i in context_ids)
    return template.substitute(
        labels=", ".join(known_labels),
        context=context,
        target=serialize_segment(segments[target], label=TARGET_LABEL),
    )


def extract_json_object(text: str):
    """First syntactically valid JSON object embedded in ``text``, or None."""
    decoder = json.JSONDecoder()
    for i, ch in enumerate(text):
        if ch != "{":
            continue
        try:
            obj, _ = decoder.raw_decode(text[i:])
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            return obj
    return None


def detect_identities(
    segments: Sequence[DiarSegment],
    llm: ChatCompleter,
    config: BackendConfig,
    safeguards: bool = False,
    max_words: int = 8000,
) -> IdentityDetectionResult:
    """Ask the LLM for a total mapping from speaker labels to identities.

    One re-prompt is attempted on an unparseable or incomplete response;
    after that, :class:`UnparseableResponse` or :class:`IncompleteMap` is
    raised.  The Unknown label always maps to the Unknown identity.
    """
    if not segments:
        raise ValueError("cannot detect identities over an empty transcript")
    known = sorted({s.label for s in segments if s.label != UNKNOWN})
    prompt = build_identity_prompt(segments, safeguards=safeguards, max_words=max_words)
    failure: Exception | None = None
    raw = ""
    for attempt in range(2):
        response = llm.complete(prompt if attempt == 0 else prompt + REPROMPT_SUFFIX, config)
        raw = response.text
        obj = extract_json_object(raw)
        if obj is None:
            failure = UnparseableResponse(f"no JSON object in identity response: {raw[:200]}")
            continue
        mapping = {
            str(k): str(v).strip()
            for k, v in obj.items()
            if isinstance(v, (str, int, float)) and str(v).strip()
        }
        missing = [label for label in known if label not in mapping]
        if missing:
            failure = IncompleteMap(f"identity map missing labels: {missing}")
            continue
        final = {label: mapping[label] for label in known}
        final[UNKNOWN] = UNKNOWN
        return IdentityDetectionResult(final, raw)
    assert failure is not None
    raise failure


def label_segment(
    segments: Sequence[DiarSegment],
    target: int,
    llm: ChatCompleter,
    config: BackendConfig,
    known_labels: Sequence[str] | None = None,
    radius: int = 6,
    max_words: int = 2000,
) -> LlmLabelResult:
    """Ask the LLM to label one low-confidence or Unknown segment.

    Responses that cannot be parsed after one re-prompt, and labels outside
    the known set, degrade to ("Unknown", 0.0) rather than erroring: an
    unusable answer is treated as "not confident".
    """
    if known_labels is None:
        known_labels = sorted({s.label for s in segments if s.label != UNKNOWN})
    prompt = build_label_prompt(segments, target, known_labels, radius=radius, max_words=max_words)
    raw = ""
    for attempt in range(2):
        response = llm.complete(prompt if attempt == 0 else prompt + REPROMPT_SUFFIX, config)
        raw = response.text
        obj = extract_json_object(raw)
        if obj is None or "label" not in obj:
            continue
        label = obj.get("label")
        try:
            confidence = float(obj.get("confidence", 0.0))
        except (TypeError, ValueError):
            continue
        if not isinstance(label, str):
            continue
        confidence = min(1.0, max(0.0, confidence))
        if label != UNKNOWN and label not in known_labels:
            return LlmLabelResult(target, UNKNOWN, 0.0, raw)
        return LlmLabelResult(target, label, confidence, raw)
    return LlmLabelResult(target, UNKNOWN, 0.0, raw)


def is_confident(result: LlmLabelResult, threshold: float) -> bool:
    """Confidence gate; the threshold itself passes."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must be within [0, 1]")
    return result.confidence >= threshold


# ---------------------------------------------------------------------------
# Prompt introspection (used by the oracle mock and by tests)


@dataclass(frozen=True)
class PromptLine:
    interval: TimeInterval
    label: str
    text: str


@dataclass(frozen=True)
class ParsedPrompt:
    kind: str  # "identity" | "label" | "unknown"
    lines: tuple[PromptLine, ...]
    known_labels: tuple[str, ...] = ()
    target_interval: TimeInterval | None = None


def parse_prompt(prompt: str) -> ParsedPrompt:
    """Recover the structured content of a prompt built by this module."""
    lines: list[PromptLine] = []
    target: TimeInterval | None = None
    for raw in prompt.splitlines():
        m = _LINE_RE.match(raw.strip())
        if not m:
            continue
        interval = TimeInterval(float(m.group(1)), float(m.group(2)))
        label = m.group(3)
        if label == TARGET_LABEL:
            target = interval
        else:
            lines.append(PromptLine(interval, label, m.group(4)))
    known: tuple[str, ...] = ()
    m = re.search(r"^Known speaker labels: (.*)$", prompt, re.MULTILINE)
    if m:
        known = tuple(label.strip() for label in m.group(1).split(",") if label.strip())
    if "assign an identity to each speaker" in prompt:
        kind = "identity"
    elif target is not None:
        kind = "label"
    else:
        kind = "unknown"
    return ParsedPrompt(kind, tuple(lines), known, target)
