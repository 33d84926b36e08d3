"""Deterministic, script-driven mock backends.

A :class:`MockScript` describes a conversation as ground truth: who spoke
when, what they said, and each speaker's real identity.  The mock
backends replay the script with controllable imperfections:

* turns flagged ``sd_miss`` are invisible to the mock diarizer (their
  words become orphans);
* words flagged ``initial_miss`` are dropped by wide transcription passes
  and only recovered by a focused re-run over a short window;
* the mock embedder gives every script speaker a random unit prototype
  and can rotate all prototypes by a fixed angle after ``drift_time``,
  simulating a recording-environment change.

All mocks are deterministic under a fixed seed: identical calls return
byte-identical results regardless of call order or threading.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .backends import AudioRef, BackendConfig, LlmResponse, require_mono
from .core import (
    UNKNOWN,
    DiarSegment,
    SegmentOrigin,
    TimeInterval,
    Word,
    interval_overlap,
)
from .errors import BackendUnavailable, WindowTooShort
from .metrics import Annotation


@dataclass(frozen=True)
class ScriptWord:
    text: str
    start: float
    end: float
    initial_miss: bool = False


@dataclass(frozen=True)
class ScriptTurn:
    speaker: str
    identity: str
    start: float
    end: float
    words: tuple[ScriptWord, ...] = ()
    sd_miss: bool = False


@dataclass(frozen=True)
class EmbeddingDrift:
    """Prototype rotation applied to all speakers from ``time`` onward."""

    time: float
    angle_deg: float = 48.0


@dataclass(frozen=True)
class MockScript:
    """Ground-truth conversation replayed by the mock backends."""

    turns: tuple[ScriptTurn, ...]
    embedding_drift: EmbeddingDrift | None = None

    @property
    def duration(self) -> float:
        return max((t.end for t in self.turns), default=0.0)

    def speakers(self) -> list[str]:
        seen: dict[str, None] = {}
        for t in self.turns:
            seen.setdefault(t.speaker, None)
        return list(seen)

    def identities(self) -> list[str]:
        seen: dict[str, None] = {}
        for t in self.turns:
            seen.setdefault(t.identity, None)
        return list(seen)

    def identity_of(self, speaker: str) -> str:
        for t in self.turns:
            if t.speaker == speaker:
                return t.identity
        raise KeyError(speaker)

    def reference_by_speaker(self) -> Annotation:
        """Ground-truth diarization. Word-free turns model diarizer false
        alarms and are not real speech, so they are excluded."""
        return Annotation.from_pairs(
            (TimeInterval(t.start, t.end), t.speaker) for t in self.turns if t.words
        )

    def reference_by_identity(self) -> Annotation:
        return Annotation.from_pairs(
            (TimeInterval(t.start, t.end), t.identity) for t in self.turns if t.words
        )

    def reference_words(self) -> list[str]:
        words = []
        for t in sorted(self.turns, key=lambda t: t.start):
            words.extend(w.text for w in t.words)
        return words

    def to_dict(self) -> dict:
        doc: dict = {
            "turns": [
                {
                    "speaker": t.speaker,
                    "identity": t.identity,
                    "start": t.start,
                    "end": t.end,
                    "words": [
                        {
                            "text": w.text,
                            "start": w.start,
                            "end": w.end,
                            **({"initial_miss": True} if w.initial_miss else {}),
                        }
                        for w in t.words
                    ],
                    **({"sd_miss": True} if t.sd_miss else {}),
                }
                for t in self.turns
            ]
        }
        if self.embedding_drift is not None:
            doc["embedding_drift"] = {
                "time": self.embedding_drift.time,
                "angle_deg": self.embedding_drift.angle_deg,
            }
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "MockScript":
        turns = []
        for t in doc["turns"]:
            words = tuple(
                ScriptWord(
                    text=w["text"],
                    start=float(w["start"]),
                    end=float(w["end"]),
                    initial_miss=bool(w.get("initial_miss", False)),
                )
                for w in t.get("words", [])
            )
            turns.append(
                ScriptTurn(
                    speaker=t["speaker"],
                    identity=t["identity"],
                    start=float(t["start"]),
                    end=float(t["end"]),
                    words=words,
                    sd_miss=bool(t.get("sd_miss", False)),
                )
            )
        drift = None
        if "embedding_drift" in doc:
            d = doc["embedding_drift"]
            drift = EmbeddingDrift(time=float(d["time"]), angle_deg=float(d["angle_deg"]))
        return cls(turns=tuple(sorted(turns, key=lambda t: (t.start, t.end))), embedding_drift=drift)

    @classmethod
    def from_json(cls, text: str) -> "MockScript":
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_file(cls, path) -> "MockScript":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    def audio_ref(self, uri: str = "mock://script") -> AudioRef:
        return AudioRef(uri=uri, sample_rate_hz=16000, channel_count=1, duration_s=self.duration)


class MockDiarizer:
    """Replays the script's turns as diarization segments.

    With ``relabel_per_window`` each windowed call gets its own local label
    space ("spk0", "spk1", ... by order of first appearance), emulating
    diarizers whose labels are not stable across chunks.
    """

    def __init__(self, script: MockScript, relabel_per_window: bool = False):
        self.script = script
        self.relabel_per_window = relabel_per_window

    def diarize(self, audio: AudioRef, window: TimeInterval | None = None) -> list[DiarSegment]:
        require_mono(audio)
        segments = []
        for turn in self.script.turns:
            if turn.sd_miss:
                continue
            interval = TimeInterval(turn.start, turn.end)
            if window is not None:
                clipped = interval.clip(window.start, window.end)
                if clipped is None:
                    continue
                interval = clipped
            segments.append((interval, turn.speaker))
        segments.sort(key=lambda pair: (pair[0].start, pair[0].end))
        if self.relabel_per_window and window is not None:
            local: dict[str, str] = {}
            for _, speaker in segments:
                local.setdefault(speaker, f"spk{len(local)}")
            segments = [(iv, local[speaker]) for iv, speaker in segments]
        return [DiarSegment(iv, label, (), SegmentOrigin.DIARIZER) for iv, label in segments]


class MockTranscriber:
    """Replays the script's words.

    Words flagged ``initial_miss`` are only recognized by focused passes
    (window no longer than ``focus_window_s``), modeling how re-running
    ASR on a short cropped segment can recover words a wide pass missed.
    """

    def __init__(self, script: MockScript, focus_window_s: float = 30.0):
        self.script = script
        self.focus_window_s = focus_window_s

    def transcribe(self, audio: AudioRef, window: TimeInterval | None = None) -> list[Word]:
        require_mono(audio)
        focused = window is not None and window.duration() <= self.focus_window_s
        words = []
        for turn in self.script.turns:
            for w in turn.words:
                if w.initial_miss and not focused:
                    continue
                if window is not None and not window.start <= w.start <= window.end:
                    continue
                words.append(Word(w.text, TimeInterval(w.start, w.end)))
        words.sort(key=lambda w: (w.start, w.end))
        return words


class MockEmbedder:
    """Prototype-plus-noise speaker embeddings.

    Each script speaker gets a random unit prototype; ``embed`` returns the
    prototype of whichever speaker owns most of the window, perturbed by
    seeded Gaussian noise and renormalized.  Noise is a pure function of
    (seed, window), so identical windows give identical vectors.  When the
    script declares an embedding drift, prototypes are rotated by the
    configured angle for windows whose midpoint falls after the drift time.
    """

    def __init__(
        self,
        script: MockScript,
        dim: int = 192,
        noise_sigma: float = 0.05,
        seed: int = 0,
        min_window: float = 0.1,
    ):
        self.script = script
        self.dim = dim
        self.noise_sigma = noise_sigma
        self.seed = seed
        self.min_window = min_window
        rng = np.random.default_rng(seed)
        self._prototypes: dict[str, np.ndarray] = {}
        self._drift_axes: dict[str, np.ndarray] = {}
        for speaker in script.speakers():
            proto = _unit(rng.standard_normal(dim))
            axis = rng.standard_normal(dim)
            axis -= axis @ proto * proto
            self._prototypes[speaker] = proto
            self._drift_axes[speaker] = _unit(axis)

    def embed(self, audio: AudioRef, window: TimeInterval) -> np.ndarray:
        require_mono(audio)
        if window.duration() < self.min_window:
            raise WindowTooShort(
                f"window of {window.duration():.3f}s is below the {self.min_window}s minimum"
            )
        speaker = self._dominant_speaker(window)
        rng = np.random.default_rng(_window_seed(self.seed, window))
        if speaker is None:
            return _unit(rng.standard_normal(self.dim))
        proto = self._prototype_at(speaker, window.midpoint())
        return _unit(proto + self.noise_sigma * rng.standard_normal(self.dim))

    def _dominant_speaker(self, window: TimeInterval) -> str | None:
        best, best_overlap = None, 0.0
        for turn in self.script.turns:
            ov = interval_overlap(TimeInterval(turn.start, turn.end), window)
            if ov > best_overlap:
                best, best_overlap = turn.speaker, ov
        return best

    def _prototype_at(self, speaker: str, t: float) -> np.ndarray:
        proto = self._prototypes[speaker]
        drift = self.script.embedding_drift
        if drift is None or t < drift.time:
            return proto
        angle = np.deg2rad(drift.angle_deg)
        return np.cos(angle) * proto + np.sin(angle) * self._drift_axes[speaker]


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _window_seed(seed: int, window: TimeInterval) -> list[int]:
    packed = struct.pack("<dd", window.start, window.end)
    a, b = struct.unpack("<QQ", packed)
    return [seed, a, b]


class ScriptedLlm:
    """Returns pre-canned responses in order; raises when exhausted."""

    def __init__(self, responses: Iterable[str]):
        self._responses = list(responses)
        self.prompts: list[str] = []

    def complete(self, prompt: str, config: BackendConfig | None = None) -> LlmResponse:
        self.prompts.append(prompt)
        if not self._responses:
            raise BackendUnavailable("scripted LLM has no responses left")
        return LlmResponse(text=self._responses.pop(0))


class OracleLlm:
    """Answers pipeline prompts correctly by consulting the script.

    Identity-detection prompts are answered by voting, per speaker label,
    for the script identity that overlaps that label's serialized lines
    the most.  Segment-labeling prompts are answered with a known label
    whose detected identity matches the true speaker of the target window.
    The oracle is stateful only in remembering its own last identity map.
    """

    def __init__(self, script: MockScript, confidence: float = 0.95):
        self.script = script
        self.confidence = confidence
        self._identity_map: dict[str, str] = {}

    def complete(self, prompt: str, config: BackendConfig | None = None) -> LlmResponse:
        from . import adjudicate

        parsed = adjudicate.parse_prompt(prompt)
        if parsed.kind == "identity":
            mapping = self._vote_identities(parsed.lines)
            self._identity_map = mapping
            return LlmResponse(text=json.dumps(mapping, sort_keys=True))
        if parsed.kind == "label":
            return LlmResponse(text=self._label_target(parsed))
        raise BackendUnavailable("oracle LLM could not interpret the prompt")

    def _vote_identities(self, lines) -> dict[str, str]:
        votes: dict[str, dict[str, float]] = {}
        for line in lines:
            if line.label == UNKNOWN:
                continue
            identity = self._true_identity(line.interval)
            if identity is None:
                continue
            votes.setdefault(line.label, {})
            votes[line.label][identity] = votes[line.label].get(identity, 0.0) + line.interval.duration()
        return {
            label: max(sorted(per_label), key=lambda ident: per_label[ident])
            for label, per_label in votes.items()
        }

    def _label_target(self, parsed) -> str:
        identity_map = self._identity_map or self._vote_identities(parsed.lines)
        true_identity = self._true_identity(parsed.target_interval)
        answer, conf = UNKNOWN, 0.0
        if true_identity is not None:
            for label in parsed.known_labels:
                if identity_map.get(label) == true_identity:
                    answer, conf = label, self.confidence
                    break
        return json.dumps({"label": answer, "confidence": conf})

    def _true_identity(self, interval: TimeInterval) -> str | None:
        best, best_overlap = None, 0.0
        for turn in self.script.turns:
            ov = interval_overlap(TimeInterval(turn.start, turn.end), interval)
            if ov > best_overlap:
                best, best_overlap = turn.identity, ov
        return best


@dataclass
class MockBackendSet:
    """The full bundle of mocks for one scripted recording."""

    diarizer: MockDiarizer
    transcriber: MockTranscriber
    embedder: MockEmbedder
    llm: object
    audio: AudioRef


def mock_backends(
    script: MockScript,
    seed: int = 0,
    uri: str = "mock://script",
    relabel_per_window: bool = False,
    noise_sigma: float = 0.05,
    llm=None,
) -> MockBackendSet:
    """Convenience constructor wiring all four mocks to one script."""
    return MockBackendSet(
        diarizer=MockDiarizer(script, relabel_per_window=relabel_per_window),
        transcriber=MockTranscriber(script),
        embedder=MockEmbedder(script, seed=seed, noise_sigma=noise_sigma),
        llm=llm if llm is not None else OracleLlm(script),
        audio=script.audio_ref(uri),
    )
