"""Pluggable interfaces for the four external model roles.

The pipeline is model-agnostic: diarization, transcription, speaker
embedding, and chat completion are all reached through the narrow
protocols below.  This package ships deterministic mock implementations
(see :mod:`diarefine.mock`) and an HTTP chat-completion client; real
SD/ASR/embedding models are supplied by the user behind the same
protocols.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Any, Protocol, Sequence, runtime_checkable

import numpy as np
import requests

from .core import DiarSegment, TimeInterval, Word
from .errors import BackendTimeout, BackendUnavailable


@dataclass(frozen=True)
class AudioRef:
    """A handle to a single-channel recording on disk.

    ``duration_s`` is carried as metadata because chunk planning needs the
    recording length before any backend call is made.
    """

    uri: str
    sample_rate_hz: int = 16000
    channel_count: int = 1
    duration_s: float | None = None


@dataclass(frozen=True)
class LlmResponse:
    text: str
    parsed: Any = None


@dataclass(frozen=True)
class BackendConfig:
    endpoint: str = ""
    model_name: str = ""
    timeout: float = 30.0
    max_retries: int = 2
    auth_token: str | None = None

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    def redacted(self) -> dict:
        """Dict form safe for config echoes and traces (no secrets)."""
        return {
            "endpoint": self.endpoint,
            "model_name": self.model_name,
            "timeout": self.timeout,
            "max_retries": self.max_retries,
        }


@runtime_checkable
class Diarizer(Protocol):
    def diarize(
        self, audio: AudioRef, window: TimeInterval | None = None
    ) -> list[DiarSegment]:
        """Diarization segments (no words) sorted by start time."""
        ...


@runtime_checkable
class Transcriber(Protocol):
    def transcribe(
        self, audio: AudioRef, window: TimeInterval | None = None
    ) -> list[Word]:
        """Words sorted by start; timestamps are absolute recording times."""
        ...


@runtime_checkable
class SpeakerEmbedder(Protocol):
    min_window: float

    def embed(self, audio: AudioRef, window: TimeInterval) -> np.ndarray:
        """Fixed-dimension speaker embedding for one audio window."""
        ...


@runtime_checkable
class ChatCompleter(Protocol):
    def complete(self, prompt: str, config: BackendConfig) -> LlmResponse:
        ...


class HttpChatCompleter:
    """Chat-completion client for OpenAI-style HTTP endpoints.

    Sends ``{"model": ..., "messages": [{"role": "user", "content": ...}]}``
    and reads the first choice's message content.  Transient transport
    failures (connection errors, timeouts, 5xx) are retried with
    exponential backoff up to ``config.max_retries`` times; anything the
    server returns that cannot be interpreted raises
    :class:`BackendUnavailable` rather than propagating a parse error.
    """

    def __init__(self, session: requests.Session | None = None, backoff_base: float = 0.5,
                 sleep=time.sleep):
        self._session = session or requests.Session()
        self._backoff_base = backoff_base
        self._sleep = sleep

    def complete(self, prompt: str, config: BackendConfig) -> LlmResponse:
        if not prompt:
            raise ValueError("prompt must be non-empty")
        headers = {"Content-Type": "application/json"}
        if config.auth_token:
            headers["Authorization"] = f"Bearer {config.auth_token}"
        body = {
            "model": config.model_name,
            "messages": [{"role": "user", "content": prompt}],
        }
        last_error: BackendUnavailable | None = None
        for attempt in range(config.max_retries + 1):
            if attempt:
                self._sleep(self._backoff_base * 2 ** (attempt - 1))
            try:
                response = self._session.post(
                    config.endpoint, json=body, headers=headers, timeout=config.timeout
                )
            except requests.Timeout:
                last_error = BackendTimeout(f"timed out after {config.timeout}s")
                continue
            except requests.RequestException as exc:
                last_error = BackendUnavailable(str(exc))
                continue
            if response.status_code >= 500:
                last_error = BackendUnavailable(f"server error HTTP {response.status_code}")
                continue
            if response.status_code != 200:
                raise BackendUnavailable(f"HTTP {response.status_code}: {response.text[:200]}")
            return self._parse(response)
        assert last_error is not None
        raise last_error

    @staticmethod
    def _parse(response: requests.Response) -> LlmResponse:
        try:
            payload = response.json()
            text = payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError):
            raise BackendUnavailable(
                f"malformed chat-completion response: {response.text[:200]}"
            ) from None
        if not isinstance(text, str) or not text:
            raise BackendUnavailable("empty completion text")
        return LlmResponse(text=text, parsed=payload)


def require_mono(audio: AudioRef) -> None:
    """Shared precondition check: the pipeline only accepts mono audio."""
    from .errors import InvalidAudio

    if audio.channel_count != 1:
        raise InvalidAudio(f"expected single-channel audio, got {audio.channel_count} channels")
