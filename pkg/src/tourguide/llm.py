"""Streaming language-model backends and punctuation-boundary segmentation.

Speech delivery must start before generation finishes, so completions are
consumed as token chunks and cut into speech segments at punctuation
boundaries. Mock backends make the whole pipeline deterministic offline;
the remote backend speaks an SSE chat-completion wire protocol.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator, Protocol, Sequence

import httpx

from .phases import END_SIGN, strip_end_sign

logger = logging.getLogger(__name__)

# Fullwidth and ASCII marks both: model output mixes them freely.
DEFAULT_PUNCTUATION = "。、！？!?.,"


class BackendError(Exception):
    """Base class for completion-backend failures."""


class BackendUnavailableError(BackendError):
    """Transport-level failure (connect error, 5xx, exhausted script)."""


class BackendTimeoutError(BackendError):
    pass


class MalformedResponseError(BackendError):
    pass


@dataclass(frozen=True)
class TokenChunk:
    """One streamed fragment of a completion; exactly one chunk is final."""

    text: str
    final: bool = False


@dataclass(frozen=True)
class SpeechSegment:
    """A punctuation-terminated slice of a completion, ready for speech.

    `terminal` marks the flush segment: trailing text that never saw a
    closing punctuation mark.
    """

    text: str
    index: int
    terminal: bool = False


@dataclass(frozen=True)
class BackendHandle:
    """Declarative backend selection, resolvable from config."""

    kind: str  # scripted-mock | echo-mock | remote
    model_id: str = ""
    timeout: float = 30.0
    max_retries: int = 1


class Backend(Protocol):
    def stream(self, prompt: str) -> Iterator[TokenChunk]: ...


def load_script_lines(path: str | Path) -> list[str]:
    """Read a plain-text script: one completion per line, \\n escapes allowed."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [line.replace("\\n", "\n") for line in lines if line.strip()]


def _chunked(text: str, size: int) -> Iterator[TokenChunk]:
    """Split text into fixed-size chunks; always yields at least one."""
    if not text:
        yield TokenChunk("", final=True)
        return
    pieces = [text[i : i + size] for i in range(0, len(text), size)]
    for piece in pieces[:-1]:
        yield TokenChunk(piece)
    yield TokenChunk(pieces[-1], final=True)


class ScriptedMockBackend:
    """Replays a fixed list of completions, one per call, deterministically.

    `cycle` repeats the script forever (useful for never-ending scenario
    tests); `latency` sleeps before each reply to simulate a slow backend.
    """

    def __init__(
        self,
        script: Sequence[str],
        *,
        chunk_size: int = 4,
        cycle: bool = False,
        latency: float = 0.0,
    ) -> None:
        if chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")
        self._script = list(script)
        self._chunk_size = chunk_size
        self._cycle = cycle
        self._latency = latency
        self._pos = 0

    @classmethod
    def from_file(cls, path: str | Path, **kwargs) -> "ScriptedMockBackend":
        return cls(load_script_lines(path), **kwargs)

    @property
    def remaining(self) -> int:
        return max(0, len(self._script) - self._pos)

    def stream(self, prompt: str) -> Iterator[TokenChunk]:
        if self._pos >= len(self._script):
            if not self._cycle or not self._script:
                raise BackendUnavailableError("scripted backend exhausted")
            self._pos = 0
        completion = self._script[self._pos]
        self._pos += 1
        if self._latency:
            time.sleep(self._latency)
        return _chunked(completion, self._chunk_size)


class EchoMockBackend:
    """Echoes the last history line of the prompt, speaker label stripped."""

    def __init__(self, *, chunk_size: int = 4) -> None:
        self._chunk_size = chunk_size

    def stream(self, prompt: str) -> Iterator[TokenChunk]:
        lines = [line for line in prompt.splitlines() if line.strip()]
        # Last line is the bare generation cue; the line above is history.
        text = lines[-2] if len(lines) >= 2 else ""
        if ":" in text:
            text = text.split(":", 1)[1].strip()
        return _chunked(text, self._chunk_size)


class FlakyBackend:
    """Test helper: fails the first `failures` calls, then delegates."""

    def __init__(self, inner: Backend, failures: int) -> None:
        self._inner = inner
        self.failures_left = failures
        self.attempts = 0

    def stream(self, prompt: str) -> Iterator[TokenChunk]:
        self.attempts += 1
        if self.failures_left > 0:
            self.failures_left -= 1
            raise BackendUnavailableError("injected failure")
        return self._inner.stream(prompt)


class RemoteBackend:
    """SSE chat-completion adapter; endpoint/model/key come from config."""

    def __init__(
        self,
        base_url: str,
        model_id: str,
        api_key: str = "",
        *,
        timeout: float = 30.0,
        transport: httpx.BaseTransport | None = None,
    ) -> None:
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._model_id = model_id
        self._client = httpx.Client(
            base_url=base_url,
            headers=headers,
            timeout=timeout,
            transport=transport,
        )

    def stream(self, prompt: str) -> Iterator[TokenChunk]:
        body = {
            "model": self._model_id,
            "messages": [{"role": "user", "content": prompt}],
            "stream": True,
        }
        try:
            with self._client.stream("POST", "/chat/completions", json=body) as response:
                if response.status_code >= 500:
                    raise BackendUnavailableError(f"server error {response.status_code}")
                if response.status_code != 200:
                    raise MalformedResponseError(f"unexpected status {response.status_code}")
                yield from self._parse_sse(response.iter_lines())
        except httpx.TimeoutException as exc:
            raise BackendTimeoutError(str(exc)) from exc
        except httpx.HTTPError as exc:
            raise BackendUnavailableError(str(exc)) from exc

    @staticmethod
    def _parse_sse(lines: Iterable[str]) -> Iterator[TokenChunk]:
        parts: list[str] = []
        for line in lines:
            if not line.startswith("data:"):
                continue
            payload = line[5:].strip()
            if payload == "[DONE]":
                break
            try:
                delta = json.loads(payload)["choices"][0].get("delta", {})
            except (json.JSONDecodeError, LookupError) as exc:
                raise MalformedResponseError(f"bad SSE chunk: {payload[:80]}") from exc
            content = delta.get("content") or ""
            if content:
                parts.append(content)
                yield TokenChunk(content)
        yield TokenChunk("", final=True)
        logger.debug("remote completion done (%d chars)", sum(len(p) for p in parts))


def segment_stream(
    chunks: Iterable[TokenChunk],
    punctuation: str = DEFAULT_PUNCTUATION,
) -> Iterator[SpeechSegment]:
    """Cut a chunk stream into speech segments at punctuation-run boundaries.

    A segment is emitted as soon as the stream shows a non-punctuation
    character after a punctuation run (consecutive marks stay together),
    so downstream speech can start while generation continues. Trailing
    text without closing punctuation is flushed as a terminal segment.

    Lossless: the concatenation of all segment texts equals the
    concatenation of all chunk texts, and the cut points depend only on
    the joined text, never on chunk boundaries.
    """
    if not punctuation:
        raise ValueError("punctuation set must be non-empty")
    marks = frozenset(punctuation)
    buf: list[str] = []
    index = 0
    for chunk in chunks:
        for ch in chunk.text:
            if ch not in marks and buf and buf[-1] in marks:
                yield SpeechSegment("".join(buf), index)
                index += 1
                buf = []
            buf.append(ch)
    if buf:
        tail = "".join(buf)
        yield SpeechSegment(tail, index, terminal=tail[-1] not in marks)


@dataclass(frozen=True)
class SpokenReply:
    """A finished completion: raw text plus its sign-free speech segments."""

    raw_text: str
    segments: tuple[SpeechSegment, ...]


class LLMGateway:
    """Retry wrapper plus the speech pipeline over one backend.

    One gateway serves one session (mock backends carry replay state).
    `tap`, when set, observes every data-channel completion in call order;
    the session layer uses it to transcribe backend hook calls.
    """

    def __init__(
        self,
        backend: Backend,
        *,
        punctuation: str = DEFAULT_PUNCTUATION,
        max_retries: int = 1,
        tap: Callable[[str], None] | None = None,
    ) -> None:
        if max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        self._backend = backend
        self._punctuation = punctuation
        self._max_retries = max_retries
        self.tap = tap

    @property
    def punctuation(self) -> str:
        return self._punctuation

    def complete_streaming(self, prompt: str) -> Iterator[TokenChunk]:
        """Stream a completion, retrying initiation failures up to max_retries.

        Failures after the first chunk has been yielded are not retried:
        the consumer may already have acted on delivered text.
        """
        if not prompt:
            raise ValueError("prompt must be non-empty")
        attempt = 0
        while True:
            try:
                chunk_iter = iter(self._backend.stream(prompt))
                first = next(chunk_iter, None)
                break
            except (BackendUnavailableError, BackendTimeoutError) as exc:
                attempt += 1
                if attempt > self._max_retries:
                    raise
                logger.warning("backend attempt %d failed, retrying: %s", attempt, exc)
        if first is None:
            yield TokenChunk("", final=True)
            return
        yield first
        yield from chunk_iter

    def speak(self, prompt: str) -> SpokenReply:
        """Run the full speech path: stream, segment, strip the end sign.

        The sign is a control token, not content; no emitted segment ever
        contains it. Segments are re-indexed after empty ones are dropped.
        """
        raw_parts: list[str] = []

        def tapped() -> Iterator[TokenChunk]:
            for chunk in self.complete_streaming(prompt):
                raw_parts.append(chunk.text)
                yield chunk

        segments: list[SpeechSegment] = []
        for seg in segment_stream(tapped(), self._punctuation):
            cleaned = strip_end_sign(seg.text) if END_SIGN in seg.text else seg.text
            if cleaned:
                segments.append(SpeechSegment(cleaned, len(segments), seg.terminal))
        return SpokenReply("".join(raw_parts), tuple(segments))

    def complete_text(self, prompt: str) -> str:
        """Non-streaming convenience for backend data calls (selection, extraction)."""
        text = "".join(chunk.text for chunk in self.complete_streaming(prompt))
        if self.tap is not None:
            self.tap(text)
        return text


def build_backend(
    handle: BackendHandle,
    *,
    script: Sequence[str] | None = None,
    script_path: str | Path | None = None,
    base_url: str = "",
    api_key: str = "",
) -> Backend:
    """Construct a concrete backend from a handle plus its data sources."""
    if handle.kind == "scripted-mock":
        if script is not None:
            return ScriptedMockBackend(script)
        if script_path is not None:
            return ScriptedMockBackend.from_file(script_path)
        raise ValueError("scripted-mock needs a script or script_path")
    if handle.kind == "echo-mock":
        return EchoMockBackend()
    if handle.kind == "remote":
        if not base_url:
            raise ValueError("remote backend needs a base_url")
        return RemoteBackend(base_url, handle.model_id, api_key, timeout=handle.timeout)
    raise ValueError(f"unknown backend kind: {handle.kind!r}")
