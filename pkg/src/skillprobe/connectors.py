"""Session-oriented connectors between the crawler and a skill.

Two implementations exist: the in-process text connector bound to the
simulator (see ``simulator.SimConnector``) and ``AdapterConnector``, which
drives an external adapter process over line-delimited JSON on its standard
streams.

Wire protocol (one reply line per request line, unknown fields ignored):

    harness -> adapter
        {"type": "open", "invocation": S, "timeout_ms": N}
        {"type": "say", "text": S, "timeout_ms": N}
        {"type": "wait", "timeout_ms": N}
        {"type": "close"}
    adapter -> harness
        {"type": "response", "text": S, "confidence": F}
        {"type": "silence"}
        {"type": "closed", "text": S?}
        {"type": "error", "detail": S}

One adapter process serves all of one skill's dialogues in sequence; the
``close`` request is the end-of-lineage teardown and the process exits.
Per-dialogue termination is signalled by ``closed`` replies.
"""

from __future__ import annotations

import json
import queue
import subprocess
import threading
from dataclasses import dataclass
from enum import Enum
from typing import Protocol

from .model import Stage


class ConnectorFailure(RuntimeError):
    """Transport-level failure that prevents any conversation at all."""


class SessionClosedError(RuntimeError):
    """A command was issued on a handle whose session already closed."""


class EventKind(Enum):
    RESPONSE = "response"
    SILENCE = "silence"
    CLOSED = "closed"
    ERROR = "error"


@dataclass(frozen=True)
class ConnectorEvent:
    """Exactly one of these is delivered for each command sent.

    ``text`` is set only for responses; a final utterance accompanying a
    ``closed`` event (a goodbye, or a one-shot answer) travels in ``detail``.
    """

    kind: EventKind
    text: str | None = None
    confidence: float | None = None
    detail: str | None = None

    def __post_init__(self) -> None:
        if (self.kind is EventKind.RESPONSE) != (self.text is not None):
            raise ValueError("event text must be present exactly for responses")


def response_event(text: str, confidence: float | None = 1.0) -> ConnectorEvent:
    return ConnectorEvent(kind=EventKind.RESPONSE, text=text, confidence=confidence)


def silence_event() -> ConnectorEvent:
    return ConnectorEvent(kind=EventKind.SILENCE)


def closed_event(final_text: str | None = None) -> ConnectorEvent:
    return ConnectorEvent(kind=EventKind.CLOSED, detail=final_text)


def error_event(detail: str) -> ConnectorEvent:
    return ConnectorEvent(kind=EventKind.ERROR, detail=detail)


@dataclass
class SessionHandle:
    session_id: str
    state: str = "open"  # "open" | "closed"

    @property
    def is_open(self) -> bool:
        return self.state == "open"

    def close(self) -> None:
        self.state = "closed"


class Connector(Protocol):
    """What the crawler needs from any skill transport."""

    def open_session(
        self, invocation_name: str, timeout_ms: int, stage: Stage | None = None
    ) -> tuple[SessionHandle, ConnectorEvent]: ...

    def say(self, handle: SessionHandle, text: str, timeout_ms: int) -> ConnectorEvent: ...

    def wait_silence(self, handle: SessionHandle, timeout_ms: int) -> ConnectorEvent: ...

    def shutdown(self) -> None: ...


# Grace added on top of the caller's timeout before declaring the adapter
# process unresponsive; keeps a hung adapter from deadlocking the crawl.
_REPLY_GRACE_MS = 2000

_EOF = object()


class AdapterConnector:
    """Client side of the adapter wire protocol.

    Spawns the adapter command once and holds it for the whole skill
    lineage.  Every malformed, missing, or late reply line degrades to an
    ``error`` event; this class never raises for adapter misbehaviour and
    never blocks forever.
    """

    zero_latency = False

    def __init__(self, command: list[str], reply_grace_ms: int = _REPLY_GRACE_MS):
        self._command = list(command)
        self._grace_ms = reply_grace_ms
        self._proc: subprocess.Popen | None = None
        self._lines: queue.Queue = queue.Queue()
        self._session_count = 0
        self._spawn_error: str | None = None
        try:
            self._proc = subprocess.Popen(
                self._command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            self._spawn_error = f"failed to spawn adapter: {exc}"
            return
        reader = threading.Thread(target=self._pump_stdout, daemon=True)
        reader.start()

    def _pump_stdout(self) -> None:
        assert self._proc is not None and self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(_EOF)

    def _request(self, message: dict, timeout_ms: int) -> ConnectorEvent:
        if self._spawn_error:
            return error_event(self._spawn_error)
        assert self._proc is not None
        if self._proc.poll() is not None and message.get("type") != "close":
            return error_event("adapter process exited")
        try:
            assert self._proc.stdin is not None
            self._proc.stdin.write(json.dumps(message, separators=(",", ":")) + "\n")
            self._proc.stdin.flush()
        except (OSError, ValueError) as exc:
            return error_event(f"adapter write failed: {exc}")
        try:
            line = self._lines.get(timeout=(timeout_ms + self._grace_ms) / 1000.0)
        except queue.Empty:
            return error_event("adapter reply timed out")
        if line is _EOF:
            return error_event("adapter closed its output stream")
        return self._parse_reply(line)

    @staticmethod
    def _parse_reply(line: str) -> ConnectorEvent:
        try:
            reply = json.loads(line)
        except json.JSONDecodeError:
            return error_event(f"malformed adapter reply: {line.strip()[:120]!r}")
        if not isinstance(reply, dict):
            return error_event("adapter reply is not an object")
        kind = reply.get("type")
        if kind == "response":
            text = reply.get("text")
            if not isinstance(text, str):
                return error_event("response reply without text")
            confidence = reply.get("confidence")
            if not isinstance(confidence, (int, float)) or not 0 <= confidence <= 1:
                confidence = None
            return response_event(text, confidence)
        if kind == "silence":
            return silence_event()
        if kind == "closed":
            text = reply.get("text")
            return closed_event(text if isinstance(text, str) and text else None)
        if kind == "error":
            return error_event(str(reply.get("detail", "adapter error")))
        return error_event(f"unknown adapter reply type: {kind!r}")

    def open_session(
        self, invocation_name: str, timeout_ms: int, stage: Stage | None = None
    ) -> tuple[SessionHandle, ConnectorEvent]:
        # Adapters have no stage channel; scripted adapters replay in order.
        del stage
        self._session_count += 1
        handle = SessionHandle(session_id=f"adapter#{self._session_count}")
        event = self._request(
            {"type": "open", "invocation": invocation_name, "timeout_ms": timeout_ms},
            timeout_ms,
        )
        if event.kind in (EventKind.CLOSED, EventKind.ERROR):
            handle.close()
        return handle, event

    def say(self, handle: SessionHandle, text: str, timeout_ms: int) -> ConnectorEvent:
        if not handle.is_open:
            raise SessionClosedError(f"session {handle.session_id} is closed")
        event = self._request({"type": "say", "text": text, "timeout_ms": timeout_ms}, timeout_ms)
        if event.kind in (EventKind.CLOSED, EventKind.ERROR):
            handle.close()
        return event

    def wait_silence(self, handle: SessionHandle, timeout_ms: int) -> ConnectorEvent:
        if not handle.is_open:
            raise SessionClosedError(f"session {handle.session_id} is closed")
        event = self._request({"type": "wait", "timeout_ms": timeout_ms}, timeout_ms)
        if event.kind in (EventKind.CLOSED, EventKind.ERROR):
            handle.close()
        return event

    def shutdown(self) -> None:
        if self._proc is None:
            return
        if self._proc.poll() is None:
            try:
                assert self._proc.stdin is not None
                self._proc.stdin.write('{"type":"close"}\n')
                self._proc.stdin.flush()
                self._proc.stdin.close()
            except (OSError, ValueError):
                pass
            try:
                self._proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
