"""Transcript scripts: what the adapter replays.

A script is an ordered list of (expected input pattern, reply) entries plus
a default reply for anything unexpected.  Patterns are compared on
normalized text (lowercase, punctuation stripped, whitespace collapsed) and
are consumed front to back: each request scans forward from the cursor and
the first matching entry wins.  ``"*"`` matches any input.

Scripts can be written by hand or recorded from a session corpus (JSON
Lines, one session per line) with ``script_from_corpus``: every recorded
command becomes a pattern and every recorded reply becomes the wire message
that reproduces it, so replaying a recorded crawl yields the same
conversation the original connector produced.
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

SILENCE_INPUT = "<silence>"

_WS_RUN = re.compile(r"\s+")


def normalize(text: str) -> str:
    lowered = text.lower()
    no_punct = "".join(
        ch for ch in lowered if not unicodedata.category(ch).startswith("P")
    )
    return _WS_RUN.sub(" ", no_punct).strip()


class ScriptError(ValueError):
    """Bad script file or a corpus that cannot be replayed."""


_REPLY_TYPES = ("response", "silence", "closed", "error")


def _check_reply(reply: dict, where: str) -> dict:
    if not isinstance(reply, dict) or reply.get("type") not in _REPLY_TYPES:
        raise ScriptError(f"{where}: reply must be one of {_REPLY_TYPES}")
    if reply["type"] == "response" and not isinstance(reply.get("text"), str):
        raise ScriptError(f"{where}: response replies need a text string")
    return reply


@dataclass(frozen=True)
class ScriptEntry:
    pattern: str
    reply: dict

    def matches(self, input_text: str) -> bool:
        return self.pattern == "*" or normalize(self.pattern) == normalize(input_text)


@dataclass
class TranscriptScript:
    invocation_name: str
    entries: list[ScriptEntry] = field(default_factory=list)
    default_reply: dict = field(default_factory=lambda: {"type": "silence"})
    skill_id: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "skill_id": self.skill_id,
            "invocation_name": self.invocation_name,
            "default_reply": self.default_reply,
            "entries": [{"pattern": e.pattern, "reply": e.reply} for e in self.entries],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TranscriptScript":
        if not isinstance(data, dict):
            raise ScriptError("script file must hold a JSON object")
        entries = []
        for i, raw in enumerate(data.get("entries", [])):
            pattern = raw.get("pattern")
            if not isinstance(pattern, str) or not pattern.strip():
                raise ScriptError(f"entries[{i}]: pattern must be a non-empty string")
            entries.append(
                ScriptEntry(pattern=pattern, reply=_check_reply(raw.get("reply"), f"entries[{i}]"))
            )
        return cls(
            invocation_name=str(data.get("invocation_name", "")),
            entries=entries,
            default_reply=_check_reply(
                data.get("default_reply", {"type": "silence"}), "default_reply"
            ),
            skill_id=str(data.get("skill_id", "")),
        )


def load_script(path: str | Path) -> TranscriptScript:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScriptError(f"{path}: not valid JSON: {exc}") from exc
    return TranscriptScript.from_dict(data)


def dump_script(script: TranscriptScript, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(script.to_dict(), fh, indent=2)
        fh.write("\n")


class ScriptPlayer:
    """Consumes a script entry by entry as inputs arrive."""

    def __init__(self, script: TranscriptScript):
        self._script = script
        self._cursor = 0

    def reply_to(self, input_text: str) -> dict:
        entries = self._script.entries
        for idx in range(self._cursor, len(entries)):
            if entries[idx].matches(input_text):
                self._cursor = idx + 1
                return entries[idx].reply
        return self._script.default_reply


# ---------------------------------------------------------------------------
# Recording scripts from a session corpus
# ---------------------------------------------------------------------------


def _turn_input(turn: dict) -> str:
    command = turn.get("command")
    if command == "SILENCE":
        return SILENCE_INPUT
    if isinstance(command, dict) and isinstance(command.get("text"), str):
        return command["text"]
    raise ScriptError(f"unreplayable turn command: {command!r}")


def _turn_reply(turn: dict, is_final: bool, termination: str) -> dict:
    response = turn.get("response")
    text = response.get("text") if isinstance(response, dict) else None
    if is_final and termination in ("exited_by_stop", "auto_exit"):
        reply: dict = {"type": "closed"}
        if text:
            reply["text"] = text
        return reply
    if text is not None:
        confidence = response.get("confidence", 1.0) if isinstance(response, dict) else 1.0
        return {"type": "response", "text": text, "confidence": confidence}
    return {"type": "silence"}


def script_from_corpus(
    corpus_path: str | Path, skill_id: str
) -> TranscriptScript:
    """Turn one skill's recorded sessions into a replay script.

    Sessions are replayed in corpus order; each command becomes a pattern
    and the session-ending reply becomes a ``closed`` message so the replay
    terminates dialogues exactly where the original skill did.
    """
    entries: list[ScriptEntry] = []
    invocation = ""
    found = False
    with open(corpus_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                session = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ScriptError(f"{corpus_path}:{lineno}: bad session line: {exc}") from exc
            if session.get("skill_id") != skill_id:
                continue
            found = True
            termination = session.get("termination", "")
            if termination == "connector_error":
                raise ScriptError(
                    f"{corpus_path}:{lineno}: connector_error sessions cannot be replayed"
                )
            turns = session.get("turns", [])
            for i, turn in enumerate(turns):
                input_text = _turn_input(turn)
                if not invocation and normalize(input_text).startswith("open "):
                    invocation = input_text[len("open ") :].strip()
                entries.append(
                    ScriptEntry(
                        pattern=input_text,
                        reply=_turn_reply(turn, i == len(turns) - 1, termination),
                    )
                )
    if not found:
        raise ScriptError(f"{corpus_path}: no sessions for skill {skill_id!r}")
    return TranscriptScript(
        invocation_name=invocation, entries=entries, skill_id=skill_id
    )


def corpus_skill_ids(corpus_path: str | Path) -> list[str]:
    seen: list[str] = []
    with open(corpus_path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            skill_id = json.loads(line).get("skill_id")
            if skill_id and skill_id not in seen:
                seen.append(skill_id)
    return seen
