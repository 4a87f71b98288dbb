"""The adapter process: one protocol-conformant reply line per request line.

Requests arrive on stdin, replies leave on stdout:

    {"type": "open", "invocation": S, "timeout_ms": N}  -> scripted reply
    {"type": "say", "text": S, "timeout_ms": N}         -> scripted reply
    {"type": "wait", "timeout_ms": N}                   -> scripted reply
    {"type": "close"}                                   -> process exits 0

Anything malformed or unknown draws {"type": "error", ...} and the loop
keeps going, so a confused harness can never deadlock this process.

This module is also the seam for real speech engines: a live adapter would
replace ``ScriptPlayer.reply_to`` with synthesize-play-listen-transcribe
(text in, one reply out) and keep the loop unchanged.
"""

from __future__ import annotations

import json
from typing import TextIO

from .script import SILENCE_INPUT, ScriptPlayer, TranscriptScript


def serve(script: TranscriptScript, stdin: TextIO, stdout: TextIO) -> int:
    """Run the reply loop until ``close`` or end of input.  Returns the
    process exit code."""
    player = ScriptPlayer(script)

    def reply(payload: dict) -> None:
        stdout.write(json.dumps(payload, separators=(",", ":")) + "\n")
        stdout.flush()

    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
            if not isinstance(request, dict):
                raise ValueError("request is not a JSON object")
        except ValueError as exc:
            reply({"type": "error", "detail": f"malformed request: {exc}"})
            continue

        kind = request.get("type")
        if kind == "close":
            return 0
        if kind == "open":
            reply(player.reply_to(f"open {request.get('invocation', '')}"))
        elif kind == "say":
            text = request.get("text")
            if not isinstance(text, str):
                reply({"type": "error", "detail": "say request without text"})
                continue
            reply(player.reply_to(text))
        elif kind == "wait":
            reply(player.reply_to(SILENCE_INPUT))
        else:
            reply({"type": "error", "detail": f"unknown request type: {kind!r}"})
    return 0
