"""Scripted speech-adapter process for the skill-probe wire protocol."""

from .script import ScriptEntry, ScriptError, ScriptPlayer, TranscriptScript, script_from_corpus
from .serve import serve

__version__ = "0.1.0"

__all__ = [
    "ScriptEntry",
    "ScriptError",
    "ScriptPlayer",
    "TranscriptScript",
    "script_from_corpus",
    "serve",
]
