"""Configurable defaults: cue phrases, marker lexicon, timeouts.

Defaults ship as package data so the phrase lists are configuration, not
code.  The SKILLPROBE_CONFIG environment variable may point at a JSON file
whose keys override the shipped ones.
"""

from __future__ import annotations

import json
import os
import re
from functools import lru_cache
from importlib import resources
from typing import Sequence

ENV_VAR = "SKILLPROBE_CONFIG"


@lru_cache(maxsize=None)
def _load(env_path: str | None) -> dict:
    base = json.loads(
        resources.files("skillprobe").joinpath("data/default_config.json").read_text("utf-8")
    )
    if env_path:
        with open(env_path, "r", encoding="utf-8") as fh:
            base.update(json.load(fh))
    return base


def settings() -> dict:
    return _load(os.environ.get(ENV_VAR) or None)


def command_cues() -> tuple[str, ...]:
    return tuple(settings()["command_cues"])


def instruction_markers() -> tuple[str, ...]:
    return tuple(settings()["instruction_markers"])


def memory_markers() -> tuple[str, ...]:
    return tuple(settings()["memory_markers"])


def min_informative_words() -> int:
    return int(settings()["min_informative_words"])


def default_timeout_ms() -> int:
    return int(settings()["response_timeout_ms"])


@lru_cache(maxsize=32)
def _compiled(cues: tuple[str, ...]) -> re.Pattern:
    # Longest cue first so "you can also say" wins over "say"; punctuation
    # may fall between cue words.
    ordered = sorted(cues, key=lambda c: -len(c.split()))
    alternatives = [
        r"\b" + r"\W+".join(re.escape(word) for word in cue.split()) + r"\b"
        for cue in ordered
    ]
    return re.compile("|".join(alternatives), re.IGNORECASE)


def compile_cues(cues: Sequence[str]) -> re.Pattern:
    return _compiled(tuple(cues))


_CONJUNCTION = re.compile(r"\s+or\b[,;]?\s*", re.IGNORECASE)


def split_conjunctions(clause: str) -> list[str]:
    return _CONJUNCTION.split(clause)
