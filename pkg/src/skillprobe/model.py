"""Domain model for the voice-skill compliance harness.

Conversations are recorded as sessions of alternating crawler commands and
skill responses.  Every text comparison in the harness goes through
``normalize`` so that case, punctuation, and spacing artifacts from speech
transcription never influence a verdict.
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Iterator


class ValidationError(ValueError):
    """Raised when a domain object violates one of its invariants."""


# ---------------------------------------------------------------------------
# Text utilities
# ---------------------------------------------------------------------------

_WS_RUN = re.compile(r"\s+")


def normalize(text: str) -> str:
    """Canonical comparison form: lowercase, Unicode punctuation (general
    categories P*) removed, whitespace runs collapsed, ends stripped.

    Idempotent and total; the deterministic stand-in for hand-correcting
    transcripts.
    """
    lowered = text.lower()
    no_punct = "".join(
        ch for ch in lowered if not unicodedata.category(ch).startswith("P")
    )
    return _WS_RUN.sub(" ", no_punct).strip()


def texts_differ(a: str, b: str) -> bool:
    """True when two utterances differ after normalization."""
    return normalize(a) != normalize(b)


def word_count(text: str) -> int:
    norm = normalize(text)
    return len(norm.split()) if norm else 0


# ---------------------------------------------------------------------------
# Enumerations
# ---------------------------------------------------------------------------


class SkillCategory(Enum):
    DAILY_ACTIVITIES = "daily_activities"
    ENTERTAINMENT = "entertainment"
    EDUCATION_REFERENCE = "education_reference"
    HEALTH_FITNESS = "health_fitness"
    TRAVEL_TRANSPORTATION = "travel_transportation"
    GAMES_TRIVIA_ACCESSORIES = "games_trivia_accessories"
    FOOD_DRINK = "food_drink"
    SHOPPING_FINANCE = "shopping_finance"
    COMMUNICATION_SOCIAL = "communication_social"
    KIDS = "kids"

    @classmethod
    def parse(cls, raw: str) -> "SkillCategory":
        """Accept the canonical value or a display-style name
        ("Games, Trivia & Accessories" -> games_trivia_accessories)."""
        try:
            return cls(raw)
        except ValueError:
            pass
        slug = re.sub(r"[^a-z0-9]+", "_", raw.lower()).strip("_")
        slug = slug.replace("and_", "").replace("_and", "")
        for member in cls:
            if member.value == slug or member.value.replace("_", "") == slug.replace("_", ""):
                return member
        raise ValidationError(f"unknown skill category: {raw!r}")


class Role(Enum):
    CRAWLER = "crawler"
    SKILL = "skill"


class Probe(Enum):
    BASIC_LOOP = "basic_loop"
    VARIETY_RUN = "variety_run"
    EXPLORATION = "exploration"
    SILENCE_PROBE = "silence_probe"
    MEMORY_CHECK = "memory_check"


class Stage(Enum):
    FIRST_USE = "first_use"
    POST_SETUP = "post_setup"
    POST_EXPLORATION = "post_exploration"
    NA = "n/a"


class Termination(Enum):
    EXITED_BY_STOP = "exited_by_stop"
    AUTO_EXIT = "auto_exit"
    TIMEOUT = "timeout"
    CONNECTOR_ERROR = "connector_error"


class FeatureGroup(Enum):
    BASIC_COMMANDS = "basic_commands"
    VARIETY = "variety"
    ERROR_HANDLING = "error_handling"
    MEMORIZING = "memorizing"


class GuidelineId(Enum):
    G1 = "G1"
    G2 = "G2"
    G3 = "G3"
    G4 = "G4"
    G5 = "G5"
    G6 = "G6"
    G7 = "G7"
    G8 = "G8"

    @property
    def number(self) -> int:
        return int(self.value[1])

    @property
    def feature_group(self) -> FeatureGroup:
        return _FEATURE_GROUPS[self]


_FEATURE_GROUPS = {
    GuidelineId.G1: FeatureGroup.BASIC_COMMANDS,
    GuidelineId.G2: FeatureGroup.BASIC_COMMANDS,
    GuidelineId.G3: FeatureGroup.BASIC_COMMANDS,
    GuidelineId.G4: FeatureGroup.VARIETY,
    GuidelineId.G5: FeatureGroup.VARIETY,
    GuidelineId.G6: FeatureGroup.ERROR_HANDLING,
    GuidelineId.G7: FeatureGroup.ERROR_HANDLING,
    GuidelineId.G8: FeatureGroup.MEMORIZING,
}


class Verdict(Enum):
    COMPLIANT = "compliant"
    NON_COMPLIANT = "non_compliant"
    NOT_APPLICABLE = "not_applicable"
    INCONCLUSIVE = "inconclusive"


# ---------------------------------------------------------------------------
# Conversation records
# ---------------------------------------------------------------------------


class _SilenceMarker:
    """Singleton marker: the crawler deliberately said nothing this turn."""

    __slots__ = ()

    def __repr__(self) -> str:  # pragma: no cover - repr only
        return "SILENCE"


SILENCE = _SilenceMarker()


@dataclass(frozen=True)
class SkillDescriptor:
    """One roster row: identity and store metadata for a skill."""

    id: str
    display_name: str
    invocation_name: str
    category: SkillCategory
    subcategory: str | None = None
    review_count: int = 0
    avg_rating: float | None = None
    excluded_reason: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("skill id must be non-empty")
        if not self.invocation_name:
            raise ValidationError(f"skill {self.id}: invocation_name must be non-empty")
        if not isinstance(self.review_count, int) or self.review_count < 0:
            raise ValidationError(
                f"skill {self.id}: review_count must be a non-negative integer"
            )
        if self.avg_rating is not None and not 0.0 <= self.avg_rating <= 5.0:
            raise ValidationError(f"skill {self.id}: avg_rating must lie in [0, 5]")

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "display_name": self.display_name,
            "invocation_name": self.invocation_name,
            "category": self.category.value,
            "subcategory": self.subcategory,
            "review_count": self.review_count,
            "avg_rating": self.avg_rating,
            "excluded_reason": self.excluded_reason,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SkillDescriptor":
        return cls(
            id=str(data["id"]),
            display_name=str(data.get("display_name", "")),
            invocation_name=str(data["invocation_name"]),
            category=SkillCategory.parse(str(data["category"])),
            subcategory=data.get("subcategory") or None,
            review_count=int(data.get("review_count", 0)),
            avg_rating=None if data.get("avg_rating") in (None, "") else float(data["avg_rating"]),
            excluded_reason=data.get("excluded_reason") or None,
        )


@dataclass(frozen=True)
class Utterance:
    """A single thing said by either side; normalized_text is always derived."""

    role: Role
    text: str
    confidence: float | None = None
    timestamp: int = 0
    normalized_text: str = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "normalized_text", normalize(self.text))
        if self.confidence is not None:
            if self.role is not Role.SKILL:
                raise ValidationError("confidence only applies to skill utterances")
            if not 0.0 <= self.confidence <= 1.0:
                raise ValidationError("confidence must lie in [0, 1]")
        if self.timestamp < 0:
            raise ValidationError("timestamp must be non-negative")

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "role": self.role.value,
            "text": self.text,
            "normalized_text": self.normalized_text,
            "timestamp": self.timestamp,
        }
        if self.confidence is not None:
            data["confidence"] = self.confidence
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Utterance":
        return cls(
            role=Role(data["role"]),
            text=data["text"],
            confidence=data.get("confidence"),
            timestamp=int(data.get("timestamp", 0)),
        )


@dataclass(frozen=True)
class Turn:
    """One exchange: a crawler command (or deliberate silence) and what the
    skill said back (None when nothing came)."""

    command: Utterance | _SilenceMarker
    response: Utterance | None
    wait_elapsed: int = 0

    def __post_init__(self) -> None:
        if isinstance(self.command, Utterance):
            if self.command.role is not Role.CRAWLER:
                raise ValidationError("turn commands must be crawler utterances")
        elif self.command is not SILENCE:
            raise ValidationError("command must be an utterance or the SILENCE marker")
        if self.response is not None and self.response.role is not Role.SKILL:
            raise ValidationError("turn responses must be skill utterances")
        if self.wait_elapsed < 0:
            raise ValidationError("wait_elapsed must be non-negative")

    @property
    def is_silence(self) -> bool:
        return self.command is SILENCE

    def to_dict(self) -> dict[str, Any]:
        return {
            "command": "SILENCE" if self.is_silence else self.command.to_dict(),
            "response": "NO_RESPONSE" if self.response is None else self.response.to_dict(),
            "wait_elapsed": self.wait_elapsed,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Turn":
        raw_cmd = data["command"]
        raw_resp = data["response"]
        return cls(
            command=SILENCE if raw_cmd == "SILENCE" else Utterance.from_dict(raw_cmd),
            response=None if raw_resp == "NO_RESPONSE" else Utterance.from_dict(raw_resp),
            wait_elapsed=int(data.get("wait_elapsed", 0)),
        )


_LOOP_PROBES = (Probe.BASIC_LOOP, Probe.VARIETY_RUN, Probe.MEMORY_CHECK)


@dataclass(frozen=True)
class Session:
    """One recorded conversation with a skill."""

    skill_id: str
    probe: Probe
    run_index: int
    stage: Stage
    turns: tuple[Turn, ...]
    termination: Termination

    def __post_init__(self) -> None:
        if self.run_index < 1:
            raise ValidationError("run_index must be positive")
        if self.termination is not Termination.CONNECTOR_ERROR and not self.turns:
            raise ValidationError("sessions must record turns unless the connector failed")
        if self.probe in _LOOP_PROBES and self.termination is Termination.EXITED_BY_STOP:
            first, last = self.turns[0], self.turns[-1]
            if not (
                isinstance(first.command, Utterance)
                and first.command.normalized_text.startswith("open ")
            ):
                raise ValidationError("loop sessions must begin with the open command")
            if not (
                isinstance(last.command, Utterance)
                and last.command.normalized_text == "stop"
            ):
                raise ValidationError("stopped loop sessions must end with the stop command")

    @property
    def key(self) -> str:
        """Stable reference for evidence lists, unique within one skill's corpus."""
        return f"{self.probe.value}:{self.run_index}"

    def to_dict(self) -> dict[str, Any]:
        return {
            "skill_id": self.skill_id,
            "probe": self.probe.value,
            "run_index": self.run_index,
            "stage": self.stage.value,
            "turns": [t.to_dict() for t in self.turns],
            "termination": self.termination.value,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Session":
        return cls(
            skill_id=data["skill_id"],
            probe=Probe(data["probe"]),
            run_index=int(data["run_index"]),
            stage=Stage(data["stage"]),
            turns=tuple(Turn.from_dict(t) for t in data["turns"]),
            termination=Termination(data["termination"]),
        )


@dataclass(frozen=True)
class GuidelineVerdict:
    """Outcome of checking one guideline for one skill."""

    guideline: GuidelineId
    verdict: Verdict
    facets: dict[str, bool] = field(default_factory=dict)
    evidence: tuple[tuple[str, int], ...] = ()
    note: str = ""

    def __post_init__(self) -> None:
        if self.verdict in (Verdict.COMPLIANT, Verdict.NON_COMPLIANT) and not self.evidence:
            raise ValidationError(
                f"{self.guideline.value}: {self.verdict.value} verdicts need evidence"
            )

    def to_dict(self) -> dict[str, Any]:
        return {
            "guideline": self.guideline.value,
            "verdict": self.verdict.value,
            "facets": dict(self.facets),
            "evidence": [[ref, idx] for ref, idx in self.evidence],
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "GuidelineVerdict":
        return cls(
            guideline=GuidelineId(data["guideline"]),
            verdict=Verdict(data["verdict"]),
            facets={k: bool(v) for k, v in data.get("facets", {}).items()},
            evidence=tuple((ref, int(idx)) for ref, idx in data.get("evidence", [])),
            note=data.get("note", ""),
        )


# ---------------------------------------------------------------------------
# Corpus persistence (JSON Lines, one session per line)
# ---------------------------------------------------------------------------


def session_to_json(session: Session) -> str:
    return json.dumps(session.to_dict(), separators=(",", ":"), sort_keys=False)


def dump_sessions(sessions: Iterable[Session], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for session in sessions:
            fh.write(session_to_json(session))
            fh.write("\n")


def load_sessions(path: str | Path) -> list[Session]:
    sessions = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                sessions.append(Session.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise ValidationError(f"{path}:{lineno}: bad session record: {exc}") from exc
    return sessions


def iter_skill_slices(sessions: Iterable[Session]) -> Iterator[tuple[str, list[Session]]]:
    """Group a corpus by skill, preserving first-seen order."""
    order: list[str] = []
    grouped: dict[str, list[Session]] = {}
    for session in sessions:
        if session.skill_id not in grouped:
            order.append(session.skill_id)
            grouped[session.skill_id] = []
        grouped[session.skill_id].append(session)
    for skill_id in order:
        yield skill_id, grouped[skill_id]
