"""In-process simulated skills with derivable ground-truth verdicts.

A ``SimProfile`` parameterizes one simulated skill's conversational
behaviour: staged welcome messages, help text, goodbye variants, one-shot
exit, re-prompting after silence, and session memory.  ``step`` is the
deterministic transition function; ``ground_truth`` computes, analytically
from the profile alone, the verdict the evaluator is expected to reach for
each guideline.  ``generate_profiles`` builds randomized-but-seeded profile
populations that cover every satisfiable behaviour combination, which is
what the end-to-end oracle suite runs on.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable, TextIO

from .connectors import (
    ConnectorEvent,
    EventKind,
    SessionClosedError,
    SessionHandle,
    closed_event,
    response_event,
    silence_event,
)
from .model import (
    SILENCE,
    GuidelineId,
    SkillDescriptor,
    Stage,
    ValidationError,
    Verdict,
    normalize,
    texts_differ,
)

# What a skill says when it has nothing better to say.  Kept under five
# normalized words and free of instruction phrasing so it never counts as
# informative help.
FALLBACK_REPLY = "Sorry, I don't understand."


class RepromptMode(Enum):
    NONE = "none"
    FIXED = "fixed"
    REWORDED = "reworded"


class MemoryMode(Enum):
    NONE = "none"
    RESUME_PROMPT = "resume_prompt"


@dataclass(frozen=True)
class SimProfile:
    """Complete behavioural description of one simulated skill."""

    skill: SkillDescriptor
    welcome_variants: dict[Stage, str]
    help_text: str | None
    goodbye_variants: tuple[str, ...]
    one_shot: bool
    reprompt_mode: RepromptMode
    reprompt_texts: tuple[str, ...]
    memory_mode: MemoryMode
    memory_markers: tuple[str, ...]
    command_responses: dict[str, str]
    rng_seed: int

    def __post_init__(self) -> None:
        if self.one_shot and (self.help_text or self.reprompt_mode is not RepromptMode.NONE):
            raise ValidationError(
                f"profile {self.skill.id}: one-shot skills cannot have help or re-prompts"
            )
        if self.reprompt_mode is RepromptMode.REWORDED:
            distinct = _pairwise_distinct(self.reprompt_texts)
            if len(self.reprompt_texts) < 2 or not distinct:
                raise ValidationError(
                    f"profile {self.skill.id}: reworded re-prompts need >= 2 differing texts"
                )
        if self.reprompt_mode is RepromptMode.FIXED and not self.reprompt_texts:
            raise ValidationError(f"profile {self.skill.id}: fixed re-prompt needs a text")
        if self.memory_mode is MemoryMode.RESUME_PROMPT:
            late = self.welcome_variants.get(Stage.POST_EXPLORATION, "")
            if not any(normalize(m) in normalize(late) for m in self.memory_markers):
                raise ValidationError(
                    f"profile {self.skill.id}: memory profiles need a memory marker "
                    "in the post-exploration welcome"
                )

    def to_dict(self) -> dict[str, Any]:
        return {
            "skill": self.skill.to_dict(),
            "welcome_variants": {s.value: t for s, t in self.welcome_variants.items()},
            "help_text": self.help_text,
            "goodbye_variants": list(self.goodbye_variants),
            "one_shot": self.one_shot,
            "reprompt_mode": self.reprompt_mode.value,
            "reprompt_texts": list(self.reprompt_texts),
            "memory_mode": self.memory_mode.value,
            "memory_markers": list(self.memory_markers),
            "command_responses": dict(self.command_responses),
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SimProfile":
        return cls(
            skill=SkillDescriptor.from_dict(data["skill"]),
            welcome_variants={Stage(s): t for s, t in data["welcome_variants"].items()},
            help_text=data.get("help_text"),
            goodbye_variants=tuple(data.get("goodbye_variants", [])),
            one_shot=bool(data.get("one_shot", False)),
            reprompt_mode=RepromptMode(data.get("reprompt_mode", "none")),
            reprompt_texts=tuple(data.get("reprompt_texts", [])),
            memory_mode=MemoryMode(data.get("memory_mode", "none")),
            memory_markers=tuple(data.get("memory_markers", [])),
            command_responses=dict(data.get("command_responses", {})),
            rng_seed=int(data.get("rng_seed", 0)),
        )


def _pairwise_distinct(texts: Iterable[str]) -> bool:
    items = list(texts)
    return any(
        texts_differ(a, b) for i, a in enumerate(items) for b in items[i + 1 :]
    )


@dataclass(frozen=True)
class SimState:
    """Cross-session state of one simulated skill lineage.

    The counters make goodbye and re-prompt cycling deterministic; they are
    implementation detail and are never serialized.
    """

    first_use: bool = True
    setup_done: bool = False
    explored_commands: frozenset[str] = frozenset()
    session_open: bool = False
    stops_emitted: int = 0
    session_silences: int = 0


def initial_state() -> SimState:
    return SimState()


def _derived_stage(state: SimState) -> Stage:
    if state.first_use:
        return Stage.FIRST_USE
    if state.explored_commands:
        return Stage.POST_EXPLORATION
    return Stage.POST_SETUP


def step(
    profile: SimProfile,
    state: SimState,
    command: object,
    stage: Stage | None = None,
) -> tuple[ConnectorEvent, SimState]:
    """Total, deterministic transition: one input, one event, new state.

    ``command`` is a string or the SILENCE marker.  ``stage`` selects the
    welcome variant on open; when the caller does not signal one it is
    derived from the lineage state.
    """
    if command is SILENCE:
        return _step_silence(profile, state)
    if not isinstance(command, str):
        raise ValidationError("step input must be a string or SILENCE")

    norm = normalize(command)
    open_form = f"open {normalize(profile.skill.invocation_name)}"
    if norm == open_form:
        return _step_open(profile, state, stage)
    if not state.session_open:
        # Commands against a closed session fall through as a closed echo.
        return closed_event(), state
    if norm == "stop":
        return _step_stop(profile, state)
    if norm == "help":
        reply = profile.help_text if profile.help_text else FALLBACK_REPLY
        return response_event(reply), state
    if norm in profile.command_responses:
        new_state = replace(
            state, explored_commands=state.explored_commands | {norm}
        )
        return response_event(profile.command_responses[norm]), new_state
    return response_event(FALLBACK_REPLY), state


def _step_open(
    profile: SimProfile, state: SimState, stage: Stage | None
) -> tuple[ConnectorEvent, SimState]:
    resolved = stage if stage not in (None, Stage.NA) else _derived_stage(state)
    welcome = profile.welcome_variants.get(resolved, "")
    new_state = replace(
        state,
        first_use=False,
        setup_done=state.setup_done or resolved is not Stage.FIRST_USE,
        session_open=True,
        session_silences=0,
    )
    if not welcome:
        return silence_event(), new_state
    if profile.one_shot:
        return closed_event(welcome), replace(new_state, session_open=False)
    return response_event(welcome), new_state


def _step_stop(profile: SimProfile, state: SimState) -> tuple[ConnectorEvent, SimState]:
    goodbye = None
    if profile.goodbye_variants:
        idx = (profile.rng_seed + state.stops_emitted) % len(profile.goodbye_variants)
        goodbye = profile.goodbye_variants[idx]
    new_state = replace(
        state, session_open=False, stops_emitted=state.stops_emitted + 1
    )
    return closed_event(goodbye), new_state


def _step_silence(profile: SimProfile, state: SimState) -> tuple[ConnectorEvent, SimState]:
    if not state.session_open:
        return silence_event(), state
    mode = profile.reprompt_mode
    if mode is RepromptMode.NONE:
        return closed_event(), replace(state, session_open=False)
    if mode is RepromptMode.FIXED:
        text = profile.reprompt_texts[0]
    else:
        text = profile.reprompt_texts[state.session_silences % len(profile.reprompt_texts)]
    new_state = replace(state, session_silences=state.session_silences + 1)
    return response_event(text), new_state


# ---------------------------------------------------------------------------
# Ground truth
# ---------------------------------------------------------------------------


def ground_truth(profile: SimProfile) -> dict[GuidelineId, Verdict]:
    """Expected evaluator verdicts, computed analytically from the profile."""
    C, N = Verdict.COMPLIANT, Verdict.NON_COMPLIANT
    welcomes = [t for t in profile.welcome_variants.values() if t]
    verdicts = {
        GuidelineId.G1: C if welcomes else N,
        GuidelineId.G2: C if (not profile.one_shot and profile.help_text) else N,
        GuidelineId.G3: C,
        GuidelineId.G4: C if _pairwise_distinct(welcomes) else N,
        GuidelineId.G5: C if _pairwise_distinct(profile.goodbye_variants) else N,
        GuidelineId.G6: (
            Verdict.NOT_APPLICABLE
            if profile.one_shot
            else (C if profile.reprompt_mode is not RepromptMode.NONE else N)
        ),
        GuidelineId.G7: C if profile.reprompt_mode is RepromptMode.REWORDED else N,
        GuidelineId.G8: C if profile.memory_mode is MemoryMode.RESUME_PROMPT else N,
    }
    return verdicts


def expected_goodbye_facet(profile: SimProfile) -> bool:
    return bool(profile.goodbye_variants)


# ---------------------------------------------------------------------------
# Text connector
# ---------------------------------------------------------------------------


class SimConnector:
    """The in-process text connector: replies are instant and the event
    stream is a pure function of (profile, command sequence).

    ``noise`` is an optional hook applied to every outgoing skill text,
    e.g. to inject character-level transcription perturbations.
    """

    zero_latency = True

    def __init__(self, profile: SimProfile, noise: Callable[[str], str] | None = None):
        self._profile = profile
        self._state = initial_state()
        self._noise = noise
        self._opens = 0
        self._handle: SessionHandle | None = None

    def open_session(
        self, invocation_name: str, timeout_ms: int, stage: Stage | None = None
    ) -> tuple[SessionHandle, ConnectorEvent]:
        del timeout_ms
        self._opens += 1
        handle = SessionHandle(session_id=f"{self._profile.skill.id}#{self._opens}")
        event, self._state = step(
            self._profile, self._state, f"open {invocation_name}", stage=stage
        )
        if not self._state.session_open:
            handle.close()
        self._handle = handle
        return handle, self._apply_noise(event)

    def say(self, handle: SessionHandle, text: str, timeout_ms: int) -> ConnectorEvent:
        del timeout_ms
        if not handle.is_open:
            raise SessionClosedError(f"session {handle.session_id} is closed")
        event, self._state = step(self._profile, self._state, text)
        if not self._state.session_open:
            handle.close()
        return self._apply_noise(event)

    def wait_silence(self, handle: SessionHandle, timeout_ms: int) -> ConnectorEvent:
        if not handle.is_open:
            raise SessionClosedError(f"session {handle.session_id} is closed")
        if timeout_ms <= 0:
            return silence_event()
        event, self._state = step(self._profile, self._state, SILENCE)
        if not self._state.session_open:
            handle.close()
        return self._apply_noise(event)

    def shutdown(self) -> None:
        if self._handle is not None:
            self._handle.close()

    def _apply_noise(self, event: ConnectorEvent) -> ConnectorEvent:
        if self._noise is None:
            return event
        if event.kind is EventKind.RESPONSE and event.text is not None:
            return response_event(self._noise(event.text), event.confidence)
        if event.kind is EventKind.CLOSED and event.detail is not None:
            return closed_event(self._noise(event.detail))
        return event


# ---------------------------------------------------------------------------
# Profile population generator
# ---------------------------------------------------------------------------

_WELCOMES = (
    "Welcome to the daily briefing, ask for a topic to begin.",
    "Hi there, this is your trivia arena, pick a round when ready.",
    "Hello and welcome, your kitchen companion is listening now.",
    "Greetings explorer, the travel desk is open for planning.",
    "Good to have you here, the fitness studio is ready to go.",
    "Welcome aboard the story train, choose an adventure anytime.",
    "This is market watch, your money minute starts whenever you like.",
    "Hey friend, the game room lights are on and waiting for you.",
)

_MEMORY_WELCOMES = (
    "Welcome back! To continue where you last left off, just tell me ready.",
    "Welcome back, last time you stopped midway, would you like to resume?",
    "Good to see you again, you can resume your previous session anytime.",
    "Welcome back friend, picking up where you left off from last time.",
)

_GOODBYES = (
    "Goodbye, thanks for stopping by today.",
    "See you next time, take care.",
    "Bye for now, come back whenever you like.",
    "Thanks for playing, catch you later.",
    "So long, and have a lovely rest of your day.",
)

_FIXED_REPROMPTS = (
    "Are you still there?",
    "Hello? Anyone home?",
    "I didn't hear anything.",
)

_REWORDED_REPROMPTS = (
    "You can say help to hear the full menu again.",
    "Try saying repeat if you missed the question.",
    "If you are stuck, you can say give me a hint.",
    "You can also say next to skip ahead to another item.",
)

_COMMANDS = (
    "play a round",
    "read the headlines",
    "give me a hint",
    "tell me a fact",
    "start a quiz",
    "check my score",
    "repeat the question",
    "skip this one",
)

_COMMAND_REPLIES = (
    "Here you go, coming right up.",
    "Sure thing, one moment please.",
    "Absolutely, starting that now.",
    "On it, give me a second.",
)


@dataclass(frozen=True)
class _Combo:
    one_shot: bool
    reprompt: RepromptMode
    memory: bool
    g4_variety: bool
    g5_variety: bool
    has_help: bool


def _combo_grid() -> tuple[_Combo, ...]:
    """Every satisfiable behaviour combination.

    Constraints baked in: one-shot skills cannot re-prompt, never speak a
    goodbye (so stop variety is unobservable), and have no help; a memory
    welcome necessarily differs from the first-use welcome, so memory
    implies open variety.
    """
    grid: list[_Combo] = []
    for reprompt in RepromptMode:
        for memory in (False, True):
            for g4 in (False, True):
                if memory and not g4:
                    continue
                for g5 in (False, True):
                    for has_help in (False, True):
                        grid.append(_Combo(False, reprompt, memory, g4, g5, has_help))
    for memory in (False, True):
        for g4 in (False, True):
            if memory and not g4:
                continue
            grid.append(_Combo(True, RepromptMode.NONE, memory, g4, False, False))
    # Fixed shuffle so any contiguous slice of the grid mixes behaviours.
    random.Random(1109).shuffle(grid)
    return tuple(grid)


COMBO_GRID = _combo_grid()


def _surface_variant(text: str, rng: random.Random) -> str:
    """A rendition with the same normalized form: case, punctuation, and
    spacing jitter only."""
    out = rng.choice((text, text.upper(), text.title(), text.capitalize()))
    if rng.random() < 0.5:
        out = out.rstrip(".!?") + rng.choice(("!", "...", "?!", "."))
    if rng.random() < 0.3:
        out = "  " + out.replace(", ", " ,  ", 1)
    return out


def _distinct_choice(pool: tuple[str, ...], avoid: str, rng: random.Random) -> str:
    candidates = [t for t in pool if texts_differ(t, avoid)]
    return rng.choice(candidates)


def build_profile(skill: SkillDescriptor, combo: _Combo, rng: random.Random) -> SimProfile:
    first = rng.choice(_WELCOMES)
    if combo.g4_variety and not combo.memory:
        setup = _distinct_choice(_WELCOMES, first, rng)
    elif combo.g4_variety and combo.memory and rng.random() < 0.5:
        setup = _distinct_choice(_WELCOMES, first, rng)
    else:
        setup = _surface_variant(first, rng)
    if combo.memory:
        explored = rng.choice(_MEMORY_WELCOMES)
    else:
        # Keeping the explored-stage welcome equal to the first-use welcome
        # is what makes "no memory" analytically checkable: the memory probe
        # then sees nothing new.
        explored = _surface_variant(first, rng)

    if combo.one_shot:
        goodbyes: tuple[str, ...] = ()
    elif combo.g5_variety:
        goodbyes = tuple(rng.sample(_GOODBYES, rng.randint(2, 3)))
    else:
        style = rng.randrange(3)
        if style == 0:
            goodbyes = ()
        elif style == 1:
            goodbyes = (rng.choice(_GOODBYES),)
        else:
            g = rng.choice(_GOODBYES)
            goodbyes = (g, _surface_variant(g, rng))

    if combo.reprompt is RepromptMode.FIXED:
        reprompts: tuple[str, ...] = (rng.choice(_FIXED_REPROMPTS),)
    elif combo.reprompt is RepromptMode.REWORDED:
        reprompts = tuple(rng.sample(_REWORDED_REPROMPTS, rng.randint(2, 3)))
    else:
        reprompts = ()

    help_text = None
    command_responses: dict[str, str] = {}
    if combo.has_help:
        commands = rng.sample(_COMMANDS, rng.randint(2, 3))
        command_responses = {normalize(c): rng.choice(_COMMAND_REPLIES) for c in commands}
        if len(commands) == 2:
            help_text = f"You can say {commands[0]} or {commands[1]}."
        else:
            help_text = (
                f"You can say {commands[0]} or {commands[1]}. "
                f"You can also say {commands[2]}."
            )

    return SimProfile(
        skill=skill,
        welcome_variants={
            Stage.FIRST_USE: first,
            Stage.POST_SETUP: setup,
            Stage.POST_EXPLORATION: explored,
        },
        help_text=help_text,
        goodbye_variants=goodbyes,
        one_shot=combo.one_shot,
        reprompt_mode=combo.reprompt,
        reprompt_texts=reprompts,
        memory_mode=MemoryMode.RESUME_PROMPT if combo.memory else MemoryMode.NONE,
        memory_markers=("welcome back", "left off", "resume", "last time"),
        command_responses=command_responses,
        rng_seed=rng.randrange(2**31),
    )


def generate_profiles(skills: Iterable[SkillDescriptor], seed: int) -> list[SimProfile]:
    """One profile per skill, cycling through the full behaviour grid so any
    population of >= len(COMBO_GRID) skills covers every combination."""
    profiles = []
    for i, skill in enumerate(skills):
        combo = COMBO_GRID[i % len(COMBO_GRID)]
        rng = random.Random(f"{seed}:{skill.id}")
        profiles.append(build_profile(skill, combo, rng))
    return profiles


def dump_profiles(profiles: Iterable[SimProfile], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([p.to_dict() for p in profiles], fh, indent=2)
        fh.write("\n")


def load_profiles(path: str | Path) -> list[SimProfile]:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise ValidationError(f"{path}: profiles file must be a JSON array")
    return [SimProfile.from_dict(entry) for entry in data]


# ---------------------------------------------------------------------------
# Wire-protocol server (for adapter-client integration tests)
# ---------------------------------------------------------------------------


def serve_profiles(profiles: Iterable[SimProfile], stdin: TextIO, stdout: TextIO) -> None:
    """Expose simulated skills through the adapter wire protocol.

    The profile is selected by the invocation name in each ``open`` request;
    lineage state persists across dialogues until ``close`` arrives.
    """
    by_invocation = {normalize(p.skill.invocation_name): p for p in profiles}
    states: dict[str, SimState] = {}
    active: SimProfile | None = None

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
                raise ValueError("request is not an object")
        except ValueError as exc:
            reply({"type": "error", "detail": f"malformed request: {exc}"})
            continue
        kind = request.get("type")
        if kind == "close":
            return
        if kind == "open":
            invocation = normalize(str(request.get("invocation", "")))
            profile = by_invocation.get(invocation)
            if profile is None:
                reply({"type": "error", "detail": f"unknown invocation: {invocation!r}"})
                continue
            active = profile
            state = states.get(profile.skill.id, initial_state())
            event, state = step(profile, state, f"open {profile.skill.invocation_name}")
            states[profile.skill.id] = state
            reply(_event_to_wire(event))
            continue
        if active is None:
            reply({"type": "error", "detail": "no open session"})
            continue
        state = states[active.skill.id]
        if kind == "say":
            event, state = step(active, state, str(request.get("text", "")))
        elif kind == "wait":
            event, state = step(active, state, SILENCE)
        else:
            reply({"type": "error", "detail": f"unknown request type: {kind!r}"})
            continue
        states[active.skill.id] = state
        reply(_event_to_wire(event))


def _event_to_wire(event: ConnectorEvent) -> dict:
    if event.kind is EventKind.RESPONSE:
        return {"type": "response", "text": event.text, "confidence": event.confidence or 1.0}
    if event.kind is EventKind.SILENCE:
        return {"type": "silence"}
    if event.kind is EventKind.CLOSED:
        payload: dict = {"type": "closed"}
        if event.detail:
            payload["text"] = event.detail
        return payload
    return {"type": "error", "detail": event.detail or "error"}
