"""Elicitation protocols: drive a connector through the probe sequence and
record sessions.

Per skill, the crawl runs the staged variety probe (three open-help-stop
loops with an exploration dialogue between runs two and three), then the
silence probe, then the memory check.  Stage labels are signalled to the
connector so simulated skills present the right welcome; adapters are free
to ignore them.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Sequence

from . import config
from .connectors import Connector, ConnectorEvent, EventKind, SessionHandle
from .ingestion import Roster
from .model import (
    SILENCE,
    Probe,
    Role,
    Session,
    SkillDescriptor,
    Stage,
    Termination,
    Turn,
    Utterance,
    ValidationError,
    normalize,
)

STOP_COMMAND = "stop"
HELP_COMMAND = "help"


def open_command(skill: SkillDescriptor) -> str:
    return f"open {skill.invocation_name}"


@dataclass(frozen=True)
class ElicitationPlan:
    """Probe counts and timeouts governing one crawl."""

    variety_runs: int = 3
    silence_count: int = 2
    response_timeout_ms: int = 8000
    max_extracted_commands: int = 8

    def __post_init__(self) -> None:
        if self.variety_runs < 2:
            raise ValidationError("variety_runs must be >= 2 to ever observe variety")
        if self.silence_count < 1:
            raise ValidationError("silence_count must be >= 1")
        if self.max_extracted_commands < 1:
            raise ValidationError("max_extracted_commands must be >= 1")
        if self.response_timeout_ms < 0:
            raise ValidationError("response_timeout_ms must be >= 0")

    def to_dict(self) -> dict[str, Any]:
        return {
            "variety_runs": self.variety_runs,
            "silence_count": self.silence_count,
            "response_timeout_ms": self.response_timeout_ms,
            "max_extracted_commands": self.max_extracted_commands,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ElicitationPlan":
        known = {f: data[f] for f in cls.__dataclass_fields__ if f in data}
        return cls(**known)


@dataclass(frozen=True)
class CommandSet:
    """Commands pulled out of a help response, deduplicated by normalized form."""

    commands: tuple[str, ...]
    source_text: str = ""

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for cmd in self.commands:
            norm = normalize(cmd)
            if not norm:
                raise ValidationError("command set entries must be non-empty")
            if norm in seen:
                raise ValidationError(f"duplicate command (after normalization): {cmd!r}")
            seen.add(norm)


def extract_commands(
    help_text: str,
    max_commands: int = 8,
    cues: Sequence[str] | None = None,
) -> CommandSet:
    """Rule-based command extraction from instruction text.

    Each clause introduced by a cue phrase ("you can say", "say", "try", ...)
    is taken up to the next cue, then split on "or" conjunctions; trailing
    punctuation is trimmed.  Cue matching ignores case and punctuation, but
    the extracted commands keep their original surface form.
    """
    if cues is None:
        cues = config.command_cues()
    if not help_text.strip():
        return CommandSet(commands=(), source_text=help_text)

    cue_re = config.compile_cues(cues)
    matches = list(cue_re.finditer(help_text))
    commands: list[str] = []
    seen: set[str] = set()
    for i, match in enumerate(matches):
        end = matches[i + 1].start() if i + 1 < len(matches) else len(help_text)
        clause = help_text[match.end() : end]
        for part in config.split_conjunctions(clause):
            trimmed = part.strip().strip(".,!?;:\"' \t").strip()
            norm = normalize(trimmed)
            if not norm or norm in seen:
                continue
            seen.add(norm)
            commands.append(trimmed)
            if len(commands) >= max_commands:
                return CommandSet(commands=tuple(commands), source_text=help_text)
    return CommandSet(commands=tuple(commands), source_text=help_text)


class _SessionRecorder:
    """Builds one session turn by turn with a deterministic logical clock."""

    def __init__(self, skill: SkillDescriptor, probe: Probe, run_index: int, stage: Stage):
        self._skill = skill
        self._probe = probe
        self._run_index = run_index
        self._stage = stage
        self._turns: list[Turn] = []
        self._clock = 0

    def _tick(self) -> int:
        ts = self._clock
        self._clock += 1
        return ts

    def record(self, command: str | None, event: ConnectorEvent, wait_elapsed: int) -> None:
        cmd: Utterance | object
        if command is None:
            cmd = SILENCE
            self._tick()
        else:
            cmd = Utterance(role=Role.CRAWLER, text=command, timestamp=self._tick())
        response = None
        if event.kind is EventKind.RESPONSE and event.text is not None:
            response = Utterance(
                role=Role.SKILL,
                text=event.text,
                confidence=event.confidence,
                timestamp=self._tick(),
            )
        elif event.kind is EventKind.CLOSED and event.detail:
            response = Utterance(
                role=Role.SKILL, text=event.detail, confidence=None, timestamp=self._tick()
            )
        self._turns.append(Turn(command=cmd, response=response, wait_elapsed=wait_elapsed))

    def session(self, termination: Termination) -> Session:
        return Session(
            skill_id=self._skill.id,
            probe=self._probe,
            run_index=self._run_index,
            stage=self._stage,
            turns=tuple(self._turns),
            termination=termination,
        )


def _timed(connector: Connector, call: Callable[[], ConnectorEvent], timeout_ms: int) -> tuple[ConnectorEvent, int]:
    if getattr(connector, "zero_latency", False):
        return call(), 0
    start = time.monotonic()
    event = call()
    elapsed = min(int((time.monotonic() - start) * 1000), timeout_ms)
    return event, elapsed


def _run_command_loop(
    connector: Connector,
    skill: SkillDescriptor,
    commands: Sequence[str],
    plan: ElicitationPlan,
    probe: Probe,
    run_index: int,
    stage: Stage,
) -> Session:
    """Open the skill, issue each command, then stop.  Shared engine for the
    basic loop and exploration dialogues."""
    rec = _SessionRecorder(skill, probe, run_index, stage)
    timeout = plan.response_timeout_ms

    handle, event = _open(connector, skill, timeout, stage, rec)
    if event.kind is EventKind.ERROR:
        return rec.session(Termination.CONNECTOR_ERROR)
    if not handle.is_open:
        return rec.session(Termination.AUTO_EXIT)

    for command in commands:
        event, elapsed = _timed(
            connector, lambda: connector.say(handle, command, timeout), timeout
        )
        rec.record(command, event, elapsed)
        if event.kind is EventKind.ERROR:
            return rec.session(Termination.CONNECTOR_ERROR)
        if event.kind is EventKind.CLOSED:
            return rec.session(Termination.AUTO_EXIT)

    event, elapsed = _timed(
        connector, lambda: connector.say(handle, STOP_COMMAND, timeout), timeout
    )
    rec.record(STOP_COMMAND, event, elapsed)
    if event.kind is EventKind.ERROR:
        return rec.session(Termination.CONNECTOR_ERROR)
    if event.kind is EventKind.CLOSED:
        return rec.session(Termination.EXITED_BY_STOP)
    # The skill answered "stop" but kept the session alive.
    handle.close()
    return rec.session(Termination.TIMEOUT)


def _open(
    connector: Connector,
    skill: SkillDescriptor,
    timeout: int,
    stage: Stage,
    rec: _SessionRecorder,
) -> tuple[SessionHandle, ConnectorEvent]:
    start = time.monotonic()
    handle, event = connector.open_session(skill.invocation_name, timeout, stage=stage)
    if getattr(connector, "zero_latency", False):
        elapsed = 0
    else:
        elapsed = min(int((time.monotonic() - start) * 1000), timeout)
    rec.record(open_command(skill), event, elapsed)
    return handle, event


def run_basic_loop(
    connector: Connector,
    skill: SkillDescriptor,
    plan: ElicitationPlan,
    stage: Stage,
    probe: Probe = Probe.BASIC_LOOP,
    run_index: int = 1,
) -> Session:
    """One open-help-stop dialogue."""
    return _run_command_loop(
        connector, skill, [HELP_COMMAND], plan, probe, run_index, stage
    )


def run_exploration(
    connector: Connector,
    skill: SkillDescriptor,
    commands: CommandSet,
    plan: ElicitationPlan,
    run_index: int = 1,
) -> Session:
    """One open-[commands]-stop dialogue; empty command sets degenerate to
    open-stop."""
    return _run_command_loop(
        connector,
        skill,
        list(commands.commands),
        plan,
        Probe.EXPLORATION,
        run_index,
        Stage.POST_SETUP,
    )


def _help_response_text(session: Session) -> str | None:
    """The skill's reply to "help" in this session, or None when the help
    command never got a reply turn."""
    for turn in session.turns:
        cmd = turn.command
        if not isinstance(cmd, Utterance) or cmd.normalized_text != HELP_COMMAND:
            continue
        return turn.response.text if turn.response is not None else ""
    return None


def run_variety_probe(
    connector: Connector,
    skill: SkillDescriptor,
    plan: ElicitationPlan,
) -> list[Session]:
    """The staged repetition probe: variety_runs basic loops labelled
    first_use, post_setup, then post_exploration, with an exploration
    dialogue inserted after run two using commands pulled from that run's
    help response.  Skills that never produced a help response skip the
    exploration dialogue."""
    stages = [Stage.FIRST_USE, Stage.POST_SETUP] + [Stage.POST_EXPLORATION] * (
        plan.variety_runs - 2
    )
    sessions: list[Session] = []
    for i, stage in enumerate(stages, start=1):
        session = run_basic_loop(
            connector, skill, plan, stage, probe=Probe.VARIETY_RUN, run_index=i
        )
        sessions.append(session)
        if i == 2:
            help_text = _help_response_text(session)
            if help_text is not None:
                commands = extract_commands(help_text, plan.max_extracted_commands)
                sessions.append(run_exploration(connector, skill, commands, plan))
    return sessions


def run_silence_probe(
    connector: Connector,
    skill: SkillDescriptor,
    plan: ElicitationPlan,
) -> Session:
    """Open the (by now fully explored) skill and answer its prompt with
    silence, recording each re-prompt or its absence, then stop."""
    rec = _SessionRecorder(skill, Probe.SILENCE_PROBE, 1, Stage.POST_EXPLORATION)
    timeout = plan.response_timeout_ms

    handle, event = _open(connector, skill, timeout, Stage.POST_EXPLORATION, rec)
    if event.kind is EventKind.ERROR:
        return rec.session(Termination.CONNECTOR_ERROR)
    if not handle.is_open:
        return rec.session(Termination.AUTO_EXIT)

    for _ in range(plan.silence_count):
        event, elapsed = _timed(
            connector, lambda: connector.wait_silence(handle, timeout), timeout
        )
        rec.record(None, event, elapsed)
        if event.kind is EventKind.ERROR:
            return rec.session(Termination.CONNECTOR_ERROR)
        if event.kind is EventKind.CLOSED:
            return rec.session(Termination.AUTO_EXIT)
        if event.kind is EventKind.SILENCE:
            # The skill said nothing within the window and did not exit.
            continue

    event, elapsed = _timed(
        connector, lambda: connector.say(handle, STOP_COMMAND, timeout), timeout
    )
    rec.record(STOP_COMMAND, event, elapsed)
    if event.kind is EventKind.ERROR:
        return rec.session(Termination.CONNECTOR_ERROR)
    if event.kind is EventKind.CLOSED:
        return rec.session(Termination.EXITED_BY_STOP)
    handle.close()
    return rec.session(Termination.TIMEOUT)


def run_memory_probe(
    connector: Connector,
    skill: SkillDescriptor,
    plan: ElicitationPlan,
) -> Session:
    """One more basic loop after exploration, to see whether the opening
    prompt references the earlier interaction."""
    return run_basic_loop(
        connector,
        skill,
        plan,
        Stage.POST_EXPLORATION,
        probe=Probe.MEMORY_CHECK,
        run_index=1,
    )


def crawl_skill(
    connector: Connector,
    skill: SkillDescriptor,
    plan: ElicitationPlan,
) -> list[Session]:
    """All probes for one skill, in the order that preserves the
    fully-explored precondition: variety, then silence, then memory."""
    sessions = run_variety_probe(connector, skill, plan)
    sessions.append(run_silence_probe(connector, skill, plan))
    sessions.append(run_memory_probe(connector, skill, plan))
    return sessions


@dataclass
class CrawlManifest:
    """What a crawl did: plan parameters, exclusions, oddities."""

    plan: ElicitationPlan
    connector: str = ""
    seed: int | None = None
    skills: list[str] = field(default_factory=list)
    exclusions: dict[str, str] = field(default_factory=dict)
    empty_command_sets: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "plan": self.plan.to_dict(),
            "connector": self.connector,
            "seed": self.seed,
            "skills": list(self.skills),
            "exclusions": dict(self.exclusions),
            "empty_command_sets": list(self.empty_command_sets),
        }


def run_crawl(
    roster: Roster,
    plan: ElicitationPlan,
    connector_factory: Callable[[SkillDescriptor], Connector],
    parallelism: int = 1,
    connector_name: str = "",
    seed: int | None = None,
) -> tuple[list[Session], CrawlManifest]:
    """Crawl every non-excluded skill in the roster.

    A single skill's failure never aborts the crawl: skills whose every
    session ended in a connector error are recorded in the manifest's
    exclusions so downstream aggregation can drop them.
    """
    if not roster.skills:
        raise ValidationError("cannot crawl an empty roster")

    manifest = CrawlManifest(plan=plan, connector=connector_name, seed=seed)
    active = list(roster.active)
    for skill in roster.skills:
        if skill.excluded_reason:
            manifest.exclusions[skill.id] = skill.excluded_reason

    def crawl_one(skill: SkillDescriptor) -> list[Session]:
        connector = connector_factory(skill)
        try:
            return crawl_skill(connector, skill, plan)
        except Exception as exc:  # pragma: no cover - defensive
            manifest.exclusions[skill.id] = f"crawl failed: {exc}"
            return []
        finally:
            connector.shutdown()

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            per_skill = list(pool.map(crawl_one, active))
    else:
        per_skill = [crawl_one(skill) for skill in active]

    corpus: list[Session] = []
    for skill, sessions in zip(active, per_skill):
        manifest.skills.append(skill.id)
        corpus.extend(sessions)
        if sessions and all(
            s.termination is Termination.CONNECTOR_ERROR for s in sessions
        ):
            manifest.exclusions[skill.id] = "connector_error"
        for session in sessions:
            if session.probe is Probe.EXPLORATION and _exploration_is_empty(session):
                manifest.empty_command_sets.append(skill.id)
    return corpus, manifest


def _exploration_is_empty(session: Session) -> bool:
    commands = [
        t for t in session.turns if isinstance(t.command, Utterance)
        and t.command.normalized_text not in (STOP_COMMAND,)
        and not t.command.normalized_text.startswith("open ")
    ]
    return not commands
