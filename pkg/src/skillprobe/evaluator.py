"""Classify a skill's recorded sessions into guideline verdicts.

Each guideline gets one of four outcomes: compliant, non_compliant,
not_applicable, or inconclusive.  Inconclusive is the honesty valve for
cases a lexicon-and-comparison classifier cannot decide (for example, a
changed opening prompt with no recognizable memory phrasing).  All
comparisons run on normalized text, so verdicts are invariant under case
and punctuation edits to any response.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

from . import config
from .model import (
    GuidelineId,
    GuidelineVerdict,
    Probe,
    Session,
    Termination,
    Turn,
    Utterance,
    ValidationError,
    Verdict,
    iter_skill_slices,
    normalize,
    texts_differ,
    word_count,
)

_LOOP_PROBES = (Probe.BASIC_LOOP, Probe.VARIETY_RUN)
_ENDED = (Termination.EXITED_BY_STOP, Termination.AUTO_EXIT)


@dataclass(frozen=True)
class MarkerLexicon:
    """Phrase lists standing in for the human judgment calls: what counts as
    instructional, and what counts as referencing a previous interaction."""

    instruction_markers: tuple[str, ...]
    memory_markers: tuple[str, ...]
    min_informative_words: int = 5

    def __post_init__(self) -> None:
        if not self.instruction_markers or not self.memory_markers:
            raise ValidationError("lexicon phrase lists must be non-empty")
        if self.min_informative_words < 1:
            raise ValidationError("min_informative_words must be >= 1")

    @classmethod
    def default(cls) -> "MarkerLexicon":
        return cls(
            instruction_markers=config.instruction_markers(),
            memory_markers=config.memory_markers(),
            min_informative_words=config.min_informative_words(),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "MarkerLexicon":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        return cls(
            instruction_markers=tuple(data["instruction_markers"]),
            memory_markers=tuple(data["memory_markers"]),
            min_informative_words=int(data.get("min_informative_words", 5)),
        )

    def has_instruction_marker(self, text: str) -> bool:
        norm = normalize(text)
        return any(normalize(m) in norm for m in self.instruction_markers)

    def memory_marker_hits(self, text: str) -> tuple[str, ...]:
        norm = normalize(text)
        return tuple(m for m in self.memory_markers if normalize(m) in norm)


@dataclass(frozen=True)
class SkillEvaluation:
    skill_id: str
    verdicts: dict[GuidelineId, GuidelineVerdict]
    one_shot: bool = False

    def __post_init__(self) -> None:
        missing = [g.value for g in GuidelineId if g not in self.verdicts]
        if missing:
            raise ValidationError(
                f"evaluation for {self.skill_id} missing verdicts: {', '.join(missing)}"
            )

    def compliant_count(self) -> int:
        return sum(
            1 for v in self.verdicts.values() if v.verdict is Verdict.COMPLIANT
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "skill_id": self.skill_id,
            "one_shot": self.one_shot,
            "verdicts": {g.value: self.verdicts[g].to_dict() for g in GuidelineId},
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SkillEvaluation":
        return cls(
            skill_id=data["skill_id"],
            one_shot=bool(data.get("one_shot", False)),
            verdicts={
                GuidelineId(g): GuidelineVerdict.from_dict(v)
                for g, v in data["verdicts"].items()
            },
        )


# ---------------------------------------------------------------------------
# Session accessors
# ---------------------------------------------------------------------------


def _successful(session: Session) -> bool:
    return session.termination is not Termination.CONNECTOR_ERROR


def _open_response(session: Session) -> Utterance | None:
    if not session.turns:
        return None
    first = session.turns[0]
    if isinstance(first.command, Utterance) and first.command.normalized_text.startswith(
        "open "
    ):
        return first.response
    return None


def _help_turn(session: Session) -> tuple[int, Turn] | None:
    for i, turn in enumerate(session.turns):
        if isinstance(turn.command, Utterance) and turn.command.normalized_text == "help":
            return i, turn
    return None


def _stop_turn(session: Session) -> tuple[int, Turn] | None:
    for i in range(len(session.turns) - 1, -1, -1):
        turn = session.turns[i]
        if isinstance(turn.command, Utterance) and turn.command.normalized_text == "stop":
            return i, turn
    return None


def _reprompt_turns(session: Session) -> list[tuple[int, Turn]]:
    return [(i, t) for i, t in enumerate(session.turns) if t.is_silence]


def _ref(session: Session, turn_index: int) -> tuple[str, int]:
    return (session.key, turn_index)


def _last_ref(session: Session) -> tuple[str, int]:
    return (session.key, max(len(session.turns) - 1, 0))


def _is_one_shot_marker(session: Session) -> bool:
    """A session that closed right after the open response."""
    return session.termination is Termination.AUTO_EXIT and len(session.turns) == 1


# ---------------------------------------------------------------------------
# Guideline evaluators
# ---------------------------------------------------------------------------


def detect_one_shot(sessions: Sequence[Session]) -> bool | None:
    """True when every successful loop closed immediately after the open
    response; None when no loop succeeded at all."""
    succeeded = [s for s in sessions if _successful(s)]
    if not succeeded:
        return None
    return all(_is_one_shot_marker(s) for s in succeeded)


def _inconclusive(guideline: GuidelineId, note: str) -> GuidelineVerdict:
    return GuidelineVerdict(guideline=guideline, verdict=Verdict.INCONCLUSIVE, note=note)


def eval_basic(
    sessions: Sequence[Session], lexicon: MarkerLexicon
) -> dict[GuidelineId, GuidelineVerdict]:
    """G1 (opens and responds), G2 (informative help), G3 (clean exit plus
    the goodbye facet)."""
    succeeded = [s for s in sessions if _successful(s)]
    if not succeeded:
        note = "no session survived the connector"
        return {g: _inconclusive(g, note) for g in (GuidelineId.G1, GuidelineId.G2, GuidelineId.G3)}

    verdicts: dict[GuidelineId, GuidelineVerdict] = {}

    # G1: the open command yields a non-empty response in every run.
    silent_opens = [s for s in succeeded if _open_response(s) is None]
    if silent_opens:
        verdicts[GuidelineId.G1] = GuidelineVerdict(
            guideline=GuidelineId.G1,
            verdict=Verdict.NON_COMPLIANT,
            evidence=tuple(_ref(s, 0) for s in silent_opens),
            note="open command went unanswered",
        )
    else:
        verdicts[GuidelineId.G1] = GuidelineVerdict(
            guideline=GuidelineId.G1,
            verdict=Verdict.COMPLIANT,
            evidence=tuple(_ref(s, 0) for s in succeeded),
        )

    # G2: some help response is non-empty and informative.  Skills that exit
    # before help can be asked fail by definition.
    one_shot = detect_one_shot(sessions)
    if one_shot:
        verdicts[GuidelineId.G2] = GuidelineVerdict(
            guideline=GuidelineId.G2,
            verdict=Verdict.NON_COMPLIANT,
            evidence=tuple(_ref(s, 0) for s in succeeded),
            note="skill exits before help can be asked",
        )
    else:
        help_entries = [
            (s, i, t) for s in succeeded for i, t in [_help_turn(s) or (None, None)] if t
        ]
        informative = [
            (s, i, t)
            for s, i, t in help_entries
            if t.response is not None
            and t.response.normalized_text
            and (
                word_count(t.response.text) >= lexicon.min_informative_words
                or lexicon.has_instruction_marker(t.response.text)
            )
        ]
        if informative:
            s, i, _ = informative[0]
            verdicts[GuidelineId.G2] = GuidelineVerdict(
                guideline=GuidelineId.G2,
                verdict=Verdict.COMPLIANT,
                evidence=(_ref(s, i),),
            )
        elif help_entries:
            verdicts[GuidelineId.G2] = GuidelineVerdict(
                guideline=GuidelineId.G2,
                verdict=Verdict.NON_COMPLIANT,
                evidence=tuple(_ref(s, i) for s, i, _ in help_entries),
                note="help never produced an informative reply",
            )
        else:
            verdicts[GuidelineId.G2] = GuidelineVerdict(
                guideline=GuidelineId.G2,
                verdict=Verdict.NON_COMPLIANT,
                evidence=tuple(_last_ref(s) for s in succeeded),
                note="no help exchange was recorded",
            )

    # G3: every run ended via stop or a clean self-exit.
    lingering = [s for s in succeeded if s.termination not in _ENDED]
    goodbye_present = any(
        t.response is not None and t.response.normalized_text
        for s in succeeded
        for _, t in [_stop_turn(s) or (None, None)]
        if t is not None
    )
    if lingering:
        verdicts[GuidelineId.G3] = GuidelineVerdict(
            guideline=GuidelineId.G3,
            verdict=Verdict.NON_COMPLIANT,
            facets={"goodbye_present": goodbye_present},
            evidence=tuple(_last_ref(s) for s in lingering),
            note="session stayed open after stop",
        )
    else:
        verdicts[GuidelineId.G3] = GuidelineVerdict(
            guideline=GuidelineId.G3,
            verdict=Verdict.COMPLIANT,
            facets={"goodbye_present": goodbye_present},
            evidence=tuple(_last_ref(s) for s in succeeded),
        )
    return verdicts


def eval_variety(sessions: Sequence[Session]) -> dict[GuidelineId, GuidelineVerdict]:
    """G4 over open responses, G5 over stop goodbyes, pairwise across runs."""
    succeeded = [s for s in sessions if _successful(s)]
    verdicts: dict[GuidelineId, GuidelineVerdict] = {}

    opens = [(s, r) for s in succeeded for r in [_open_response(s)] if r is not None]
    verdicts[GuidelineId.G4] = _pairwise_verdict(
        GuidelineId.G4,
        [(s, 0, r.text) for s, r in opens],
        too_few_note="fewer than two open responses to compare",
    )

    comparable: list[tuple[Session, int, str]] = []
    for s in succeeded:
        if s.termination not in _ENDED:
            continue
        stop = _stop_turn(s)
        if stop is not None:
            i, turn = stop
            text = turn.response.text if turn.response is not None else ""
            comparable.append((s, i, text))
        else:
            # Self-exited before stop could be said: no goodbye to vary.
            comparable.append((s, max(len(s.turns) - 1, 0), ""))
    verdicts[GuidelineId.G5] = _pairwise_verdict(
        GuidelineId.G5,
        comparable,
        too_few_note="fewer than two stop responses to compare",
    )
    return verdicts


def _pairwise_verdict(
    guideline: GuidelineId,
    entries: list[tuple[Session, int, str]],
    too_few_note: str,
) -> GuidelineVerdict:
    if len(entries) < 2:
        return _inconclusive(guideline, too_few_note)
    for i, (s_a, idx_a, text_a) in enumerate(entries):
        for s_b, idx_b, text_b in entries[i + 1 :]:
            if texts_differ(text_a, text_b):
                return GuidelineVerdict(
                    guideline=guideline,
                    verdict=Verdict.COMPLIANT,
                    evidence=(_ref(s_a, idx_a), _ref(s_b, idx_b)),
                )
    return GuidelineVerdict(
        guideline=guideline,
        verdict=Verdict.NON_COMPLIANT,
        evidence=tuple(_ref(s, i) for s, i, _ in entries),
        note="all runs matched after normalization",
    )


def eval_error_handling(
    silence_session: Session | None,
    first_open_response: Utterance | None,
    lexicon: MarkerLexicon,
) -> dict[GuidelineId, GuidelineVerdict]:
    """G6 (re-prompts after silence), G7 (the re-prompt is a rewording or an
    elaboration).  One-shot skills have nothing to re-prompt: G6 is not
    applicable and G7 fails."""
    if silence_session is None or not _successful(silence_session):
        note = "silence probe did not complete"
        return {
            GuidelineId.G6: _inconclusive(GuidelineId.G6, note),
            GuidelineId.G7: _inconclusive(GuidelineId.G7, note),
        }

    if _is_one_shot_marker(silence_session):
        return {
            GuidelineId.G6: GuidelineVerdict(
                guideline=GuidelineId.G6,
                verdict=Verdict.NOT_APPLICABLE,
                note="skill exited before silence could be probed",
            ),
            GuidelineId.G7: GuidelineVerdict(
                guideline=GuidelineId.G7,
                verdict=Verdict.NON_COMPLIANT,
                evidence=(_ref(silence_session, 0),),
                note="no re-prompt exists to reword",
            ),
        }

    silence_turns = _reprompt_turns(silence_session)
    reprompts = [(i, t.response) for i, t in silence_turns if t.response is not None]
    if not reprompts:
        evidence = tuple(_ref(silence_session, i) for i, _ in silence_turns) or (
            _last_ref(silence_session),
        )
        return {
            GuidelineId.G6: GuidelineVerdict(
                guideline=GuidelineId.G6,
                verdict=Verdict.NON_COMPLIANT,
                evidence=evidence,
                note="silence drew no re-prompt",
            ),
            GuidelineId.G7: GuidelineVerdict(
                guideline=GuidelineId.G7,
                verdict=Verdict.NON_COMPLIANT,
                evidence=evidence,
                note="no re-prompt exists to reword",
            ),
        }

    g6 = GuidelineVerdict(
        guideline=GuidelineId.G6,
        verdict=Verdict.COMPLIANT,
        evidence=tuple(_ref(silence_session, i) for i, _ in reprompts),
    )

    opening = _open_response(silence_session)
    if opening is not None:
        opening_text = opening.text
    elif first_open_response is not None:
        opening_text = first_open_response.text
    else:
        opening_text = ""

    g7 = None
    prior: list[str] = []
    for i, reprompt in reprompts:
        text = reprompt.text
        reworded = texts_differ(text, opening_text) and (
            any(texts_differ(text, p) for p in prior)
            or lexicon.has_instruction_marker(text)
            or word_count(text) > word_count(opening_text)
        )
        if reworded:
            g7 = GuidelineVerdict(
                guideline=GuidelineId.G7,
                verdict=Verdict.COMPLIANT,
                evidence=(_ref(silence_session, i), _ref(silence_session, 0)),
            )
            break
        prior.append(text)
    if g7 is None:
        g7 = GuidelineVerdict(
            guideline=GuidelineId.G7,
            verdict=Verdict.NON_COMPLIANT,
            evidence=tuple(_ref(silence_session, i) for i, _ in reprompts),
            note="re-prompts repeat the prompt without rewording",
        )
    return {GuidelineId.G6: g6, GuidelineId.G7: g7}


def eval_memory(
    first_session: Session | None,
    memory_session: Session | None,
    lexicon: MarkerLexicon,
) -> GuidelineVerdict:
    """G8: the later opening references the earlier interaction.

    Compliant needs both a changed opening and a memory-flavoured phrase
    that was absent the first time; a changed opening alone is flagged
    inconclusive rather than guessed at.
    """
    if (
        first_session is None
        or memory_session is None
        or not _successful(first_session)
        or not _successful(memory_session)
    ):
        return _inconclusive(GuidelineId.G8, "memory check needs both loops")
    first_open = _open_response(first_session)
    later_open = _open_response(memory_session)
    if first_open is None or later_open is None:
        return _inconclusive(GuidelineId.G8, "missing an opening response to compare")

    refs = (_ref(first_session, 0), _ref(memory_session, 0))
    if not texts_differ(first_open.text, later_open.text):
        return GuidelineVerdict(
            guideline=GuidelineId.G8,
            verdict=Verdict.NON_COMPLIANT,
            evidence=refs,
            note="opening did not change after exploration",
        )
    first_hits = set(lexicon.memory_marker_hits(first_open.text))
    new_hits = [m for m in lexicon.memory_marker_hits(later_open.text) if m not in first_hits]
    if new_hits:
        return GuidelineVerdict(
            guideline=GuidelineId.G8,
            verdict=Verdict.COMPLIANT,
            evidence=refs,
            note=f"memory phrasing: {new_hits[0]!r}",
        )
    return _inconclusive(
        GuidelineId.G8, "opening changed but no memory phrasing matched the lexicon"
    )


# ---------------------------------------------------------------------------
# Composition
# ---------------------------------------------------------------------------


def evaluate_skill(
    sessions: Sequence[Session], lexicon: MarkerLexicon | None = None
) -> SkillEvaluation:
    """Classify one skill's full corpus slice into all eight verdicts."""
    if not sessions:
        raise ValidationError("evaluate_skill needs at least one session")
    if lexicon is None:
        lexicon = MarkerLexicon.default()
    skill_id = sessions[0].skill_id
    if any(s.skill_id != skill_id for s in sessions):
        raise ValidationError("evaluate_skill got sessions from multiple skills")

    loops = sorted(
        (s for s in sessions if s.probe in _LOOP_PROBES),
        key=lambda s: s.run_index,
    )
    silence_session = next((s for s in sessions if s.probe is Probe.SILENCE_PROBE), None)
    memory_session = next((s for s in sessions if s.probe is Probe.MEMORY_CHECK), None)
    first_session = loops[0] if loops else None

    verdicts: dict[GuidelineId, GuidelineVerdict] = {}
    verdicts.update(eval_basic(loops, lexicon))
    verdicts.update(eval_variety(loops))
    verdicts.update(
        eval_error_handling(
            silence_session,
            _open_response(first_session) if first_session else None,
            lexicon,
        )
    )
    verdicts[GuidelineId.G8] = eval_memory(first_session, memory_session, lexicon)

    return SkillEvaluation(
        skill_id=skill_id,
        verdicts=verdicts,
        one_shot=bool(detect_one_shot(loops)),
    )


def evaluate_corpus(
    sessions: Iterable[Session],
    lexicon: MarkerLexicon | None = None,
    skip_skills: set[str] | None = None,
) -> list[SkillEvaluation]:
    """Evaluate every skill appearing in a corpus, in first-seen order."""
    if lexicon is None:
        lexicon = MarkerLexicon.default()
    evaluations = []
    for skill_id, slice_ in iter_skill_slices(sessions):
        if skip_skills and skill_id in skip_skills:
            continue
        evaluations.append(evaluate_skill(slice_, lexicon))
    return evaluations


def dump_evaluations(evaluations: Iterable[SkillEvaluation], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([e.to_dict() for e in evaluations], fh, indent=2, sort_keys=False)
        fh.write("\n")


def load_evaluations(path: str | Path) -> list[SkillEvaluation]:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise ValidationError(f"{path}: evaluations file must be a JSON array")
    return [SkillEvaluation.from_dict(entry) for entry in data]
