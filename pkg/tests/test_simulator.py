"""Simulated skill behaviour and its ground-truth oracle."""

from __future__ import annotations

import io
import json

import pytest

from skillprobe.connectors import EventKind, SessionClosedError
from skillprobe.model import (
    SILENCE,
    GuidelineId,
    Stage,
    ValidationError,
    Verdict,
)
from skillprobe.simulator import (
    COMBO_GRID,
    FALLBACK_REPLY,
    MemoryMode,
    RepromptMode,
    SimConnector,
    SimProfile,
    expected_goodbye_facet,
    generate_profiles,
    ground_truth,
    initial_state,
    load_profiles,
    dump_profiles,
    serve_profiles,
    step,
)

from conftest import make_skill


def make_profile(**overrides) -> SimProfile:
    fields = dict(
        skill=make_skill(0),
        welcome_variants={
            Stage.FIRST_USE: "Welcome to the test skill, pick a task to begin.",
            Stage.POST_SETUP: "Hello again, the test skill is set up and ready.",
            Stage.POST_EXPLORATION: "Welcome back! To continue where you last left off, say ready.",
        },
        help_text="You can say play a round or check my score.",
        goodbye_variants=("Goodbye, thanks for stopping by.", "See you next time."),
        one_shot=False,
        reprompt_mode=RepromptMode.REWORDED,
        reprompt_texts=(
            "You can say help to hear the menu again.",
            "Try saying repeat if you missed the question.",
        ),
        memory_mode=MemoryMode.RESUME_PROMPT,
        memory_markers=("welcome back", "left off"),
        command_responses={"play a round": "Starting a round.", "check my score": "Ten points."},
        rng_seed=0,
    )
    fields.update(overrides)
    return SimProfile(**fields)


def one_shot_profile() -> SimProfile:
    return make_profile(
        welcome_variants={
            Stage.FIRST_USE: "Here is a fact: cats sleep a lot.",
            Stage.POST_SETUP: "Here is a fact: cats sleep a lot!",
            Stage.POST_EXPLORATION: "HERE IS A FACT: cats sleep a lot.",
        },
        help_text=None,
        goodbye_variants=(),
        one_shot=True,
        reprompt_mode=RepromptMode.NONE,
        reprompt_texts=(),
        memory_mode=MemoryMode.NONE,
        command_responses={},
    )


class TestProfileInvariants:
    def test_one_shot_cannot_have_help(self):
        with pytest.raises(ValidationError):
            make_profile(one_shot=True, reprompt_mode=RepromptMode.NONE, reprompt_texts=())

    def test_reworded_needs_two_differing_texts(self):
        with pytest.raises(ValidationError):
            make_profile(reprompt_texts=("same text.", "Same text!"))

    def test_memory_needs_marker_in_late_welcome(self):
        with pytest.raises(ValidationError):
            make_profile(
                welcome_variants={
                    Stage.FIRST_USE: "Welcome one.",
                    Stage.POST_SETUP: "Welcome two.",
                    Stage.POST_EXPLORATION: "Welcome three.",
                }
            )

    def test_profile_json_round_trip(self, tmp_path):
        profile = make_profile()
        path = tmp_path / "profiles.json"
        dump_profiles([profile], path)
        assert load_profiles(path) == [profile]


class TestStep:
    def test_open_uses_signalled_stage(self):
        profile = make_profile()
        event, state = step(profile, initial_state(), "open test skill 0", stage=Stage.POST_EXPLORATION)
        assert event.kind is EventKind.RESPONSE
        assert "continue where you last left off" in event.text.lower()
        assert state.session_open

    def test_open_derives_stage_when_unsignalled(self):
        profile = make_profile()
        event, state = step(profile, initial_state(), "open test skill 0")
        assert "pick a task" in event.text
        event, state = step(profile, state, "stop")
        event, state = step(profile, state, "open test skill 0")
        assert "set up and ready" in event.text.lower()

    def test_stop_always_closes(self):
        profile = make_profile()
        _, state = step(profile, initial_state(), "open test skill 0")
        event, state = step(profile, state, "stop")
        assert event.kind is EventKind.CLOSED
        assert not state.session_open

    def test_goodbyes_cycle_deterministically(self):
        profile = make_profile()
        state = initial_state()
        seen = []
        for _ in range(3):
            _, state = step(profile, state, "open test skill 0")
            event, state = step(profile, state, "stop")
            seen.append(event.detail)
        assert seen[0] != seen[1]
        assert seen[2] == seen[0]  # two variants, cycled

    def test_one_shot_open_closes_with_answer(self):
        profile = one_shot_profile()
        event, state = step(profile, initial_state(), "open test skill 0")
        assert event.kind is EventKind.CLOSED
        assert "cats sleep" in event.detail
        assert not state.session_open

    def test_fixed_reprompt_repeats_itself(self):
        profile = make_profile(
            reprompt_mode=RepromptMode.FIXED,
            reprompt_texts=("Are you still there?",),
            memory_mode=MemoryMode.NONE,
        )
        _, state = step(profile, initial_state(), "open test skill 0")
        first, state = step(profile, state, SILENCE)
        second, state = step(profile, state, SILENCE)
        assert first.text == second.text == "Are you still there?"

    def test_reworded_reprompts_cycle(self):
        profile = make_profile()
        _, state = step(profile, initial_state(), "open test skill 0")
        first, state = step(profile, state, SILENCE)
        second, state = step(profile, state, SILENCE)
        assert first.text != second.text

    def test_silence_with_no_reprompt_closes(self):
        profile = make_profile(
            reprompt_mode=RepromptMode.NONE, reprompt_texts=(), memory_mode=MemoryMode.NONE
        )
        _, state = step(profile, initial_state(), "open test skill 0")
        event, state = step(profile, state, SILENCE)
        assert event.kind is EventKind.CLOSED
        assert not state.session_open

    def test_known_command_explored_unknown_falls_back(self):
        profile = make_profile()
        _, state = step(profile, initial_state(), "open test skill 0")
        event, state = step(profile, state, "Play a Round!")
        assert event.text == "Starting a round."
        assert "play a round" in state.explored_commands
        event, state = step(profile, state, "do a barrel roll")
        assert event.text == FALLBACK_REPLY

    def test_help_without_help_text_falls_back(self):
        profile = make_profile(help_text=None)
        _, state = step(profile, initial_state(), "open test skill 0")
        event, _ = step(profile, state, "help")
        assert event.text == FALLBACK_REPLY

    def test_determinism_same_inputs_same_events(self):
        profile = make_profile()
        script = ["open test skill 0", "help", SILENCE, "play a round", "stop"]

        def run():
            state = initial_state()
            events = []
            for command in script:
                event, state = step(profile, state, command)
                events.append(event)
            return events

        assert run() == run()


class TestGroundTruth:
    def test_fully_featured_profile_all_compliant(self):
        truth = ground_truth(make_profile())
        assert all(v is Verdict.COMPLIANT for v in truth.values())

    def test_one_shot_fact_profile(self):
        truth = ground_truth(one_shot_profile())
        assert truth[GuidelineId.G1] is Verdict.COMPLIANT
        assert truth[GuidelineId.G2] is Verdict.NON_COMPLIANT
        assert truth[GuidelineId.G3] is Verdict.COMPLIANT
        assert truth[GuidelineId.G4] is Verdict.NON_COMPLIANT
        assert truth[GuidelineId.G5] is Verdict.NON_COMPLIANT
        assert truth[GuidelineId.G6] is Verdict.NOT_APPLICABLE
        assert truth[GuidelineId.G7] is Verdict.NON_COMPLIANT
        assert truth[GuidelineId.G8] is Verdict.NON_COMPLIANT
        assert expected_goodbye_facet(one_shot_profile()) is False

    def test_fixed_reprompt_profile(self):
        profile = make_profile(
            reprompt_mode=RepromptMode.FIXED,
            reprompt_texts=("Hello?",),
            memory_mode=MemoryMode.NONE,
        )
        truth = ground_truth(profile)
        assert truth[GuidelineId.G6] is Verdict.COMPLIANT
        assert truth[GuidelineId.G7] is Verdict.NON_COMPLIANT


class TestSimConnector:
    def test_say_after_closed_is_a_precondition_violation(self):
        connector = SimConnector(one_shot_profile())
        handle, event = connector.open_session("test skill 0", 8000)
        assert event.kind is EventKind.CLOSED
        assert not handle.is_open
        with pytest.raises(SessionClosedError):
            connector.say(handle, "help", 8000)

    def test_zero_timeout_wait_is_immediate_silence(self):
        connector = SimConnector(make_profile())
        handle, _ = connector.open_session("test skill 0", 8000)
        event = connector.wait_silence(handle, 0)
        assert event.kind is EventKind.SILENCE

    def test_replay_yields_identical_event_stream(self):
        def run():
            connector = SimConnector(make_profile())
            handle, opened = connector.open_session("test skill 0", 8000, stage=Stage.FIRST_USE)
            events = [opened]
            for command in ("help", "play a round", "stop"):
                events.append(connector.say(handle, command, 8000))
            return events

        assert run() == run()

    def test_noise_hook_touches_outgoing_text(self):
        connector = SimConnector(make_profile(), noise=str.upper)
        _, event = connector.open_session("test skill 0", 8000, stage=Stage.FIRST_USE)
        assert event.text == event.text.upper()


class TestGenerator:
    def test_grid_covers_all_reprompt_memory_combinations(self):
        combos = {(c.reprompt, c.memory) for c in COMBO_GRID}
        assert combos == {(r, m) for r in RepromptMode for m in (False, True)}
        assert len(COMBO_GRID) == 39

    def test_profiles_deterministic_for_seed(self):
        skills = [make_skill(i) for i in range(10)]
        assert generate_profiles(skills, 5) == generate_profiles(skills, 5)
        assert generate_profiles(skills, 5) != generate_profiles(skills, 6)

    def test_generated_profiles_satisfy_invariants(self):
        skills = [make_skill(i) for i in range(len(COMBO_GRID))]
        profiles = generate_profiles(skills, 3)
        one_shots = [p for p in profiles if p.one_shot]
        assert one_shots, "grid must include one-shot profiles"
        assert all(not p.goodbye_variants for p in one_shots)
        assert {p.reprompt_mode for p in profiles} == set(RepromptMode)
        assert {p.memory_mode for p in profiles} == set(MemoryMode)


class TestServeWireProtocol:
    def _serve(self, requests: list[dict | str]) -> list[dict]:
        profile = make_profile()
        stdin = io.StringIO(
            "\n".join(r if isinstance(r, str) else json.dumps(r) for r in requests) + "\n"
        )
        stdout = io.StringIO()
        serve_profiles([profile], stdin, stdout)
        return [json.loads(line) for line in stdout.getvalue().splitlines()]

    def test_one_reply_per_request(self):
        replies = self._serve(
            [
                {"type": "open", "invocation": "test skill 0", "timeout_ms": 1000},
                {"type": "say", "text": "help", "timeout_ms": 1000},
                {"type": "say", "text": "stop", "timeout_ms": 1000},
            ]
        )
        assert len(replies) == 3
        assert replies[0]["type"] == "response"
        assert replies[1]["type"] == "response"
        assert replies[2]["type"] == "closed"

    def test_malformed_line_yields_error_and_continues(self):
        replies = self._serve(
            [
                "this is not json",
                {"type": "open", "invocation": "test skill 0", "timeout_ms": 1000},
            ]
        )
        assert replies[0]["type"] == "error"
        assert replies[1]["type"] == "response"

    def test_unknown_invocation_is_an_error(self):
        replies = self._serve([{"type": "open", "invocation": "nope", "timeout_ms": 5}])
        assert replies[0]["type"] == "error"

    def test_close_ends_the_loop(self):
        replies = self._serve(
            [
                {"type": "close"},
                {"type": "open", "invocation": "test skill 0", "timeout_ms": 5},
            ]
        )
        assert replies == []
