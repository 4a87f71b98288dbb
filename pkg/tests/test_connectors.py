"""Adapter connector: wire-protocol client behaviour against real
subprocesses, including hostile ones."""

from __future__ import annotations

import json
import sys
import textwrap

import pytest

from skillprobe.connectors import AdapterConnector, EventKind, SessionClosedError
from skillprobe.model import Stage
from skillprobe.simulator import dump_profiles

from test_simulator import make_profile


@pytest.fixture
def served_profile(tmp_path):
    profile = make_profile()
    path = tmp_path / "profiles.json"
    dump_profiles([profile], path)
    return profile, [sys.executable, "-m", "skillprobe", "simulate", "--profiles", str(path), "--serve"]


def test_loopback_session_against_simulate_serve(served_profile):
    profile, command = served_profile
    connector = AdapterConnector(command)
    try:
        handle, opened = connector.open_session("test skill 0", 4000)
        assert opened.kind is EventKind.RESPONSE
        assert handle.is_open
        helped = connector.say(handle, "help", 4000)
        assert helped.kind is EventKind.RESPONSE
        assert helped.text == profile.help_text
        reprompt = connector.wait_silence(handle, 4000)
        assert reprompt.kind is EventKind.RESPONSE
        stopped = connector.say(handle, "stop", 4000)
        assert stopped.kind is EventKind.CLOSED
        assert stopped.detail in profile.goodbye_variants
        assert not handle.is_open
    finally:
        connector.shutdown()


def test_lineage_persists_across_sessions(served_profile):
    """A second open on the same adapter process sees post-first-use state."""
    profile, command = served_profile
    connector = AdapterConnector(command)
    try:
        handle, first = connector.open_session("test skill 0", 4000)
        connector.say(handle, "stop", 4000)
        handle, second = connector.open_session("test skill 0", 4000)
        connector.say(handle, "stop", 4000)
        assert first.text != second.text  # first_use vs post_setup welcome
    finally:
        connector.shutdown()


def test_say_on_closed_handle_raises(served_profile):
    _, command = served_profile
    connector = AdapterConnector(command)
    try:
        handle, _ = connector.open_session("test skill 0", 4000)
        connector.say(handle, "stop", 4000)
        with pytest.raises(SessionClosedError):
            connector.say(handle, "anything", 4000)
    finally:
        connector.shutdown()


def _rogue_adapter(tmp_path, body: str) -> list[str]:
    script = tmp_path / "rogue.py"
    script.write_text(
        textwrap.dedent(
            """
            import sys
            for line in sys.stdin:
            """
        ).strip()
        + "\n"
        + textwrap.indent(textwrap.dedent(body).strip(), "    ")
        + "\n"
    )
    return [sys.executable, str(script)]


def test_unreachable_adapter_is_an_error_event(tmp_path):
    connector = AdapterConnector([str(tmp_path / "does-not-exist")])
    handle, event = connector.open_session("x", 500)
    assert event.kind is EventKind.ERROR
    assert not handle.is_open
    connector.shutdown()


def test_garbage_reply_lines_become_error_events(tmp_path):
    command = _rogue_adapter(tmp_path, 'print("{[ not json", flush=True)')
    connector = AdapterConnector(command)
    try:
        _, event = connector.open_session("x", 500)
        assert event.kind is EventKind.ERROR
        assert "malformed" in (event.detail or "")
    finally:
        connector.shutdown()


def test_unknown_reply_type_becomes_error_event(tmp_path):
    command = _rogue_adapter(tmp_path, 'print(\'{"type":"banana"}\', flush=True)')
    connector = AdapterConnector(command)
    try:
        _, event = connector.open_session("x", 500)
        assert event.kind is EventKind.ERROR
    finally:
        connector.shutdown()


def test_mute_adapter_times_out_instead_of_deadlocking(tmp_path):
    command = _rogue_adapter(tmp_path, "pass")
    connector = AdapterConnector(command, reply_grace_ms=300)
    try:
        _, event = connector.open_session("x", 100)
        assert event.kind is EventKind.ERROR
        assert "timed out" in (event.detail or "")
    finally:
        connector.shutdown()


def test_adapter_exit_mid_conversation(tmp_path):
    command = _rogue_adapter(
        tmp_path,
        """
        print('{"type":"response","text":"hi","confidence":1.0}', flush=True)
        break
        """,
    )
    connector = AdapterConnector(command, reply_grace_ms=300)
    try:
        handle, opened = connector.open_session("x", 200)
        assert opened.kind is EventKind.RESPONSE
        event = connector.say(handle, "help", 200)
        assert event.kind is EventKind.ERROR
    finally:
        connector.shutdown()


def test_wire_requests_match_protocol_shapes(tmp_path):
    """Echo adapter: verifies the client writes exactly the documented
    request objects, one per line."""
    log = tmp_path / "requests.log"
    command = _rogue_adapter(
        tmp_path,
        f"""
        with open({str(log)!r}, "a") as fh:
            fh.write(line)
        print('{{"type":"silence"}}', flush=True)
        """,
    )
    connector = AdapterConnector(command)
    handle, _ = connector.open_session("demo skill", 250, stage=Stage.FIRST_USE)
    connector.say(handle, "help", 250)
    connector.wait_silence(handle, 250)
    connector.shutdown()

    requests = [json.loads(l) for l in log.read_text().splitlines()]
    assert requests == [
        {"type": "open", "invocation": "demo skill", "timeout_ms": 250},
        {"type": "say", "text": "help", "timeout_ms": 250},
        {"type": "wait", "timeout_ms": 250},
        {"type": "close"},
    ]
