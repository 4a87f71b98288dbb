"""Cross-connector acceptance: a scripted adapter replaying a recorded
crawl must be indistinguishable, verdict for verdict, from the in-process
connector it was recorded from; and no amount of protocol garbage may
deadlock either side.

The harness is exercised purely through its public surfaces (CLI, corpus
JSONL, verdict JSON, wire protocol).
"""

from __future__ import annotations

import json
import subprocess

import pytest

from conftest import PYTHON, run_cli, write_roster

N_SKILLS = 8  # behaviourally diverse: the profile generator cycles its grid


@pytest.fixture(scope="module")
def recorded_crawl(tmp_path_factory):
    """Sim-connector crawl, its verdicts, and replay scripts for each skill."""
    root = tmp_path_factory.mktemp("equivalence")
    roster = root / "roster.csv"
    write_roster(roster, N_SKILLS)

    corpus_sim = root / "corpus_sim.jsonl"
    verdicts_sim = root / "verdicts_sim.json"
    crawl = run_cli(
        "skillprobe", "crawl",
        "--roster", roster,
        "--connector", "sim",
        "--seed", "23",
        "--out", corpus_sim,
    )
    assert crawl.returncode == 0, crawl.stderr
    evaluate = run_cli("skillprobe", "evaluate", "--corpus", corpus_sim, "--out", verdicts_sim)
    assert evaluate.returncode == 0, evaluate.stderr

    scripts = root / "scripts"
    record = run_cli(
        "transcript_adapter", "record", "--corpus", corpus_sim, "--out-dir", scripts
    )
    assert record.returncode == 0, record.stderr
    return root, roster, corpus_sim, verdicts_sim, scripts


def test_recorded_scripts_cover_every_skill(recorded_crawl):
    _, _, _, _, scripts = recorded_crawl
    assert len(list(scripts.glob("*.json"))) == N_SKILLS


def test_adapter_replay_reproduces_verdicts(recorded_crawl):
    """The acceptance gate: >= 5 profiles crawled through the adapter client
    yield verdicts identical to the in-process connector."""
    root, roster, _, verdicts_sim, scripts = recorded_crawl
    corpus_adapter = root / "corpus_adapter.jsonl"
    verdicts_adapter = root / "verdicts_adapter.json"

    adapter_cmd = f"adapter:{PYTHON} -m transcript_adapter serve --script {scripts}/{{skill_id}}.json"
    crawl = run_cli(
        "skillprobe", "crawl",
        "--roster", roster,
        "--connector", adapter_cmd,
        "--out", corpus_adapter,
        timeout=300,
    )
    assert crawl.returncode == 0, crawl.stderr
    evaluate = run_cli(
        "skillprobe", "evaluate", "--corpus", corpus_adapter, "--out", verdicts_adapter
    )
    assert evaluate.returncode == 0, evaluate.stderr

    sim = json.loads(verdicts_sim.read_text())
    adapter = json.loads(verdicts_adapter.read_text())
    assert len(sim) >= 5
    assert adapter == sim
    print(f"ACCEPTANCE cross-connector-equivalence: PASS ({len(sim)} skills)")


def test_adapter_corpus_matches_recorded_conversation(recorded_crawl):
    """Replay reproduces the same utterances, not merely the same verdicts."""
    root, _, corpus_sim, _, _ = recorded_crawl
    corpus_adapter = root / "corpus_adapter.jsonl"

    def texts(path):
        out = []
        for line in path.read_text().splitlines():
            session = json.loads(line)
            out.append(
                [
                    (turn.get("response") or {}).get("text")
                    if isinstance(turn.get("response"), dict)
                    else None
                    for turn in session["turns"]
                ]
            )
        return out

    assert texts(corpus_adapter) == texts(corpus_sim)


def test_garbage_spewing_adapter_never_deadlocks_the_harness(tmp_path):
    """Malformed reply lines surface as connector errors; the crawl always
    terminates."""
    roster = tmp_path / "roster.csv"
    write_roster(roster, 1)
    rogue = tmp_path / "rogue.py"
    rogue.write_text(
        "import sys\n"
        "for line in sys.stdin:\n"
        "    print('%%% not json %%%', flush=True)\n"
    )
    corpus = tmp_path / "corpus.jsonl"
    crawl = run_cli(
        "skillprobe", "crawl",
        "--roster", roster,
        "--connector", f"adapter:{PYTHON} {rogue}",
        "--out", corpus,
        "--timeout-ms", "200",
        timeout=120,
    )
    assert crawl.returncode == 3  # nothing crawlable, and it said so promptly
    sessions = [json.loads(line) for line in corpus.read_text().splitlines()]
    assert sessions
    assert all(s["termination"] == "connector_error" for s in sessions)


def test_fuzzed_requests_always_draw_error_replies(tmp_path):
    """Malformed request lines into the adapter get one error reply each and
    never wedge or kill the process."""
    script = tmp_path / "script.json"
    script.write_text(
        json.dumps(
            {
                "invocation_name": "demo",
                "entries": [
                    {"pattern": "open demo", "reply": {"type": "response", "text": "hi", "confidence": 1.0}}
                ],
                "default_reply": {"type": "silence"},
            }
        )
    )
    fuzz_lines = [
        "",
        "{",
        "[]",
        '"just a string"',
        '{"type": 42}',
        '{"no_type": "here"}',
        '{"type":"say"}',
        "\x00\x01\x02",
        '{"type":"open","invocation":"demo","timeout_ms":5}',
        '{"type":"close"}',
    ]
    proc = subprocess.run(
        [PYTHON, "-m", "transcript_adapter", "serve", "--script", str(script)],
        input="\n".join(fuzz_lines) + "\n",
        capture_output=True,
        text=True,
        timeout=60,
    )
    assert proc.returncode == 0
    replies = [json.loads(line) for line in proc.stdout.splitlines()]
    # Every non-empty line before close drew exactly one reply.
    assert len(replies) == 8
    assert [r["type"] for r in replies[:-1]] == ["error"] * 7
    assert replies[-1]["type"] == "response"
