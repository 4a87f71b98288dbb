"""Command-line pipeline: crawl, evaluate, report, or everything at once.

Exit codes: 0 success, 1 usage error, 2 input validation error,
3 connector failure threshold exceeded (no skill could be crawled).
"""

from __future__ import annotations

import argparse
import json
import shlex
import sys
from pathlib import Path

from . import config
from .connectors import AdapterConnector, Connector
from .crawler import CrawlManifest, ElicitationPlan, run_crawl
from .evaluator import MarkerLexicon, dump_evaluations, evaluate_corpus, load_evaluations
from .ingestion import Roster, load_roster
from .model import SkillDescriptor, ValidationError, dump_sessions, load_sessions
from .reporting import build_report, emit_report
from .simulator import dump_profiles, generate_profiles, load_profiles, serve_profiles

USAGE_ERROR = 1
INPUT_ERROR = 2
CONNECTOR_ERROR = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # noqa: A003 - argparse API
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


class ConnectorThresholdError(RuntimeError):
    pass


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="deterministic seed")
    parser.add_argument("--parallelism", type=int, default=1, help="concurrent skills")
    parser.add_argument(
        "--timeout-ms",
        type=int,
        default=None,
        help="response timeout override (default from config)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="skillprobe", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    crawl = sub.add_parser("crawl", help="record conversation sessions for a roster")
    crawl.add_argument("--roster", required=True)
    crawl.add_argument("--roster-format", choices=("csv", "json"), default=None)
    crawl.add_argument("--connector", default="sim", help='"sim" or "adapter:CMD"')
    crawl.add_argument("--profiles", default=None, help="simulated profiles JSON")
    crawl.add_argument("--plan", default=None, help="elicitation plan JSON")
    crawl.add_argument("--out", required=True, help="corpus JSONL path")
    crawl.add_argument("--manifest", default=None, help="crawl manifest JSON path")
    _common_flags(crawl)

    evaluate = sub.add_parser("evaluate", help="classify a corpus into verdicts")
    evaluate.add_argument("--corpus", required=True)
    evaluate.add_argument("--lexicon", default=None, help="marker lexicon JSON")
    evaluate.add_argument("--manifest", default=None, help="skip skills excluded there")
    evaluate.add_argument("--out", required=True)
    _common_flags(evaluate)

    report = sub.add_parser("report", help="aggregate verdicts into the two analyses")
    report.add_argument("--verdicts", required=True)
    report.add_argument("--roster", required=True)
    report.add_argument("--roster-format", choices=("csv", "json"), default=None)
    report.add_argument("--format", choices=("json", "csv", "markdown"), default="json")
    report.add_argument("--out", default=None, help="output path (default stdout)")
    _common_flags(report)

    simulate = sub.add_parser(
        "simulate", help="expose simulated profiles over the adapter wire protocol"
    )
    simulate.add_argument("--profiles", required=True)
    simulate.add_argument("--serve", action="store_true", required=True)
    _common_flags(simulate)

    pipeline = sub.add_parser("pipeline", help="crawl + evaluate + report in one go")
    pipeline.add_argument("--roster", required=True)
    pipeline.add_argument("--roster-format", choices=("csv", "json"), default=None)
    pipeline.add_argument("--connector", default="sim")
    pipeline.add_argument("--profiles", default=None)
    pipeline.add_argument("--plan", default=None)
    pipeline.add_argument("--lexicon", default=None)
    pipeline.add_argument("--out-dir", required=True)
    _common_flags(pipeline)

    return parser


def _load_plan(path: str | None, timeout_ms: int | None) -> ElicitationPlan:
    if path:
        with open(path, "r", encoding="utf-8") as fh:
            plan = ElicitationPlan.from_dict(json.load(fh))
    else:
        plan = ElicitationPlan(response_timeout_ms=config.default_timeout_ms())
    if timeout_ms is not None:
        plan = ElicitationPlan(
            variety_runs=plan.variety_runs,
            silence_count=plan.silence_count,
            response_timeout_ms=timeout_ms,
            max_extracted_commands=plan.max_extracted_commands,
        )
    return plan


def _make_factory(args: argparse.Namespace, roster: Roster):
    """Connector factory plus the profiles actually in play (sim only)."""
    spec = args.connector
    if spec == "sim":
        if args.profiles:
            profiles = load_profiles(args.profiles)
        else:
            profiles = generate_profiles(roster.active, args.seed)
        by_id = {p.skill.id: p for p in profiles}
        missing = [s.id for s in roster.active if s.id not in by_id]
        if missing:
            raise ValidationError(f"no profile for skills: {', '.join(missing)}")
        from .simulator import SimConnector

        def factory(skill: SkillDescriptor) -> Connector:
            return SimConnector(by_id[skill.id])

        return factory, profiles
    if spec.startswith("adapter:"):
        template = spec[len("adapter:") :]
        if not template.strip():
            raise ValidationError("adapter connector needs a command")

        def factory(skill: SkillDescriptor) -> Connector:
            command = [
                part.format(skill_id=skill.id, invocation_name=skill.invocation_name)
                for part in shlex.split(template)
            ]
            return AdapterConnector(command)

        return factory, None
    raise ValidationError(f'unknown connector: {spec!r} (use "sim" or "adapter:CMD")')


def _write_manifest(manifest: CrawlManifest, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest.to_dict(), fh, indent=2, sort_keys=False)
        fh.write("\n")


def _check_threshold(roster: Roster, manifest: CrawlManifest) -> None:
    crawled = [s for s in roster.active]
    if crawled and all(s.id in manifest.exclusions for s in crawled):
        raise ConnectorThresholdError("every skill failed at the connector")


def _cmd_crawl(args: argparse.Namespace) -> int:
    roster = load_roster(args.roster, args.roster_format)
    plan = _load_plan(args.plan, args.timeout_ms)
    factory, _ = _make_factory(args, roster)
    sessions, manifest = run_crawl(
        roster,
        plan,
        factory,
        parallelism=max(1, args.parallelism),
        connector_name=args.connector,
        seed=args.seed,
    )
    dump_sessions(sessions, args.out)
    if args.manifest:
        _write_manifest(manifest, Path(args.manifest))
    _check_threshold(roster, manifest)
    print(f"crawled {len(manifest.skills)} skills, {len(sessions)} sessions -> {args.out}")
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    sessions = load_sessions(args.corpus)
    lexicon = MarkerLexicon.from_file(args.lexicon) if args.lexicon else MarkerLexicon.default()
    skip: set[str] = set()
    if args.manifest:
        with open(args.manifest, "r", encoding="utf-8") as fh:
            skip = set(json.load(fh).get("exclusions", {}))
    evaluations = evaluate_corpus(sessions, lexicon, skip_skills=skip)
    dump_evaluations(evaluations, args.out)
    print(f"evaluated {len(evaluations)} skills -> {args.out}")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    evaluations = load_evaluations(args.verdicts)
    roster = load_roster(args.roster, args.roster_format)
    report = build_report(evaluations, roster)
    blob = emit_report(report, args.format)
    if args.out:
        Path(args.out).write_bytes(blob)
        print(f"report -> {args.out}")
    else:
        sys.stdout.write(blob.decode("utf-8"))
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    profiles = load_profiles(args.profiles)
    serve_profiles(profiles, sys.stdin, sys.stdout)
    return 0


def _cmd_pipeline(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    roster = load_roster(args.roster, args.roster_format)
    plan = _load_plan(args.plan, args.timeout_ms)
    factory, profiles = _make_factory(args, roster)

    sessions, manifest = run_crawl(
        roster,
        plan,
        factory,
        parallelism=max(1, args.parallelism),
        connector_name=args.connector,
        seed=args.seed,
    )
    dump_sessions(sessions, out_dir / "corpus.jsonl")
    _write_manifest(manifest, out_dir / "manifest.json")
    if profiles is not None:
        dump_profiles(profiles, out_dir / "profiles.json")

    lexicon = MarkerLexicon.from_file(args.lexicon) if args.lexicon else MarkerLexicon.default()
    evaluations = evaluate_corpus(sessions, lexicon, skip_skills=set(manifest.exclusions))
    dump_evaluations(evaluations, out_dir / "verdicts.json")

    if evaluations:
        report = build_report(evaluations, roster)
        for fmt, name in (("json", "report.json"), ("csv", "report.csv"), ("markdown", "report.md")):
            (out_dir / name).write_bytes(emit_report(report, fmt))
    _check_threshold(roster, manifest)
    print(
        f"pipeline complete: {len(manifest.skills)} skills, {len(sessions)} sessions, "
        f"{len(evaluations)} evaluations -> {out_dir}"
    )
    return 0


_COMMANDS = {
    "crawl": _cmd_crawl,
    "evaluate": _cmd_evaluate,
    "report": _cmd_report,
    "simulate": _cmd_simulate,
    "pipeline": _cmd_pipeline,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_ERROR
    try:
        return _COMMANDS[args.command](args)
    except ConnectorThresholdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CONNECTOR_ERROR
    except (ValidationError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INPUT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
