"""transcript-adapter command line.

    serve  --script FILE            speak the protocol on stdin/stdout
    record --corpus FILE --out-dir D   write one replay script per skill
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .script import (
    ScriptError,
    corpus_skill_ids,
    dump_script,
    load_script,
    script_from_corpus,
)
from .serve import serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="transcript-adapter", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    serve_cmd = sub.add_parser("serve", help="replay a script over the wire protocol")
    serve_cmd.add_argument("--script", required=True)

    record = sub.add_parser("record", help="convert a session corpus into replay scripts")
    record.add_argument("--corpus", required=True)
    record.add_argument("--out-dir", required=True)
    record.add_argument("--skill", default=None, help="only this skill (default: all)")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            return serve(load_script(args.script), sys.stdin, sys.stdout)
        if args.command == "record":
            out_dir = Path(args.out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            skills = [args.skill] if args.skill else corpus_skill_ids(args.corpus)
            for skill_id in skills:
                script = script_from_corpus(args.corpus, skill_id)
                dump_script(script, out_dir / f"{skill_id}.json")
            print(f"recorded {len(skills)} scripts -> {out_dir}")
            return 0
    except (ScriptError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
