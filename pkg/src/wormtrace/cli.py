"""Command-line entry point.

    wormtrace analyze <dir|file>... [--ruleset FILE] [--strict] [--json OUT] [--dot OUT]
    wormtrace generate A|B|C|random --out DIR [--seed N] [--hosts N --attacks N]
    wormtrace rules print

Exit codes: 0 analysis ran, 1 usage or ruleset error, 2 unreadable corpus or
strict-mode parse failure. Findings never change the exit code.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import (CorpusReadError, InvalidParams, InvalidSpec, MissingCategory, ParseError,
                     RuleSetError)
from .patterns import default_ruleset_text
from .report import report_dot, report_json, report_text, run_analysis
from .scenario import builtin_scenario, generate_logs, random_scenario

EXIT_OK, EXIT_USAGE, EXIT_CORPUS = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write(target: str, data: bytes):
    if target == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        Path(target).write_bytes(data)


def cmd_analyze(args) -> int:
    for p in args.paths:
        if not Path(p).exists():
            print(f"error: no such file or directory: {p}", file=sys.stderr)
            return EXIT_CORPUS
    try:
        report = run_analysis(args.paths, args.ruleset, strict=args.strict)
    except (RuleSetError, MissingCategory) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:  # ruleset file unreadable
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CorpusReadError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CORPUS
    if args.json:
        _write(args.json, report_json(report))
    if args.dot:
        _write(args.dot, report_dot(report))
    if "-" not in (args.json, args.dot):
        print(report_text(report))
    return EXIT_OK


def cmd_generate(args) -> int:
    try:
        if args.scenario == "random":
            spec = random_scenario(args.hosts, args.attacks, args.seed)
        else:
            spec = builtin_scenario(args.scenario, args.seed)
        manifest = generate_logs(spec, args.out)
    except (InvalidParams, InvalidSpec) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    expected = manifest["expected"]["classifications"]
    print(f"wrote {len(manifest['files'])} log files and manifest.json to {args.out}")
    for ip, v in sorted(expected.items()):
        print(f"  {ip:<16} {v['name'] or '-':<12} {v['role']:<17} {'-' if v['level'] is None else v['level']}")
    return EXIT_OK


def cmd_rules(args) -> int:
    sys.stdout.write(default_ruleset_text().decode("utf-8"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wormtrace", description="Sasser worm trace correlation")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", help="classify hosts and rebuild the attack chain")
    a.add_argument("paths", nargs="+", help="log directory or files")
    a.add_argument("--ruleset", help="ruleset file (default: $WORMTRACE_RULESET or built-in)")
    a.add_argument("--strict", action="store_true", help="abort on the first malformed line")
    a.add_argument("--json", metavar="OUT", help="write the JSON report ('-' for stdout)")
    a.add_argument("--dot", metavar="OUT", help="write the DOT graph ('-' for stdout)")
    a.set_defaults(func=cmd_analyze)

    g = sub.add_parser("generate", help="write a synthetic scenario corpus")
    g.add_argument("scenario", choices=["A", "B", "C", "random"])
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--hosts", type=int, default=6)
    g.add_argument("--attacks", type=int, default=8)
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("rules", help="ruleset utilities")
    rsub = r.add_subparsers(dest="rules_command", required=True, parser_class=_Parser)
    rp = rsub.add_parser("print", help="dump the built-in ruleset")
    rp.set_defaults(func=cmd_rules)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
