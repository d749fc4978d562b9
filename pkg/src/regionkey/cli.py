"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 scenario error, 3 verification
failure.  Machine-readable output (reports, CSV, scenario lines) goes to
stdout or ``--out``; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import logging
import random
import shlex
import sys
from pathlib import Path

from . import bench, simnet, worked_examples
from .ec import get_curve
from .errors import ComparisonInvalidError, RegionKeyError, ScenarioParseError
from .region import RegionConfig
from .tgecdh import POLICIES

log = logging.getLogger("regionkey")

EXIT_OK, EXIT_USAGE, EXIT_SCENARIO, EXIT_VERIFY = 0, 1, 2, 3

SHARE_DEMO = """\
# three subgroups; dh1.png lives in the last one
0 CONFIG max_subgroup_size=4
0 FORM m1:2:1:1 m2 m3 m4 m5:3:3:3 m6 m7 m8 m9:1:1:1 m10 m11 m12
1 PUBLISH m11 dh1.png hex=89504e470d0a1a0a0000000d494844520000
1 PUBLISH m6 readme.txt content="keys rotate on every membership change"
2 QUERY m2 name dh1.png
3 TRANSFER m2 m11 dh1.png
4 QUERY m3 content rotate
5 TRANSFER m3 m6 readme.txt
"""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, top: bool) -> None:
    # subcommand copies use SUPPRESS so they only override when given
    d = (lambda v: v) if top else (lambda v: argparse.SUPPRESS)
    p.add_argument("--curve", default=d(None), help="subgroup curve name (default e211)")
    p.add_argument("--outer-curve", default=d(None), help="outer group curve name (default e751)")
    p.add_argument("--seed", type=int, default=d(0), help="seed for all randomness (default 0)")
    p.add_argument("--out", default=d(None), help="write machine-readable output here instead of stdout")
    p.add_argument("--refresh-on-join", action="store_true", default=d(False),
                   help="old subgroup controller refreshes its scalar when someone joins")
    p.add_argument("--tree-insert", choices=POLICIES, default=d("root"),
                   help="where a joining gateway enters the outer tree")
    p.add_argument("-v", "--verbose", action="store_true", default=d(False))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="regionkey", description="Region-based EC group key agreement toolkit")
    _common(parser, True)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("verify-paper-examples", help="replay the published worked examples")
    _common(p, False)

    p = sub.add_parser("run-scenario", help="run a scenario script and emit a CSV trace")
    p.add_argument("path")
    p.add_argument("--log", help="write the event log here (default: stderr)")
    _common(p, False)

    p = sub.add_parser("bench", help="compare message/computation/storage costs with GDH and TGDH")
    p.add_argument("--members", type=int, nargs="+", default=[64, 256, 512])
    p.add_argument("--subgroup-size", type=int, default=16)
    p.add_argument("--events", help="trace file of 'join <id>' / 'leave <id>' lines")
    p.add_argument("--joins", type=int, default=3)
    p.add_argument("--leaves", type=int, default=3)
    p.add_argument("--storage-members", type=int, default=1024)
    p.add_argument("--storage-subgroup-size", type=int, default=99)
    _common(p, False)

    p = sub.add_parser("share-demo", help="publish, search and transfer across subgroups")
    _common(p, False)

    p = sub.add_parser("publish", help="print a PUBLISH scenario line")
    p.add_argument("member")
    p.add_argument("name")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--content")
    g.add_argument("--file", type=Path)
    p.add_argument("--tick", type=int, default=0)

    p = sub.add_parser("search", help="print a QUERY scenario line")
    p.add_argument("member")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--name")
    g.add_argument("--content")
    p.add_argument("--local", action="store_true", help="search only the member's own subgroup")
    p.add_argument("--tick", type=int, default=0)

    p = sub.add_parser("get", help="print a TRANSFER scenario line")
    p.add_argument("member")
    p.add_argument("responder")
    p.add_argument("name")
    p.add_argument("--tick", type=int, default=0)
    return parser


def _config(args) -> RegionConfig:
    cfg = RegionConfig(refresh_on_join=args.refresh_on_join, tree_insert=args.tree_insert)
    if args.curve:
        cfg.subgroup_curve = get_curve(args.curve)
    if args.outer_curve:
        cfg.outer_curve = get_curve(args.outer_curve)
    return cfg


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
        log.info("wrote %s", out)
    else:
        sys.stdout.write(text)


def cmd_verify(args) -> int:
    checks = worked_examples.run_all()
    _emit(worked_examples.report(checks) + "\n", args.out)
    return EXIT_VERIFY if worked_examples.failed(checks) else EXIT_OK


def _scenario(text: str, args, log_path: str | None = None) -> int:
    sim = simnet.run_scenario(text, seed=args.seed, config=_config(args))
    events = "\n".join(sim.log) + "\n"
    if log_path:
        Path(log_path).write_text(events)
    else:
        sys.stderr.write(events)
    _emit(simnet.trace_csv(sim.trace), args.out)
    return EXIT_OK


def cmd_run_scenario(args) -> int:
    try:
        text = Path(args.path).read_text()
    except OSError as exc:
        raise ScenarioParseError(0, f"cannot read {args.path}: {exc.strerror}") from None
    return _scenario(text, args, args.log)


def cmd_share_demo(args) -> int:
    return _scenario(SHARE_DEMO, args)


def cmd_bench(args) -> int:
    rows = []
    ok = True
    for n in args.members:
        if args.events:
            trace = bench.read_trace(args.events)
        else:
            trace = bench.make_trace(n, args.joins, args.leaves, random.Random(args.seed))
        log.info("bench N=%d (%d events)", n, len(trace))
        cmp = bench.compare(n, args.subgroup_size, trace, seed=args.seed)
        rows += cmp.rows()
        ok &= cmp.ordering("join") and cmp.ordering("leave")
    if args.storage_members:
        rows += bench.storage_rows(args.storage_members, args.storage_subgroup_size, args.seed)
    _emit(bench.to_csv(rows), args.out)
    if not ok:
        log.warning("message ordering Region < TGDH < GDH did not hold for every N")
    return EXIT_OK


def _line(tick: int, *tokens: str) -> str:
    return " ".join([str(tick)] + [shlex.quote(t) for t in tokens]) + "\n"


def cmd_publish(args) -> int:
    if args.file is not None:
        payload = "hex=" + args.file.read_bytes().hex()
    else:
        payload = "content=" + args.content
    sys.stdout.write(_line(args.tick, "PUBLISH", args.member, args.name, payload))
    return EXIT_OK


def cmd_search(args) -> int:
    kind, needle = ("name", args.name) if args.name is not None else ("content", args.content)
    extra = ["scope=local"] if args.local else []
    sys.stdout.write(_line(args.tick, "QUERY", args.member, kind, needle, *extra))
    return EXIT_OK


def cmd_get(args) -> int:
    sys.stdout.write(_line(args.tick, "TRANSFER", args.member, args.responder, args.name))
    return EXIT_OK


COMMANDS = {
    "verify-paper-examples": cmd_verify,
    "run-scenario": cmd_run_scenario,
    "bench": cmd_bench,
    "share-demo": cmd_share_demo,
    "publish": cmd_publish,
    "search": cmd_search,
    "get": cmd_get,
}


def _fail(message: str, code: int) -> int:
    print(f"regionkey: error: {message}", file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except ScenarioParseError as exc:
        return _fail(f"scenario error: {exc}", EXIT_SCENARIO)
    except ComparisonInvalidError as exc:
        return _fail(f"invalid comparison: {exc}", EXIT_USAGE)
    except (RegionKeyError, ValueError, OSError) as exc:
        return _fail(str(exc), EXIT_USAGE)


if __name__ == "__main__":
    sys.exit(main())
