"""Command-line driver: ``sire check|alloc-map|run|trace FILE``.

Exit status: 0 success, 1 static error, 2 runtime fault, 3 deadlock,
64 usage error.
"""

from __future__ import annotations

import argparse
import sys
from typing import Sequence, TextIO

from . import __version__
from .errors import FootprintExceedsMachine, SireError
from .frontend import parse_source
from .machine import MachineConfig
from .pipeline import compile_program
from .trace import format_trace

EX_USAGE = 64


class UsageParser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


def positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = UsageParser(prog="sire", description=__doc__.splitlines()[0],
                         formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=UsageParser)

    def add(name: str, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        p.add_argument("file", help="source file (.sire)")
        return p

    add("check", "parse and check a program")
    add("alloc-map", "check a program and print its processor allocation")
    for name, help in (("run", "execute a program on the simulated machine"),
                       ("trace", "execute a program and write its event trace")):
        p = add(name, help)
        p.add_argument("--processors", type=positive, default=64, help="machine processor count")
        p.add_argument("--seed", type=int, default=0, help="scheduler seed")
        p.add_argument("--queue-capacity", type=positive, default=None,
                       help="connection queue capacity (default: ceil(log2(clients)), at least 1)")
        p.add_argument("--backoff-base", type=positive, default=4, help="first backoff sleep, in ticks")
        p.add_argument("--backoff-cap", type=positive, default=256, help="longest backoff sleep, in ticks")
        p.add_argument("--dump-vars", action="store_true", help="print final top-level variables")
        p.add_argument("--trace", metavar="PATH", default=None,
                       help="write the event trace to PATH" + (" (default: stdout)" if name == "trace" else ""))
    return parser


def format_value(v) -> str:
    if isinstance(v, list):
        return "[" + ", ".join(format_value(x) for x in v) + "]"
    return str(v)


def main(argv: Sequence[str] | None = None, stdout: TextIO | None = None,
         stderr: TextIO | None = None) -> int:
    out = stdout or sys.stdout
    err = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        with open(args.file, encoding="utf-8") as fh:
            source = fh.read()
    except OSError as exc:
        print(f"sire: cannot read {args.file}: {exc.strerror}", file=err)
        return EX_USAGE
    try:
        compiled = compile_program(parse_source(source))
    except SireError as exc:
        print(exc.diagnostic(args.file), file=err)
        return exc.exit_status
    if args.command == "check":
        return 0
    if args.command == "alloc-map":
        out.write(compiled.alloc.format())
        return 0

    config = MachineConfig(processors=args.processors, seed=args.seed, queue_capacity=args.queue_capacity,
                           backoff_base=args.backoff_base, backoff_cap=args.backoff_cap)
    if compiled.footprint > config.processors:
        exc = FootprintExceedsMachine(compiled.footprint, config.processors, compiled.program.main.pos)
        print(exc.diagnostic(args.file), file=err)
        return exc.exit_status
    result = compiled.run(config)
    if args.trace is not None or args.command == "trace":
        text = format_trace(result.events)
        if args.trace is None or args.trace == "-":
            out.write(text)
        else:
            with open(args.trace, "w", encoding="utf-8") as fh:
                fh.write(text)
    if result.error is not None:
        print(result.error.diagnostic(args.file), file=err)
    if args.dump_vars:
        for name, value in result.variables.items():
            print(f"{name} = {format_value(value)}", file=out)
    return result.status


if __name__ == "__main__":
    sys.exit(main())
