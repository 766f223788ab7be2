"""Command-line front end: run scenarios, inspect variants, tabulate results.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime trap.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bench import format_report, report_table, run_config, write_outputs
from .config import ConfigError, load_config
from .errors import SpecializationError, Trap
from .ir import IRSyntaxError, ValidationError, format_function, parse_program
from .ir.nodes import BOOL, F64, count_stmts
from .specializer import PinSet, pin_and_specialize

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_TRAP = 2


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except FileNotFoundError:
        _err(f"config file not found: {args.config}")
        return EXIT_ERROR
    except ConfigError as e:
        _err(f"config: {e}")
        return EXIT_ERROR
    try:
        result = run_config(cfg, seed=args.seed, wallclock=args.wallclock)
    except Trap as t:
        _err(str(t))
        return EXIT_TRAP
    except ConfigError as e:
        _err(f"config: {e}")
        return EXIT_ERROR
    except (OSError, IRSyntaxError, ValidationError, SpecializationError, ValueError) as e:
        _err(str(e))
        return EXIT_ERROR
    write_outputs(result, args.out)
    print(result.summary, end="")
    return EXIT_OK


def _parse_value(text: str, ty: str):
    if ty == BOOL:
        if text not in ("true", "false"):
            raise ValueError(f"expected true or false, got {text!r}")
        return text == "true"
    if ty == F64:
        return float(text)
    return int(text, 0)


def cmd_specialize(args) -> int:
    try:
        program = parse_program(Path(args.program).read_text())
    except OSError as e:
        _err(str(e))
        return EXIT_ERROR
    except (IRSyntaxError, ValidationError) as e:
        _err(str(e))
        return EXIT_ERROR
    fn_name, sep, var = args.point.partition(":")
    declared = {(d.function, d.var) for d in program.specpoints}
    if not sep or (fn_name, var) not in declared:
        _err(f"unknown specialization point {args.point!r}; declared: "
             + (", ".join(f"{f}:{v}" for f, v in sorted(declared)) or "none"))
        return EXIT_ERROR
    fn = program.functions[fn_name]
    try:
        value = _parse_value(args.value, fn.var_types()[var])
        variant = pin_and_specialize(program, PinSet.of(fn_name, {var: value}),
                                     unroll_cap=args.unroll_cap, guards=not args.no_guard)
    except (ValueError, SpecializationError) as e:
        _err(str(e))
        return EXIT_ERROR
    before, after = count_stmts(fn.body), count_stmts(variant.code.body)
    print(";; generic")
    print(format_function(fn))
    print(f";; specialized {variant.variant_id}")
    print(format_function(variant.code))
    print(";; passes (nodes before -> after)")
    for name, n0, n1 in variant.pass_log:
        print(f";;   {name:<16} {n0:>6} -> {n1}")
    print(f";; statements: {before} -> {after} ({after - before:+d})")
    return EXIT_OK


def cmd_report(args) -> int:
    path = Path(args.dir) / "metrics.csv"
    if not path.is_file():
        _err(f"no metrics.csv in {args.dir}")
        return EXIT_ERROR
    rows = report_table(path.read_text())
    if not rows:
        _err(f"{path} has no windows")
        return EXIT_ERROR
    print(format_report(rows), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="specrt", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a configured scenario and write CSV traces")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--wallclock", action="store_true", help="add a wall_ms column to metrics.csv")
    run.set_defaults(func=cmd_run)

    spec = sub.add_parser("specialize", help="print a variant for one pinned point")
    spec.add_argument("--program", required=True)
    spec.add_argument("--point", required=True, metavar="FN:VAR")
    spec.add_argument("--value", required=True)
    spec.add_argument("--no-guard", action="store_true")
    spec.add_argument("--unroll-cap", type=int, default=16)
    spec.set_defaults(func=cmd_specialize)

    rep = sub.add_parser("report", help="tabulate a run directory")
    rep.add_argument("--dir", required=True)
    rep.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_ERROR
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
