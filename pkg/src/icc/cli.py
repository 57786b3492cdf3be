"""Command-line driver: ``icc <check|elab|run|subtype|srcstep|simulate|fuzz>``.

Exit codes: 0 ok, 1 type error, 2 usage or I/O, 3 timeout, 4 invariant violation.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
import threading
from importlib import resources
from pathlib import Path

from .dynamics import source_step_candidates
from .elaborate import (
    DeclError, TypeError_, check, check_soundness, elaborate_program, program_derivation,
)
from .metatheory import (
    InvariantViolation, Timeout, enumerate_types, generate_random, simulate_star,
)
from .printer import print_source, print_target, print_type
from .subtyping import NotASubtype, subtype
from .surface import DesugarError, ParseError, desugar_decls, parse, parse_expr, parse_target, \
    parse_type
from .syntax import EMPTY_CTX, Unit
from .target import (
    TargetTypeError, target_eval, target_typecheck_synth,
)

EXIT_OK, EXIT_TYPE, EXIT_USAGE, EXIT_TIMEOUT, EXIT_INVARIANT = 0, 1, 2, 3, 4

CORPUS = ("overload", "record", "dyn")


class UsageError(Exception):
    pass


def corpus_path(name: str):
    return resources.files("icc") / "corpus" / name


def read_source(path: str) -> str:
    """Read a program; ``examples/<name>.icc`` falls back to the bundled corpus."""
    p = Path(path)
    if p.exists():
        return p.read_text(encoding="utf-8")
    if p.parent.name == "examples" and p.stem in CORPUS and p.suffix == ".icc":
        return corpus_path(p.name).read_text(encoding="utf-8")
    raise UsageError(f"{path}: no such file")


def _err(text: str) -> None:
    print(text, file=sys.stderr)


def load_program(path: str, prelude: bool):
    """Parse, desugar and elaborate; returns (target body, elaborated decls)."""
    text = read_source(path)
    decls = desugar_decls(parse(text), prelude=prelude)
    return decls, elaborate_program(decls, prelude=prelude)


def _static_error(path: str, exc: Exception) -> int:
    if isinstance(exc, ParseError):
        _err(f"{path}:{exc.line}:{exc.col}: error: {exc.message}")
    elif isinstance(exc, DeclError):
        _err(exc.error.render(path))
    elif isinstance(exc, TypeError_):
        _err(exc.render(path))
    else:
        _err(f"{path}: error: {exc}")
    return EXIT_TYPE


# ---------------------------------------------------------------------------
# Commands

def cmd_check(args) -> int:
    try:
        _, (_, out) = load_program(args.file, not args.no_prelude)
    except (ParseError, DesugarError, DeclError) as exc:
        return _static_error(args.file, exc)
    for d in out:
        print(f"val {d.name} : {print_type(d.type)}")
    return EXIT_OK


def cmd_elab(args) -> int:
    try:
        _, (body, _) = load_program(args.file, not args.no_prelude)
    except (ParseError, DesugarError, DeclError) as exc:
        return _static_error(args.file, exc)
    text = print_target(body)
    # the written text must read back as a well-typed target term
    try:
        target_typecheck_synth({}, parse_target(text))
    except (ParseError, TargetTypeError) as exc:
        _err(f"internal error: elaborated program does not re-check: {exc}")
        return EXIT_INVARIANT
    if args.output:
        try:
            Path(args.output).write_text(text + "\n", encoding="utf-8")
        except OSError as exc:
            raise UsageError(str(exc)) from None
    else:
        print(text)
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        _, (body, _) = load_program(args.file, not args.no_prelude)
    except (ParseError, DesugarError, DeclError) as exc:
        return _static_error(args.file, exc)
    out = sys.stdout

    def on_step(k, r, m):
        if r.output is not None:
            out.write(r.output)
        if args.trace:
            out.write(f"{k}: {r.name}: {print_target(m)}\n")

    result = target_eval(body, args.max_steps, on_step)
    if result.status == "timeout":
        out.flush()
        _err("timeout")
        return EXIT_TIMEOUT
    if result.status == "stuck":
        out.flush()
        _err(f"internal error: stuck: {result.reason}")
        return EXIT_INVARIANT
    # programs usually end in a print, whose unit result is not echoed
    if result.term != Unit():
        out.write(print_target(result.term) + "\n")
    return EXIT_OK


def cmd_subtype(args) -> int:
    try:
        a, b = parse_type(args.source), parse_type(args.target)
    except (ParseError, DesugarError) as exc:
        raise UsageError(str(exc)) from None
    try:
        co = subtype(a, b)
    except NotASubtype:
        print("NOT A SUBTYPE")
        return EXIT_TYPE
    print(print_source(co.expr))
    return EXIT_OK


def cmd_srcstep(args) -> int:
    try:
        e = parse_expr(args.expr, prims=not args.no_prelude)
    except (ParseError, DesugarError) as exc:
        raise UsageError(str(exc)) from None
    for s in source_step_candidates(e, include_split=args.split):
        print(f"{s.name}: {print_source(s.to)}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        _, (_, out) = load_program(args.file, prelude=False)
    except (ParseError, DesugarError, DeclError) as exc:
        return _static_error(args.file, exc)
    d = program_derivation(out)
    try:
        r = simulate_star(d, args.max_steps)
    except Timeout:
        _err("timeout")
        return EXIT_TIMEOUT
    except (InvariantViolation, AssertionError) as exc:
        _err(f"invariant violation: {exc}")
        return EXIT_INVARIANT
    if args.emit_trace:
        lines = []
        for rule, after, steps in r.rounds:
            if rule != "value":
                lines.append(f"TGT: {rule}: {print_target(after)}")
            lines.extend(f"SRC: {s.name}: {print_source(s.to)}" for s in steps)
        try:
            Path(args.emit_trace).write_text("".join(x + "\n" for x in lines), encoding="utf-8")
        except OSError as exc:
            raise UsageError(str(exc)) from None
    print(f"value: {print_source(r.value)}")
    print(f"target: {print_target(r.target)}")
    print(f"source steps: {len(r.steps)}")
    return EXIT_OK


def parse_sizes(text: str) -> range:
    lo, sep, hi = text.partition("..")
    try:
        a = int(lo)
        b = int(hi) if sep else a
    except ValueError:
        raise UsageError(f"bad --sizes {text!r}; expected N or A..B") from None
    if a < 1 or b < a:
        raise UsageError(f"bad --sizes {text!r}; sizes start at 1")
    return range(a, b + 1)


def fuzz(sizes: range, count: int, seed: int, max_steps: int) -> dict:
    """Random closed core terms checked against every core type of size <= 3."""
    rng = random.Random(seed)
    types = enumerate_types(3)
    counters = {"cases": 0, "elaborated": 0, "sound": 0, "simulated": 0, "timeouts": 0}
    violations = []
    for size in sizes:
        for _ in range(count):
            term = generate_random(rng.getrandbits(32), size)
            for a in types:
                counters["cases"] += 1
                try:
                    _, d = check(EMPTY_CTX, term, a)
                except TypeError_:
                    continue
                counters["elaborated"] += 1
                if not check_soundness(d):
                    violations.append(f"unsound: {print_source(term)} : {print_type(a)}")
                    continue
                counters["sound"] += 1
                if target_eval(d.target, max_steps).status != "value":
                    counters["timeouts"] += 1
                    continue
                try:
                    simulate_star(d, max_steps)
                except Timeout:
                    counters["timeouts"] += 1
                    continue
                except (InvariantViolation, AssertionError) as exc:
                    violations.append(f"simulation: {print_source(term)} : {print_type(a)}: {exc}")
                    continue
                counters["simulated"] += 1
    return {"sizes": [sizes.start, sizes.stop - 1], "count": count, "seed": seed,
            "max_steps": max_steps, **counters, "violations": violations}


def cmd_fuzz(args) -> int:
    sizes = parse_sizes(args.sizes)
    if args.count < 1:
        raise UsageError("--count must be positive")
    report = fuzz(sizes, args.count, args.seed, args.max_steps)
    text = json.dumps(report, indent=2) + "\n"
    if args.report:
        try:
            Path(args.report).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise UsageError(str(exc)) from None
    else:
        sys.stdout.write(text)
    return EXIT_INVARIANT if report["violations"] else EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing

def _positive(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text}") from None
    if n <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return n


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--no-prelude", action="store_true", help="do not bind the primitives")
    ap = argparse.ArgumentParser(prog="icc", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", parents=[common], help="print the type of every declaration")
    p.add_argument("file")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("elab", parents=[common], help="print the elaborated target program")
    p.add_argument("file")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_elab)

    p = sub.add_parser("run", parents=[common], help="elaborate and evaluate")
    p.add_argument("file")
    p.add_argument("--max-steps", type=_positive, default=100000)
    p.add_argument("--trace", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("subtype", parents=[common], help="print the coercion for A <= B")
    p.add_argument("source")
    p.add_argument("target")
    p.set_defaults(func=cmd_subtype)

    p = sub.add_parser("srcstep", parents=[common], help="list the source steps of an expression")
    p.add_argument("expr")
    p.add_argument("--split", action="store_true", help="also offer split at the root")
    p.set_defaults(func=cmd_srcstep)

    p = sub.add_parser("simulate", parents=[common],
                       help="answer every target step with source steps")
    p.add_argument("file")
    p.add_argument("--max-steps", type=_positive, default=100000)
    p.add_argument("--emit-trace")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fuzz", parents=[common], help="random soundness and consistency checks")
    p.add_argument("--sizes", default="1..6")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-steps", type=_positive, default=500)
    p.add_argument("--report")
    p.set_defaults(func=cmd_fuzz)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        _err(f"icc: {exc}")
        return EXIT_USAGE


def _run_with_big_stack(argv) -> int:
    # derivations and terms are walked recursively; give deep programs room
    sys.setrecursionlimit(50000)
    threading.stack_size(512 * 1024 * 1024)
    box = []
    t = threading.Thread(target=lambda: box.append(main(argv)))
    t.start()
    t.join()
    return box[0] if box else EXIT_INVARIANT


def entry() -> None:
    sys.exit(_run_with_big_stack(sys.argv[1:]))


if __name__ == "__main__":
    entry()
