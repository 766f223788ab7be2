"""Run a function two ways and reduce each run to a comparable outcome."""

from __future__ import annotations

import numpy as np

from specrt.engine import Engine
from specrt.errors import SpecializationTooLarge, Trap
from specrt.specializer import PinSet, pin_and_specialize


def canon(v):
    return (type(v).__name__, repr(v))


def copy_args(args):
    return [a.copy() if isinstance(a, np.ndarray) else a for a in args]


def outcome(engine: Engine, name: str, args, variant=None):
    """(kind, payload, arrays, ops, guard_failed); kind is "ok" or "trap"."""
    args = copy_args(args)
    arrays = lambda: tuple(a.tobytes() for a in args if isinstance(a, np.ndarray))  # noqa: E731
    try:
        r = engine.call(name, args, variant)
    except Trap as t:
        return ("trap", (t.kind,), arrays(), None, None, t.path)
    payload = (canon(r.value), tuple((tag, canon(v)) for tag, v in r.effects))
    return ("ok", payload, arrays(), r.ops, r.guard_failed, None)


def observable(o):
    """The part of an outcome that specialization must preserve."""
    return o[:3]


def check_case(gen, case, satisfying: int = 2, violating: int = 1):
    """Compare generic and specialized runs for one generated case.

    Returns (checked, failures) where ``checked`` counts satisfying
    argument vectors that were compared, or None when the variant was
    rejected as too large.
    """
    prog = case.program
    engine = Engine(prog)
    try:
        variant = pin_and_specialize(prog, PinSet.of(case.function, case.pins))
    except SpecializationTooLarge:
        return None, []
    fn = prog.functions[case.function]
    failures = []
    checked = 0
    for i in range(satisfying + violating):
        bad = i >= satisfying
        args = gen.args(fn, case.pins, violate=bad)
        g = outcome(engine, case.function, args)
        s = outcome(engine, case.function, args, variant)
        if observable(g) != observable(s):
            failures.append((case, args, g, s))
        elif bad and s[0] == "ok" and not s[4]:
            failures.append((case, args, "guard did not fire", s))
        if not bad:
            checked += 1
    return checked, failures
