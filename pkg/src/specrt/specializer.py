"""Build guarded, optimized variants of handler functions."""

from __future__ import annotations

from dataclasses import dataclass, field

from . import passes
from .errors import EmptyHotMap, NotPure, NotScalar, PinTypeError, SpecializationTooLarge, UnknownPoint
from .ir.nodes import (
    SCALAR_TYPES,
    Cmp,
    FunctionDef,
    Guard,
    If,
    Program,
    Return,
    Var,
    const,
    count_nodes,
    count_stmts,
)
from .ir.validate import return_type

WORKLOAD = "workload"
CONFIG = "config"

DEFAULT_UNROLL_CAP = 16
MAX_PASS_ROUNDS = 8
SIZE_FACTOR = 64


@dataclass
class SpecPoint:
    """A variable the runtime may turn into a constant.

    Workload knobs arrive with requests and are guarded by default; config
    knobs are set by the runtime itself, so their guard is off by default.
    ``driver_coupled`` marks a workload knob whose value the request driver
    adopts from the runtime while exploring.
    """

    function: str
    var: str
    kind: str = WORKLOAD
    candidates: list | None = None
    guard_enabled: bool | None = None
    collection_enabled: bool = True
    driver_coupled: bool = False

    def __post_init__(self):
        if self.kind not in (WORKLOAD, CONFIG):
            raise ValueError(f"unknown specpoint kind {self.kind!r}")
        if self.guard_enabled is None:
            self.guard_enabled = self.kind == WORKLOAD

    @property
    def id(self) -> tuple[str, str]:
        return (self.function, self.var)

    def check(self, program: Program) -> None:
        fn = program.functions.get(self.function)
        if fn is None:
            raise UnknownPoint(f"no function {self.function!r}")
        ty = fn.var_types().get(self.var)
        if ty is None:
            raise UnknownPoint(f"{self.function} has no variable {self.var!r}")
        if ty not in SCALAR_TYPES:
            raise NotScalar(f"{self.function}.{self.var} is not a scalar")
        for v in self.candidates or ():
            if passes._value_type(v) != ty:
                raise PinTypeError(f"candidate {v!r} does not fit {self.function}.{self.var} ({ty})")


@dataclass(frozen=True)
class PinSet:
    function: str
    values: tuple  # sorted (var, value) pairs

    def __post_init__(self):
        if not self.values:
            raise ValueError("a PinSet needs at least one pinned variable")

    @classmethod
    def of(cls, function: str, values: dict) -> "PinSet":
        return cls(function, tuple(sorted(values.items())))

    def as_dict(self) -> dict:
        return dict(self.values)

    def label(self) -> str:
        return ",".join(f"{v}={x!r}" for v, x in self.values)


@dataclass(frozen=True)
class HotMapSpec:
    function: str
    key: str
    entries: tuple  # (input, output) pairs, hottest first
    table_version: int = 0


@dataclass(eq=False)
class Variant:
    variant_id: str
    base: str
    code: FunctionDef
    origin: PinSet | HotMapSpec | None = None
    guard: Guard | None = None
    pass_log: list = field(default_factory=list)
    calls: int = 0
    guard_failures: int = 0
    total_ops: int = 0

    @property
    def kind(self) -> str:
        if isinstance(self.origin, PinSet):
            return "pinned"
        if isinstance(self.origin, HotMapSpec):
            return "hotmap"
        return "generic"

    @property
    def pinned_vars(self) -> tuple:
        if isinstance(self.origin, PinSet):
            return tuple(v for v, _ in self.origin.values)
        return ()


def generic_variant(program: Program, name: str) -> Variant:
    return Variant(f"{name}#generic", name, program.functions[name])


def _run_pipeline(f: FunctionDef, unroll_cap: int, limit: int, log: list) -> FunctionDef:
    for _ in range(MAX_PASS_ROUNDS):
        before = f
        for name, step in (
            ("unroll", lambda g: passes.unroll_loops(g, unroll_cap)),
            ("propagate_fold", passes.propagate_and_fold),
            ("dce", passes.eliminate_dead_code),
        ):
            n0 = count_nodes(f.body)
            f = step(f)
            log.append((name, n0, count_nodes(f.body)))
            if count_stmts(f.body) > limit:
                raise SpecializationTooLarge(
                    f"{f.name}: {count_stmts(f.body)} statements exceeds the limit of {limit}")
        if f == before:
            break
    return f


def pin_and_specialize(program: Program, pins: PinSet, unroll_cap: int = DEFAULT_UNROLL_CAP,
                       guards: bool | dict = True) -> Variant:
    """Specialize one function for a pin assignment.

    ``guards`` is either a flag for all pins or a per-variable mapping; only
    guarded variables appear in the entry check.
    """
    fn = program.functions.get(pins.function)
    if fn is None:
        raise UnknownPoint(f"no function {pins.function!r}")
    values = pins.as_dict()
    passes.check_pins(fn, values)
    if isinstance(guards, dict):
        guarded = {v: x for v, x in values.items() if guards.get(v, True)}
    else:
        guarded = dict(values) if guards else {}
    defs = passes.local_definitions(fn, set(values) - set(fn.param_names()))
    # fail early if an entry guard is impossible
    conds = passes.guard_conditions(fn, guarded, defs) if guarded else ()

    log = []
    n0 = count_nodes(fn.body)
    f = passes.substitute(fn, values)
    log.append(("substitute", n0, count_nodes(f.body)))
    limit = SIZE_FACTOR * max(1, count_stmts(fn.body))
    f = _run_pipeline(f, unroll_cap, limit, log)
    guard = None
    if conds:
        guard = Guard(conds)
        n0 = count_nodes(f.body)
        f = f.with_body((guard,) + f.body)
        log.append(("insert_guards", n0, count_nodes(f.body)))
    suffix = "" if set(guarded) == set(values) else "!noguard"
    vid = f"{fn.name}#pin[{pins.label()}]{suffix}"
    return Variant(vid, fn.name, f, origin=pins, guard=guard, pass_log=log)


def apply_hot_map(program: Program, spec: HotMapSpec) -> Variant:
    """Prefix a pure function with hard-coded answers for its hottest inputs.

    The entry guard compares the runtime's table version for the function
    against ``spec.table_version`` so a table update sends every call back
    to the generic code.
    """
    fn = program.functions.get(spec.function)
    if fn is None:
        raise UnknownPoint(f"no function {spec.function!r}")
    if not program.is_pure(spec.function):
        raise NotPure(f"{spec.function} has side effects; a hot map would skip them")
    if not spec.entries:
        raise EmptyHotMap(f"hot map for {spec.function} has no entries")
    types = dict(fn.params)
    if types.get(spec.key) not in SCALAR_TYPES:
        raise NotScalar(f"{spec.function}.{spec.key} is not a scalar parameter")
    rtype = return_type(fn)
    keys = [k for k, _ in spec.entries]
    if len(set(keys)) != len(keys):
        raise ValueError("hot map inputs must be distinct")
    for k, v in spec.entries:
        if passes._value_type(k) != types[spec.key] or passes._value_type(v) != rtype:
            raise PinTypeError(f"hot map entry ({k!r}, {v!r}) does not fit {spec.function}")
    guard = Guard((), spec.table_version)
    chain = tuple(
        If(Cmp("==", Var(spec.key), const(k)), (Return(const(v)),), ())
        for k, v in spec.entries
    )
    code = fn.with_body((guard,) + chain + tuple(fn.body))
    log = [("hot_map", count_nodes(fn.body), count_nodes(code.body))]
    vid = f"{fn.name}#hot[{spec.key},n={len(keys)},v{spec.table_version}]"
    return Variant(vid, fn.name, code, origin=spec, guard=guard, pass_log=log)
