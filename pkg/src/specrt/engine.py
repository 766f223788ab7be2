"""Deterministic execution of IR functions through a variant dispatch table.

Op accounting: every executed statement costs 1 and every evaluated
expression node costs 1. A For loop additionally costs 1 per bound check
(trip count + 1 checks). A Guard costs 1, plus its condition nodes, plus 1
for a table-version comparison.
"""

from __future__ import annotations

import threading
import zlib
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .errors import Trap, UnknownFunction
from .ir.nodes import (
    ARRAY_TYPES,
    BOOL,
    F64,
    I64,
    INT_MAX,
    INT_MIN,
    Assign,
    BinOp,
    Bool,
    Call,
    Cmp,
    Emit,
    Float,
    For,
    FunctionDef,
    Guard,
    If,
    Int,
    Load,
    Program,
    Return,
    Store,
    Var,
    walk_stmts,
)
from .passes import eval_binop, eval_cmp
from .specializer import Variant, generic_variant


@dataclass
class ExecResult:
    value: object
    ops: int
    guard_failed: bool = False
    effects: list = field(default_factory=list)
    fallback_used: bool = False
    variant_id: str = ""


class GuardFailed(Exception):
    """Raised by a variant's entry guard; carries the ops spent on the check."""

    def __init__(self, ops: int):
        super().__init__(ops)
        self.ops = ops


class DispatchTable:
    """Maps each function to its active variant; generic is the default."""

    def __init__(self, program: Program):
        self.program = program
        self.generic = {name: generic_variant(program, name) for name in program.functions}
        self.active = dict(self.generic)

    def resolve(self, name: str) -> Variant:
        try:
            return self.active[name]
        except KeyError:
            raise UnknownFunction(f"no function {name!r}") from None

    def set_active_variant(self, name: str, variant: Variant | None) -> None:
        if name not in self.active:
            raise UnknownFunction(f"no function {name!r}")
        if variant is None:
            variant = self.generic[name]
        if variant.base != name:
            raise ValueError(f"variant {variant.variant_id} belongs to {variant.base}, not {name}")
        self.active[name] = variant


class CleanupRegistry:
    """One cleanup callback per function, called as cb(args, effects)."""

    def __init__(self, program: Program):
        self.program = program
        self.callbacks = {}

    def register(self, name: str, callback) -> None:
        if name not in self.program.functions:
            raise UnknownFunction(f"no function {name!r}")
        self.callbacks[name] = callback

    def run(self, name: str, args, effects) -> None:
        cb = self.callbacks.get(name)
        if cb is not None:
            cb(list(args), list(effects))


# -- argument checking -----------------------------------------------------

_DTYPE = {"arr-i64": np.int64, "arr-f64": np.float64}


def check_args(fn: FunctionDef, args) -> list:
    if len(args) != len(fn.params):
        raise Trap("type", fn.name)
    out = []
    for a, (pname, ty) in zip(args, fn.params):
        if ty == I64:
            if isinstance(a, (bool, np.bool_)) or not isinstance(a, (int, np.integer)):
                raise Trap("type", fn.name)
            a = int(a)
            if not INT_MIN <= a <= INT_MAX:
                raise Trap("type", fn.name)
        elif ty == F64:
            if not isinstance(a, (float, np.floating)):
                raise Trap("type", fn.name)
            a = float(a)
        elif ty == BOOL:
            if not isinstance(a, (bool, np.bool_)):
                raise Trap("type", fn.name)
            a = bool(a)
        else:
            if not isinstance(a, np.ndarray) or a.dtype != _DTYPE[ty] or a.ndim != 1:
                raise Trap("type", fn.name)
        out.append(a)
    return out


# -- reference interpreter -------------------------------------------------


class _Ret:
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = value


class Interpreter:
    """Tree-walking reference evaluator. Slow, simple, and the oracle for
    every other execution path."""

    def __init__(self, engine: "Engine"):
        self.engine = engine

    def run(self, fn: FunctionDef, args: list):
        """Execute ``fn``; returns (value, ops, effects). Raises Trap or GuardFailed."""
        frame = _Frame(self.engine, fn)
        env = dict(zip(fn.param_names(), args))
        body = fn.body
        start = 0
        if body and isinstance(body[0], Guard):
            try:
                frame.guard(body[0], env)
            except Trap as t:
                t.path = "0"
                raise
            start = 1
        ret = frame.block(body, env, start)
        return (ret.value if ret is not None else None), frame.ops, frame.effects


def _prefix_path(i, rest: str) -> str:
    return f"{i}/{rest}" if rest else str(i)


class _Frame:
    __slots__ = ("engine", "fn", "ops", "effects")

    def __init__(self, engine, fn):
        self.engine = engine
        self.fn = fn
        self.ops = 0
        self.effects = []

    def trap(self, kind):
        raise Trap(kind, self.fn.name)

    def guard(self, st: Guard, env):
        self.ops += 1
        ok = True
        for c in st.conds:
            if not self.ev(c, env):
                ok = False
        if st.version is not None:
            self.ops += 1
            if self.engine.table_version(self.fn.name) != st.version:
                ok = False
        if not ok:
            raise GuardFailed(self.ops)

    def ev(self, e, env):
        self.ops += 1
        t = type(e)
        if t is Var:
            return env[e.name]
        if t is BinOp:
            a = self.ev(e.lhs, env)
            b = self.ev(e.rhs, env)
            if e.op in ("/", "%") and b == 0:
                self.trap("div_by_zero")
            return eval_binop(e.op, a, b)
        if t is Load:
            i = self.ev(e.index, env)
            arr = env[e.array]
            if i < 0 or i >= arr.shape[0]:
                self.trap("oob_index")
            v = arr[i]
            return float(v) if arr.dtype == np.float64 else int(v)
        if t is Cmp:
            return eval_cmp(e.op, self.ev(e.lhs, env), self.ev(e.rhs, env))
        if t is Int or t is Float or t is Bool:
            return e.value
        raise TypeError(e)

    def block(self, body, env, start=0):
        for i in range(start, len(body)):
            st = body[i]
            try:
                r = self.stmt(st, env)
            except Trap as t:
                if t.function == self.fn.name and not getattr(t, "_sealed", False):
                    t.path = _prefix_path(i, t.path)
                raise
            if r is not None:
                return r
        return None

    def stmt(self, st, env):
        self.ops += 1
        t = type(st)
        if t is Assign:
            env[st.name] = self.ev(st.value, env)
        elif t is Store:
            i = self.ev(st.index, env)
            v = self.ev(st.value, env)
            arr = env[st.array]
            if i < 0 or i >= arr.shape[0]:
                self.trap("oob_index")
            if not arr.flags.writeable:
                self.trap("type")
            arr[i] = v
        elif t is For:
            lo = self.ev(st.lo, env)
            hi = self.ev(st.hi, env)
            step = self.ev(st.step, env)
            if step <= 0:
                self.trap("bad_step")
            var = st.var
            try:
                for v in range(lo, hi, step):
                    self.ops += 1
                    env[var] = v
                    r = self.block(st.body, env)
                    if r is not None:
                        return r
            finally:
                env.pop(var, None)
            self.ops += 1
        elif t is If:
            if self.ev(st.cond, env):
                try:
                    return self.block(st.then, env)
                except Trap as tr:
                    if tr.function == self.fn.name and not getattr(tr, "_sealed", False):
                        tr.path = "then/" + tr.path
                    raise
            try:
                return self.block(st.else_, env)
            except Trap as tr:
                if tr.function == self.fn.name and not getattr(tr, "_sealed", False):
                    tr.path = "else/" + tr.path
                raise
        elif t is Return:
            return _Ret(self.ev(st.value, env))
        elif t is Emit:
            self.effects.append((st.tag, self.ev(st.payload, env)))
        elif t is Call:
            args = [self.ev(a, env) for a in st.args]
            res = self.engine.call_nested(st.func, args)
            self.ops += res.ops
            self.effects.extend(res.effects)
            if st.into is not None:
                env[st.into] = res.value
        elif t is Guard:
            self.trap("type")  # guards are only legal at entry
        else:
            raise TypeError(st)
        return None


# -- engine ----------------------------------------------------------------


def _is_leaf(fn: FunctionDef) -> bool:
    return not any(isinstance(st, Call) for st in walk_stmts(fn.body))


class _Memo:
    """Exact replay cache for leaf functions.

    Keyed by the variant, the table version and the full argument content.
    Arrays that the function never writes and that are read-only are keyed
    by identity; every other array is keyed by a checksum and compared
    byte-for-byte on a hit.
    """

    def __init__(self, capacity: int = 512):
        self.capacity = capacity
        self.entries: OrderedDict = OrderedDict()
        self.hits = 0
        self.misses = 0

    @staticmethod
    def _array_key(a: np.ndarray, written: bool):
        if not written and not a.flags.writeable:
            return ("id", id(a))
        return ("crc", a.dtype.str, a.shape[0], zlib.crc32(a.view(np.uint8)))

    def key(self, variant: Variant, version: int, fn: FunctionDef, args, written: set):
        parts = [id(variant), version]
        for a, (pname, ty) in zip(args, fn.params):
            if ty in ARRAY_TYPES:
                parts.append(self._array_key(a, pname in written))
            elif isinstance(a, float):
                parts.append(("f", a.hex()))  # keeps -0.0 apart from 0.0
            else:
                parts.append((type(a).__name__, a))
        return tuple(parts)

    def lookup(self, key, args):
        entry = self.entries.get(key)
        if entry is None:
            self.misses += 1
            return None
        _refs, before, outcome, after = entry
        for i, ref in before.items():
            if args[i].tobytes() != ref.tobytes():
                self.misses += 1
                return None
        self.entries.move_to_end(key)
        self.hits += 1
        for i, data in after.items():
            np.copyto(args[i], data)
        return outcome

    def store(self, key, args, fn, written, outcome, before):
        after = {}
        refs = []
        for i, (pname, ty) in enumerate(fn.params):
            if ty in ARRAY_TYPES:
                refs.append(args[i])  # keeps identity keys unambiguous
                if pname in written:
                    after[i] = args[i].copy()
        self.entries[key] = (refs, before, outcome, after)
        if len(self.entries) > self.capacity:
            self.entries.popitem(last=False)

    @staticmethod
    def snapshot(args, fn) -> dict:
        return {
            i: args[i].copy()
            for i, (pname, ty) in enumerate(fn.params)
            if ty in ARRAY_TYPES and (args[i].flags.writeable)
        }


class Engine:
    """Executes handler calls against a dispatch table.

    ``backend`` selects how variant code runs: "interp" always uses the
    reference interpreter; "native" compiles leaf functions without Emit to
    C and falls back to the interpreter for everything else, including
    calls whose arrays the compiled code cannot take (non-contiguous,
    read-only but written, or aliased).
    """

    def __init__(self, program: Program, backend: str = "interp", memoize: bool = False,
                 memo_capacity: int = 512):
        if backend not in ("interp", "native"):
            raise ValueError(f"unknown backend {backend!r}")
        self.program = program
        self.table = DispatchTable(program)
        self.cleanup = CleanupRegistry(program)
        self.versions: dict[str, int] = {name: 0 for name in program.functions}
        self.backend = backend
        self.interp = Interpreter(self)
        self.memo = _Memo(memo_capacity) if memoize else None
        self._written = {
            name: {st.array for st in walk_stmts(fn.body) if isinstance(st, Store)}
            for name, fn in program.functions.items()
        }
        self._native_cache: dict = {}  # id(variant) -> (runner, variant)
        self._lock = threading.RLock()

    # table versions back the hot-map guard
    def table_version(self, name: str) -> int:
        return self.versions[name]

    def bump_table_version(self, name: str) -> int:
        if name not in self.versions:
            raise UnknownFunction(f"no function {name!r}")
        self.versions[name] += 1
        return self.versions[name]

    def set_active_variant(self, name: str, variant: Variant | None) -> None:
        with self._lock:
            self.table.set_active_variant(name, variant)

    def register_cleanup(self, name: str, callback) -> None:
        self.cleanup.register(name, callback)

    def resolve(self, name: str) -> Variant:
        return self.table.resolve(name)

    # execution -----------------------------------------------------------

    def _runner(self, variant: Variant):
        code = variant.code
        interp = lambda args: self.interp.run(code, args)  # noqa: E731
        if self.backend == "native" and _is_leaf(code) and not any(
                isinstance(st, Emit) for st in walk_stmts(code.body)):
            fn = self._native_cache.get(id(variant))
            if fn is None:
                from .native import compile_function
                fn = compile_function(code)
                self._native_cache[id(variant)] = (fn, variant)
            else:
                fn = fn[0]
            version = self.versions[variant.base]

            def run(args):
                out = fn(args, version)
                return interp(args) if out is None else out
            return run
        return interp

    def _execute(self, variant: Variant, args: list):
        """Run one variant; returns ("ok", value, ops, effects) or
        ("guard", ops) and raises Trap."""
        code = variant.code
        memo = self.memo if self.memo is not None and _is_leaf(code) else None
        if memo is not None:
            written = self._written[variant.base]
            key = memo.key(variant, self.versions[variant.base], code, args, written)
            hit = memo.lookup(key, args)
            if hit is not None:
                if isinstance(hit, Trap):
                    raise Trap(hit.kind, hit.function, hit.path)
                return hit
            before = _Memo.snapshot(args, code)
        try:
            value, ops, effects = self._runner(variant)(args)
            outcome = ("ok", value, ops, tuple(effects))
        except GuardFailed as g:
            outcome = ("guard", g.ops)
        except Trap as t:
            t._sealed = True
            if memo is not None:
                memo.store(key, args, code, written, t, before)
            raise
        if memo is not None:
            memo.store(key, args, code, written, outcome, before)
        return outcome

    def call(self, name: str, args, variant: Variant | None = None) -> ExecResult:
        """Call ``name`` through the dispatch table, or run ``variant``
        directly when one is given.

        On a guard failure the registered cleanup runs (with the effects
        produced so far, always empty for entry guards) and the generic
        variant executes instead.
        """
        with self._lock:
            if variant is None:
                variant = self.table.resolve(name)
            elif variant.base != name:
                raise ValueError(f"variant {variant.variant_id} does not implement {name}")
            args = check_args(variant.code, list(args))
            out = self._execute(variant, args)
            variant.calls += 1
            if out[0] == "ok":
                _, value, ops, effects = out
                variant.total_ops += ops
                return ExecResult(value, ops, False, list(effects), False, variant.variant_id)
            guard_ops = out[1]
            variant.guard_failures += 1
            variant.total_ops += guard_ops
            self.cleanup.run(name, args, [])
            generic = self.table.generic[name]
            g = self._execute(generic, args)
            _, value, ops, effects = g
            generic.calls += 1
            generic.total_ops += ops
            return ExecResult(value, guard_ops + ops, True, list(effects), True, variant.variant_id)

    def call_nested(self, name: str, args) -> ExecResult:
        return self.call(name, args)
