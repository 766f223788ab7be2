"""Node classes for the kernel IR.

All nodes are frozen dataclasses; statement blocks are tuples so that two
programs compare equal exactly when they are structurally identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Union

I64 = "i64"
F64 = "f64"
BOOL = "bool"
ARR_I64 = "arr-i64"
ARR_F64 = "arr-f64"

SCALAR_TYPES = (I64, F64, BOOL)
ARRAY_TYPES = (ARR_I64, ARR_F64)
ELEMENT_TYPE = {ARR_I64: I64, ARR_F64: F64}

ARITH_OPS = ("+", "-", "*", "/", "%")
CMP_OPS = ("==", "!=", "<", "<=", ">", ">=")

INT_MIN = -(1 << 63)
INT_MAX = (1 << 63) - 1


def wrap(x: int) -> int:
    """Reduce an unbounded integer to two's-complement 64-bit."""
    if INT_MIN <= x <= INT_MAX:
        return x
    return ((x - INT_MIN) & 0xFFFFFFFFFFFFFFFF) + INT_MIN


# -- expressions -----------------------------------------------------------

@dataclass(frozen=True)
class Int:
    value: int


@dataclass(frozen=True)
class Float:
    value: float


@dataclass(frozen=True)
class Bool:
    value: bool


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str
    lhs: "Expr"
    rhs: "Expr"


@dataclass(frozen=True)
class Cmp:
    op: str
    lhs: "Expr"
    rhs: "Expr"


@dataclass(frozen=True)
class Load:
    array: str
    index: "Expr"


Const = Union[Int, Float, Bool]
Expr = Union[Int, Float, Bool, Var, BinOp, Cmp, Load]
CONST_TYPES = (Int, Float, Bool)


def const(value) -> Const:
    """Wrap a Python scalar in the matching constant node."""
    if isinstance(value, bool):
        return Bool(value)
    if isinstance(value, int):
        return Int(value)
    if isinstance(value, float):
        return Float(value)
    raise TypeError(f"not a scalar constant: {value!r}")


# -- statements ------------------------------------------------------------

@dataclass(frozen=True)
class Assign:
    name: str
    value: Expr


@dataclass(frozen=True)
class Store:
    array: str
    index: Expr
    value: Expr


@dataclass(frozen=True)
class For:
    var: str
    lo: Expr
    hi: Expr
    step: Expr
    body: tuple


@dataclass(frozen=True)
class If:
    cond: Expr
    then: tuple
    else_: tuple = ()


@dataclass(frozen=True)
class Return:
    value: Expr


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple
    into: str | None = None


@dataclass(frozen=True)
class Emit:
    tag: str
    payload: Expr


@dataclass(frozen=True)
class Guard:
    """Entry check of a specialized variant.

    Every condition must hold, and when ``version`` is set the runtime's
    table version for the function must equal it; otherwise the call falls
    back to the generic variant.
    """

    conds: tuple
    version: int | None = None


Stmt = Union[Assign, Store, For, If, Return, Call, Emit, Guard]


@dataclass(frozen=True)
class FunctionDef:
    name: str
    params: tuple  # of (name, type)
    locals: tuple = ()  # of (name, scalar type)
    body: tuple = ()

    def param_names(self) -> list[str]:
        return [p for p, _ in self.params]

    def var_types(self) -> dict[str, str]:
        types = dict(self.params)
        types.update(dict(self.locals))
        return types

    def with_body(self, body) -> "FunctionDef":
        return FunctionDef(self.name, self.params, self.locals, tuple(body))


@dataclass(frozen=True)
class SpecPointDecl:
    function: str
    var: str
    kind: str  # "workload" or "config"


@dataclass(frozen=True)
class Program:
    functions: dict = field(default_factory=dict)  # name -> FunctionDef
    specpoints: tuple = ()

    def __getitem__(self, name: str) -> FunctionDef:
        return self.functions[name]

    def replace_function(self, fn: FunctionDef) -> "Program":
        funcs = dict(self.functions)
        funcs[fn.name] = fn
        return Program(funcs, self.specpoints)

    def is_pure(self, name: str) -> bool:
        return _is_pure(self, name, set())


def _is_pure(program: Program, name: str, seen: set) -> bool:
    if name in seen:
        return True
    seen.add(name)
    for st in walk_stmts(program.functions[name].body):
        if isinstance(st, (Store, Emit)):
            return False
        if isinstance(st, Call):
            if st.func not in program.functions or not _is_pure(program, st.func, seen):
                return False
    return True


# -- traversal helpers -----------------------------------------------------

def walk_stmts(body) -> Iterator:
    for st in body:
        yield st
        if isinstance(st, For):
            yield from walk_stmts(st.body)
        elif isinstance(st, If):
            yield from walk_stmts(st.then)
            yield from walk_stmts(st.else_)


def stmt_exprs(st) -> tuple:
    """Top-level expressions owned directly by a statement (not its blocks)."""
    if isinstance(st, Assign):
        return (st.value,)
    if isinstance(st, Store):
        return (st.index, st.value)
    if isinstance(st, For):
        return (st.lo, st.hi, st.step)
    if isinstance(st, If):
        return (st.cond,)
    if isinstance(st, Return):
        return (st.value,)
    if isinstance(st, Call):
        return tuple(st.args)
    if isinstance(st, Emit):
        return (st.payload,)
    if isinstance(st, Guard):
        return tuple(st.conds)
    raise TypeError(st)


def walk_expr(e) -> Iterator:
    yield e
    if isinstance(e, (BinOp, Cmp)):
        yield from walk_expr(e.lhs)
        yield from walk_expr(e.rhs)
    elif isinstance(e, Load):
        yield from walk_expr(e.index)


def expr_size(e) -> int:
    if isinstance(e, (BinOp, Cmp)):
        return 1 + expr_size(e.lhs) + expr_size(e.rhs)
    if isinstance(e, Load):
        return 1 + expr_size(e.index)
    return 1


def reads(e) -> set[str]:
    """Scalar variables and arrays read by an expression."""
    out = set()
    for node in walk_expr(e):
        if isinstance(node, Var):
            out.add(node.name)
        elif isinstance(node, Load):
            out.add(node.array)
    return out


def count_stmts(body) -> int:
    return sum(1 for _ in walk_stmts(body))


def count_nodes(body) -> int:
    """Statements plus expression nodes; used for pass logs."""
    n = 0
    for st in walk_stmts(body):
        n += 1 + sum(expr_size(e) for e in stmt_exprs(st))
    return n


def assigned_names(body) -> set[str]:
    out = set()
    for st in walk_stmts(body):
        if isinstance(st, Assign):
            out.add(st.name)
        elif isinstance(st, Call) and st.into is not None:
            out.add(st.into)
    return out
