"""IR-to-IR optimization passes used to build specialized variants.

Every pass is a pure function FunctionDef -> FunctionDef. The passes never
fold a division or remainder by zero and never drop an expression that could
trap, so a transformed function traps exactly when the original does.
"""

from __future__ import annotations

from .errors import GuardOnLocal, NotScalar, PinTypeError, SubstitutionRefused, UnknownPoint
from .ir.nodes import (
    BOOL,
    F64,
    I64,
    SCALAR_TYPES,
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
    Return,
    Store,
    Var,
    assigned_names,
    const,
    reads,
    stmt_exprs,
    walk_expr,
    walk_stmts,
    wrap,
)

# -- expression helpers ----------------------------------------------------


def map_expr(e, fn):
    """Rebuild ``e`` bottom-up, applying ``fn`` to every node."""
    if isinstance(e, BinOp):
        e = BinOp(e.op, map_expr(e.lhs, fn), map_expr(e.rhs, fn))
    elif isinstance(e, Cmp):
        e = Cmp(e.op, map_expr(e.lhs, fn), map_expr(e.rhs, fn))
    elif isinstance(e, Load):
        e = Load(e.array, map_expr(e.index, fn))
    return fn(e)


def map_stmt_exprs(st, fn):
    """Apply ``fn`` to each top-level expression of ``st`` (not nested blocks)."""
    if isinstance(st, Assign):
        return Assign(st.name, fn(st.value))
    if isinstance(st, Store):
        return Store(st.array, fn(st.index), fn(st.value))
    if isinstance(st, For):
        return For(st.var, fn(st.lo), fn(st.hi), fn(st.step), st.body)
    if isinstance(st, If):
        return If(fn(st.cond), st.then, st.else_)
    if isinstance(st, Return):
        return Return(fn(st.value))
    if isinstance(st, Call):
        return Call(st.func, tuple(fn(a) for a in st.args), st.into)
    if isinstance(st, Emit):
        return Emit(st.tag, fn(st.payload))
    if isinstance(st, Guard):
        return Guard(tuple(fn(c) for c in st.conds), st.version)
    raise TypeError(st)


def substitute_vars(body, mapping: dict) -> tuple:
    """Replace reads of the variables in ``mapping`` by expressions."""

    def node(e):
        if isinstance(e, Var) and e.name in mapping:
            return mapping[e.name]
        return e

    def expr(e):
        return map_expr(e, node)

    out = []
    for st in body:
        st = map_stmt_exprs(st, expr)
        if isinstance(st, For):
            st = For(st.var, st.lo, st.hi, st.step, substitute_vars(st.body, mapping))
        elif isinstance(st, If):
            st = If(st.cond, substitute_vars(st.then, mapping), substitute_vars(st.else_, mapping))
        out.append(st)
    return tuple(out)


def can_trap(e) -> bool:
    for node in walk_expr(e):
        if isinstance(node, Load):
            return True
        if isinstance(node, BinOp) and node.op in ("/", "%"):
            d = node.rhs
            if not (isinstance(d, (Int, Float)) and d.value != 0):
                return True
    return False


def _idiv(a: int, b: int) -> tuple[int, int]:
    q = abs(a) // abs(b)
    if (a < 0) != (b < 0):
        q = -q
    return wrap(q), wrap(a - q * b)


def eval_binop(op: str, a, b):
    """Reference arithmetic shared by the folder and the interpreter.

    The caller guarantees b != 0 for '/' and '%'.
    """
    if type(a) is int:
        if op == "+":
            return wrap(a + b)
        if op == "-":
            return wrap(a - b)
        if op == "*":
            return wrap(a * b)
        q, r = _idiv(a, b)
        return q if op == "/" else r
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    return a / b


def eval_cmp(op: str, a, b) -> bool:
    if op == "==":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    return a >= b


def _fold_node(e):
    if isinstance(e, BinOp):
        lhs, rhs = e.lhs, e.rhs
        if type(lhs) is type(rhs) and isinstance(lhs, (Int, Float)):
            if e.op in ("/", "%") and rhs.value == 0:
                return e
            return const(eval_binop(e.op, lhs.value, rhs.value))
    elif isinstance(e, Cmp):
        lhs, rhs = e.lhs, e.rhs
        if type(lhs) is type(rhs) and isinstance(lhs, (Int, Float, Bool)):
            return Bool(eval_cmp(e.op, lhs.value, rhs.value))
    return e


def fold_expr(e):
    return map_expr(e, _fold_node)


# -- substitution ----------------------------------------------------------


def _value_type(v) -> str | None:
    if isinstance(v, bool):
        return BOOL
    if isinstance(v, int):
        return I64
    if isinstance(v, float):
        return F64
    return None


def check_pins(f: FunctionDef, pins: dict) -> None:
    types = f.var_types()
    for var, value in pins.items():
        if var not in types:
            raise UnknownPoint(f"{f.name} has no variable {var!r}")
        if types[var] not in SCALAR_TYPES:
            raise NotScalar(f"{f.name}.{var} is an array and cannot be pinned")
        if _value_type(value) != types[var]:
            raise PinTypeError(f"{f.name}.{var} is {types[var]}, cannot pin to {value!r}")


def _assign_count(body, name: str) -> int:
    n = 0
    for st in walk_stmts(body):
        if isinstance(st, Assign) and st.name == name:
            n += 1
        elif isinstance(st, Call) and st.into == name:
            n += 1
    return n


def local_definitions(f: FunctionDef, names) -> dict:
    """Defining expression of each single-assignment local in ``names``."""
    out = {}
    for st in walk_stmts(f.body):
        if isinstance(st, Assign) and st.name in names:
            out[st.name] = st.value
    return out


def substitute(f: FunctionDef, pins: dict) -> FunctionDef:
    """Turn pinned variables into constants.

    A pinned parameter must never be assigned; a pinned local must be
    assigned exactly once, by a plain ``set``.  Anything else is refused
    because the constant would not hold at every read.
    """
    check_pins(f, pins)
    params = set(f.param_names())
    for var in pins:
        n = _assign_count(f.body, var)
        if var in params and n:
            raise SubstitutionRefused(f"parameter {f.name}.{var} is reassigned in the body")
        if var not in params:
            if n != 1 or var not in local_definitions(f, {var}):
                raise SubstitutionRefused(f"local {f.name}.{var} is assigned {n} times; need exactly one set")
    body = f.body
    guard = None
    if body and isinstance(body[0], Guard):
        guard, body = body[0], body[1:]
    mapping = {var: const(v) for var, v in pins.items()}
    body = substitute_vars(body, mapping)
    if guard is not None:
        body = (guard,) + body
    return f.with_body(body)


# -- constant propagation and folding -------------------------------------


def _prop_block(body, env: dict) -> tuple:
    out = []
    for st in body:
        def rewrite(e):
            return fold_expr(substitute_vars_expr(e, env))

        if isinstance(st, Assign):
            v = rewrite(st.value)
            if isinstance(v, (Int, Float, Bool)):
                env[st.name] = v
            else:
                env.pop(st.name, None)
            out.append(Assign(st.name, v))
        elif isinstance(st, If):
            cond = rewrite(st.cond)
            then = _prop_block(st.then, dict(env))
            else_ = _prop_block(st.else_, dict(env))
            for name in assigned_names(st.then) | assigned_names(st.else_):
                env.pop(name, None)
            out.append(If(cond, then, else_))
        elif isinstance(st, For):
            lo, hi, step = rewrite(st.lo), rewrite(st.hi), rewrite(st.step)
            for name in assigned_names(st.body):
                env.pop(name, None)
            inner = dict(env)
            inner.pop(st.var, None)
            out.append(For(st.var, lo, hi, step, _prop_block(st.body, inner)))
        elif isinstance(st, Call):
            out.append(map_stmt_exprs(st, rewrite))
            if st.into is not None:
                env.pop(st.into, None)
        else:
            out.append(map_stmt_exprs(st, rewrite))
    return tuple(out)


def substitute_vars_expr(e, env: dict):
    if not env:
        return e
    return map_expr(e, lambda n: env.get(n.name, n) if isinstance(n, Var) else n)


def propagate_and_fold(f: FunctionDef) -> FunctionDef:
    """Forward constant propagation through assignment chains plus folding.

    Facts do not survive a join: any variable assigned in either arm of an
    If or anywhere in a loop body is unknown afterwards.
    """
    return f.with_body(_prop_block(f.body, {}))


# -- dead code elimination -------------------------------------------------


def _const_trip(st: For) -> int | None:
    if not all(isinstance(x, Int) for x in (st.lo, st.hi, st.step)):
        return None
    lo, hi, step = st.lo.value, st.hi.value, st.step.value
    if step <= 0:
        return None
    return len(range(lo, hi, step))


def _read_names(body) -> set[str]:
    out = set()
    for st in walk_stmts(body):
        for e in stmt_exprs(st):
            out |= reads(e)
        if isinstance(st, Store):
            out.add(st.array)
    return out


def _dce_block(body, dead_locals: set) -> tuple:
    out = []
    for st in body:
        if isinstance(st, If) and isinstance(st.cond, Bool):
            live = st.then if st.cond.value else st.else_
            out.extend(_dce_block(live, dead_locals))
        elif isinstance(st, If):
            then = _dce_block(st.then, dead_locals)
            else_ = _dce_block(st.else_, dead_locals)
            if then or else_ or can_trap(st.cond):
                out.append(If(st.cond, then, else_))
        elif isinstance(st, For):
            if _const_trip(st) == 0:
                continue
            out.append(For(st.var, st.lo, st.hi, st.step, _dce_block(st.body, dead_locals)))
        elif isinstance(st, Assign) and st.name in dead_locals and not can_trap(st.value):
            continue
        else:
            out.append(st)
        if out and isinstance(out[-1], Return):
            break
    return tuple(out)


def eliminate_dead_code(f: FunctionDef) -> FunctionDef:
    """Remove constant-condition branches, unreachable code, zero-trip loops
    and assignments to locals nobody reads. Store, Emit and Call stay."""
    local_names = {n for n, _ in f.locals}
    body = f.body
    while True:
        dead = local_names - _read_names(body)
        new = _dce_block(body, dead)
        if new == body:
            break
        body = new
    used = _read_names(body) | assigned_names(body)
    locals_ = tuple((n, t) for n, t in f.locals if n in used)
    return FunctionDef(f.name, f.params, locals_, body)


# -- loop unrolling --------------------------------------------------------


def _unroll_block(body, cap: int) -> tuple:
    out = []
    for st in body:
        if isinstance(st, For):
            inner = _unroll_block(st.body, cap)
            trip = _const_trip(st)
            if trip is not None and 1 <= trip <= cap:
                for v in range(st.lo.value, st.hi.value, st.step.value):
                    out.extend(substitute_vars(inner, {st.var: Int(v)}))
                continue
            out.append(For(st.var, st.lo, st.hi, st.step, inner))
        elif isinstance(st, If):
            out.append(If(st.cond, _unroll_block(st.then, cap), _unroll_block(st.else_, cap)))
        else:
            out.append(st)
    return tuple(out)


def unroll_loops(f: FunctionDef, unroll_cap: int = 16) -> FunctionDef:
    """Fully unroll loops with constant bounds and 1 <= trip count <= cap."""
    if unroll_cap < 1:
        raise ValueError("unroll_cap must be >= 1")
    return f.with_body(_unroll_block(f.body, unroll_cap))


# -- guards ----------------------------------------------------------------


def guard_conditions(f: FunctionDef, pins: dict, defs: dict | None = None) -> tuple:
    """Entry conditions that establish ``pins`` for a call.

    Pinned parameters are compared directly. A pinned local is compared
    through its defining expression, which must read only never-assigned
    parameters and must not be able to trap.
    """
    params = set(f.param_names())
    assigned = assigned_names(f.body)
    defs = defs or {}
    conds = []
    for var in sorted(pins):
        value = const(pins[var])
        if var in params:
            conds.append(Cmp("==", Var(var), value))
            continue
        expr = defs.get(var)
        if expr is None:
            raise GuardOnLocal(f"{f.name}.{var} has no defining expression to guard on")
        if can_trap(expr) or not reads(expr) <= params - assigned:
            raise GuardOnLocal(f"{f.name}.{var} is not computable at function entry")
        conds.append(Cmp("==", expr, value))
    return tuple(conds)


def insert_guards(f: FunctionDef, pins: dict, guards_enabled: bool = True,
                  defs: dict | None = None) -> FunctionDef:
    """Prefix ``f`` with the specialization check for ``pins``."""
    if not guards_enabled or not pins:
        return f
    conds = guard_conditions(f, pins, defs)
    return f.with_body((Guard(conds),) + tuple(f.body))
