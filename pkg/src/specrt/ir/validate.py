"""Static checks for kernel IR programs."""

from __future__ import annotations

from dataclasses import dataclass

from .nodes import (
    ARRAY_TYPES,
    BOOL,
    ELEMENT_TYPE,
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
    Program,
    Return,
    Store,
    Var,
    walk_stmts,
)


@dataclass(frozen=True)
class Diagnostic:
    function: str | None
    index: str  # statement path, e.g. "3/then/0"; "" for whole-function issues
    rule: str
    message: str

    def __str__(self):
        where = self.function or "<program>"
        if self.index:
            where += f"@{self.index}"
        return f"{where}: {self.rule}: {self.message}"


class _TypeErr(Exception):
    pass


class _Everything(frozenset):
    """Defined-set of an unreachable program point."""


EVERYTHING = _Everything()


def _meet(a, b):
    if isinstance(a, _Everything):
        return b
    if isinstance(b, _Everything):
        return a
    return a & b


class _FunctionChecker:
    def __init__(self, program: Program, fn: FunctionDef):
        self.program = program
        self.fn = fn
        self.diags: list[Diagnostic] = []
        self.types = {}
        self.return_types: set = set()

    def report(self, path, rule, message):
        self.diags.append(Diagnostic(self.fn.name, path, rule, message))

    # expressions ---------------------------------------------------------

    def type_of(self, e, scope, defined, path) -> str:
        if isinstance(e, Int):
            return I64
        if isinstance(e, Float):
            return F64
        if isinstance(e, Bool):
            return BOOL
        if isinstance(e, Var):
            ty = scope.get(e.name)
            if ty is None:
                raise _TypeErr(("undefined variable", f"{e.name!r} is not declared"))
            if ty in ARRAY_TYPES:
                raise _TypeErr(("type mismatch", f"array {e.name!r} used as a scalar"))
            if not isinstance(defined, _Everything) and e.name not in defined:
                raise _TypeErr(("use before definition", f"{e.name!r} may be read before it is assigned"))
            return ty
        if isinstance(e, Load):
            ty = scope.get(e.array)
            if ty not in ARRAY_TYPES:
                raise _TypeErr(("type mismatch", f"load from non-array {e.array!r}"))
            if self.type_of(e.index, scope, defined, path) != I64:
                raise _TypeErr(("type mismatch", "load index must be i64"))
            return ELEMENT_TYPE[ty]
        if isinstance(e, (BinOp, Cmp)):
            lt = self.type_of(e.lhs, scope, defined, path)
            rt = self.type_of(e.rhs, scope, defined, path)
            if lt != rt:
                raise _TypeErr(("type mismatch", f"operands of {e.op} have types {lt} and {rt}"))
            if isinstance(e, BinOp):
                if lt == BOOL:
                    raise _TypeErr(("type mismatch", f"arithmetic {e.op} on bool"))
                if e.op == "%" and lt != I64:
                    raise _TypeErr(("type mismatch", "% is only defined on i64"))
                return lt
            if e.op not in ("==", "!=") and lt == BOOL:
                raise _TypeErr(("type mismatch", f"ordering comparison {e.op} on bool"))
            return BOOL
        raise _TypeErr(("type mismatch", f"unknown expression {e!r}"))

    def expect(self, e, want, scope, defined, path, what) -> bool:
        try:
            got = self.type_of(e, scope, defined, path)
        except _TypeErr as err:
            self.report(path, *err.args[0])
            return False
        if want is not None and got != want:
            self.report(path, "type mismatch", f"{what} must be {want}, got {got}")
            return False
        return True

    # statements ----------------------------------------------------------

    def check_block(self, body, scope, defined, loopvars, prefix, top=False):
        for i, st in enumerate(body):
            path = f"{prefix}{i}"
            if isinstance(st, Guard) and not (top and i == 0):
                self.report(path, "misplaced guard", "guard must be the first statement of a function")
            defined = self.check_stmt(st, scope, defined, loopvars, path)
        return defined

    def check_stmt(self, st, scope, defined, loopvars, path):
        if isinstance(st, Assign):
            self.expect(st.value, scope.get(st.name) if scope.get(st.name) in SCALAR_TYPES else None,
                        scope, defined, path, f"value assigned to {st.name!r}")
            if st.name in loopvars:
                self.report(path, "loop variable reassigned", f"{st.name!r} is assigned inside its loop")
            elif st.name not in scope:
                self.report(path, "undefined variable", f"{st.name!r} is not declared")
            elif scope[st.name] in ARRAY_TYPES:
                self.report(path, "type mismatch", f"cannot assign to array {st.name!r}")
            return defined if isinstance(defined, _Everything) else defined | {st.name}
        if isinstance(st, Store):
            ty = scope.get(st.array)
            if ty not in ARRAY_TYPES:
                self.report(path, "type mismatch", f"store to non-array {st.array!r}")
            else:
                self.expect(st.index, I64, scope, defined, path, "store index")
                self.expect(st.value, ELEMENT_TYPE[ty], scope, defined, path, "stored value")
            return defined
        if isinstance(st, For):
            for part, e in (("lo", st.lo), ("hi", st.hi), ("step", st.step)):
                self.expect(e, I64, scope, defined, path, f"loop {part}")
            if st.var in scope:
                self.report(path, "loop variable shadows", f"{st.var!r} already names a variable")
                return defined
            inner_scope = dict(scope)
            inner_scope[st.var] = I64
            inner_def = defined if isinstance(defined, _Everything) else defined | {st.var}
            self.check_block(st.body, inner_scope, inner_def, loopvars | {st.var}, f"{path}/")
            return defined
        if isinstance(st, If):
            self.expect(st.cond, BOOL, scope, defined, path, "if condition")
            a = self.check_block(st.then, scope, defined, loopvars, f"{path}/then/")
            b = self.check_block(st.else_, scope, defined, loopvars, f"{path}/else/")
            return _meet(a, b)
        if isinstance(st, Return):
            try:
                self.return_types.add(self.type_of(st.value, scope, defined, path))
            except _TypeErr as err:
                self.report(path, *err.args[0])
            return EVERYTHING
        if isinstance(st, Emit):
            self.expect(st.payload, None, scope, defined, path, "emit payload")
            return defined
        if isinstance(st, Guard):
            for c in st.conds:
                self.expect(c, BOOL, scope, defined, path, "guard condition")
            return defined
        if isinstance(st, Call):
            return self.check_call(st, scope, defined, loopvars, path)
        self.report(path, "unknown statement", repr(st))
        return defined

    def check_call(self, st, scope, defined, loopvars, path):
        callee = self.program.functions.get(st.func)
        if callee is None:
            self.report(path, "unknown function", f"call to undefined function {st.func!r}")
            return defined
        if len(st.args) != len(callee.params):
            self.report(path, "arity mismatch",
                        f"{st.func} takes {len(callee.params)} arguments, got {len(st.args)}")
        for arg, (pname, pty) in zip(st.args, callee.params):
            if pty in ARRAY_TYPES:
                if not isinstance(arg, Var) or scope.get(arg.name) != pty:
                    self.report(path, "type mismatch", f"argument {pname!r} must be an {pty} variable")
            else:
                self.expect(arg, pty, scope, defined, path, f"argument {pname!r}")
        if st.into is not None:
            rt = return_type(callee)
            if st.into in loopvars:
                self.report(path, "loop variable reassigned", f"{st.into!r} is assigned inside its loop")
            elif scope.get(st.into) not in SCALAR_TYPES:
                self.report(path, "undefined variable", f"{st.into!r} is not a scalar variable")
            elif rt is None:
                self.report(path, "type mismatch", f"{st.func} returns no value")
            elif rt != scope[st.into]:
                self.report(path, "type mismatch", f"{st.func} returns {rt}, {st.into!r} is {scope[st.into]}")
            if not isinstance(defined, _Everything):
                return defined | {st.into}
        return defined

    def run(self) -> list[Diagnostic]:
        fn = self.fn
        seen = set()
        for n, _ in fn.params + fn.locals:
            if n in seen:
                self.report("", "duplicate name", f"{n!r} declared twice")
            seen.add(n)
        scope = fn.var_types()
        defined = frozenset(fn.param_names())
        self.check_block(fn.body, scope, defined, frozenset(), "", top=True)
        if len(self.return_types) > 1:
            self.report("", "inconsistent return type",
                        f"returns {sorted(self.return_types)}")
        elif self.return_types and not always_returns(fn.body):
            self.report("", "missing return", "some path falls off the end of a value-returning function")
        return self.diags


def always_returns(body) -> bool:
    for st in body:
        if isinstance(st, Return):
            return True
        if isinstance(st, If) and always_returns(st.then) and always_returns(st.else_):
            return True
    return False


def return_type(fn: FunctionDef) -> str | None:
    """Static return type of a function, or None when it returns nothing."""
    scope = fn.var_types()
    for st in walk_stmts(fn.body):
        if isinstance(st, Return):
            return _quick_type(st.value, scope, fn)
    return None


def _quick_type(e, scope, fn):
    if isinstance(e, Int):
        return I64
    if isinstance(e, Float):
        return F64
    if isinstance(e, Bool):
        return BOOL
    if isinstance(e, Var):
        if e.name in scope:
            return scope[e.name]
        return I64  # loop variable
    if isinstance(e, Load):
        return ELEMENT_TYPE.get(scope.get(e.array), I64)
    if isinstance(e, Cmp):
        return BOOL
    return _quick_type(e.lhs, scope, fn)


def _call_graph(program: Program) -> dict:
    return {
        name: sorted({st.func for st in walk_stmts(fn.body) if isinstance(st, Call)})
        for name, fn in program.functions.items()
    }


def _find_cycles(graph: dict) -> list[str]:
    """Functions that sit on a call-graph cycle."""
    state = {}
    on_cycle = []

    def visit(n, stack):
        state[n] = 1
        stack.append(n)
        for m in graph.get(n, ()):
            if m not in graph:
                continue
            if state.get(m) == 1:
                on_cycle.append(m)
            elif m not in state:
                visit(m, stack)
        stack.pop()
        state[n] = 2

    for n in graph:
        if n not in state:
            visit(n, [])
    return sorted(set(on_cycle))


def validate(program: Program) -> list[Diagnostic]:
    """Return every rule violation in ``program``; empty means valid."""
    diags = []
    for fn in program.functions.values():
        diags += _FunctionChecker(program, fn).run()
    for name in _find_cycles(_call_graph(program)):
        diags.append(Diagnostic(name, "", "recursion not allowed", f"{name} is part of a call cycle"))
    for sp in program.specpoints:
        fn = program.functions.get(sp.function)
        if fn is None:
            diags.append(Diagnostic(sp.function, "", "unknown function", f"specpoint on missing function {sp.function!r}"))
        elif fn.var_types().get(sp.var) not in SCALAR_TYPES:
            diags.append(Diagnostic(sp.function, "", "bad specpoint",
                                    f"{sp.var!r} is not a scalar parameter or local"))
    return diags
