"""Canonical text rendering of IR programs."""

from __future__ import annotations

from .nodes import (
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
)

INDENT = "  "


def format_expr(e) -> str:
    if isinstance(e, Int):
        return str(e.value)
    if isinstance(e, Float):
        return repr(float(e.value))
    if isinstance(e, Bool):
        return "true" if e.value else "false"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, (BinOp, Cmp)):
        return f"({e.op} {format_expr(e.lhs)} {format_expr(e.rhs)})"
    if isinstance(e, Load):
        return f"(load {e.array} {format_expr(e.index)})"
    raise TypeError(e)


def _quote(tag: str) -> str:
    return '"' + tag.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _stmt_lines(st, depth: int) -> list[str]:
    pad = INDENT * depth
    if isinstance(st, Assign):
        return [f"{pad}(set {st.name} {format_expr(st.value)})"]
    if isinstance(st, Store):
        return [f"{pad}(store {st.array} {format_expr(st.index)} {format_expr(st.value)})"]
    if isinstance(st, Return):
        return [f"{pad}(return {format_expr(st.value)})"]
    if isinstance(st, Emit):
        return [f"{pad}(emit {_quote(st.tag)} {format_expr(st.payload)})"]
    if isinstance(st, Call):
        args = " ".join(format_expr(a) for a in st.args)
        into = f" into {st.into}" if st.into is not None else ""
        return [f"{pad}(call {st.func} ({args}){into})"]
    if isinstance(st, Guard):
        conds = " ".join(format_expr(c) for c in st.conds)
        ver = f" version {st.version}" if st.version is not None else ""
        return [f"{pad}(guard ({conds}){ver})"]
    if isinstance(st, For):
        head = f"{pad}(for {st.var} {format_expr(st.lo)} {format_expr(st.hi)} {format_expr(st.step)}"
        return _with_block(head, st.body, depth)
    if isinstance(st, If):
        lines = [f"{pad}(if {format_expr(st.cond)}"]
        lines += _with_block(f"{pad}{INDENT}(then", st.then, depth + 1)
        lines += _with_block(f"{pad}{INDENT}(else", st.else_, depth + 1)
        lines[-1] += ")"
        return lines
    raise TypeError(st)


def _with_block(head: str, body, depth: int) -> list[str]:
    if not body:
        return [head + ")"]
    lines = [head]
    for st in body:
        lines += _stmt_lines(st, depth + 1)
    lines[-1] += ")"
    return lines


def format_function(fn: FunctionDef) -> str:
    params = " ".join(f"({n} {t})" for n, t in fn.params)
    locals_ = " ".join(f"({n} {t})" for n, t in fn.locals)
    lines = [f"(func {fn.name} ({params})", f"{INDENT}(locals{' ' if locals_ else ''}{locals_})"]
    for st in fn.body:
        lines += _stmt_lines(st, 1)
    lines[-1] += ")"
    return "\n".join(lines)


def pretty_print(program: Program) -> str:
    parts = [format_function(fn) for fn in program.functions.values()]
    parts += [f"(specpoint {p.function} {p.var} {p.kind})" for p in program.specpoints]
    return "\n\n".join(parts) + "\n"
