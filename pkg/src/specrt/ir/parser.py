"""Reader for the parenthesized textual IR."""

from __future__ import annotations

import re

from .nodes import (
    ARITH_OPS,
    CMP_OPS,
    INT_MAX,
    INT_MIN,
    SCALAR_TYPES,
    ARRAY_TYPES,
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
    SpecPointDecl,
    Store,
    Var,
)


class IRSyntaxError(Exception):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


class ValidationError(Exception):
    def __init__(self, function: str | None, message: str, diagnostics=()):
        where = function if function is not None else "<program>"
        super().__init__(f"{where}: {message}")
        self.function = function
        self.message = message
        self.diagnostics = list(diagnostics)


_TOKEN = re.compile(r'\s+|;[^\n]*|\(|\)|"(?:[^"\\]|\\.)*"|[^\s()";]+')
_INT = re.compile(r"^-?\d+$")
_FLOAT = re.compile(r"^-?(\d+\.\d*|\.\d+|\d+(\.\d*)?[eE][-+]?\d+|inf|nan)$")
_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_.]*$")
_RESERVED = {"true", "false", "inf", "nan"}


class Atom(str):
    """A bare token that remembers its source line."""

    line: int


class Str(str):
    line: int


class SList(list):
    line: int


def _atom(cls, text, line):
    a = cls(text)
    a.line = line
    return a


def read_sexprs(text: str) -> list:
    stack = [SList()]
    stack[0].line = 1
    line = 1
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise IRSyntaxError(line, f"unexpected character {text[pos]!r}")
        tok = m.group(0)
        pos = m.end()
        if tok[0].isspace() or tok[0] == ";":
            line += tok.count("\n")
            continue
        if tok == "(":
            lst = SList()
            lst.line = line
            stack[-1].append(lst)
            stack.append(lst)
        elif tok == ")":
            if len(stack) == 1:
                raise IRSyntaxError(line, "unbalanced ')'")
            stack.pop()
        elif tok[0] == '"':
            body = re.sub(r"\\(.)", r"\1", tok[1:-1])
            stack[-1].append(_atom(Str, body, line))
        else:
            stack[-1].append(_atom(Atom, tok, line))
    if len(stack) != 1:
        raise IRSyntaxError(stack[-1].line, "unclosed '('")
    return stack[0]


def _line(x) -> int:
    return getattr(x, "line", 0)


def _name(x) -> str:
    if not isinstance(x, Atom) or not _NAME.match(x) or x in _RESERVED:
        raise IRSyntaxError(_line(x), f"expected a name, got {_show(x)}")
    return str(x)


def _show(x) -> str:
    if isinstance(x, list):
        return "(...)"
    return repr(str(x))


def _expect_list(x, what: str) -> SList:
    if not isinstance(x, list):
        raise IRSyntaxError(_line(x), f"expected {what}, got {_show(x)}")
    return x


def parse_expr(x):
    if isinstance(x, Str):
        raise IRSyntaxError(x.line, "string literal not allowed in expression")
    if isinstance(x, Atom):
        if x == "true":
            return Bool(True)
        if x == "false":
            return Bool(False)
        if _INT.match(x):
            v = int(x)
            if not INT_MIN <= v <= INT_MAX:
                raise IRSyntaxError(x.line, f"integer literal out of range: {x}")
            return Int(v)
        if _FLOAT.match(x):
            return Float(float(x))
        return Var(_name(x))
    if not x:
        raise IRSyntaxError(_line(x), "empty expression")
    head = x[0]
    if head == "load":
        if len(x) != 3:
            raise IRSyntaxError(x.line, "load takes an array name and an index")
        return Load(_name(x[1]), parse_expr(x[2]))
    if isinstance(head, Atom) and (head in ARITH_OPS or head in CMP_OPS):
        if len(x) != 3:
            raise IRSyntaxError(x.line, f"operator {head} takes two operands")
        cls = BinOp if head in ARITH_OPS else Cmp
        return cls(str(head), parse_expr(x[1]), parse_expr(x[2]))
    raise IRSyntaxError(x.line, f"unknown expression form {_show(head)}")


def _block(items) -> tuple:
    return tuple(parse_stmt(s) for s in items)


def parse_stmt(x):
    x = _expect_list(x, "a statement")
    if not x or not isinstance(x[0], Atom):
        raise IRSyntaxError(_line(x), "statement must start with a keyword")
    head = x[0]
    if head == "set":
        if len(x) != 3:
            raise IRSyntaxError(x.line, "set takes a name and an expression")
        return Assign(_name(x[1]), parse_expr(x[2]))
    if head == "store":
        if len(x) != 4:
            raise IRSyntaxError(x.line, "store takes an array, an index and a value")
        return Store(_name(x[1]), parse_expr(x[2]), parse_expr(x[3]))
    if head == "for":
        if len(x) < 5:
            raise IRSyntaxError(x.line, "for takes a variable, lo, hi and step")
        return For(_name(x[1]), parse_expr(x[2]), parse_expr(x[3]), parse_expr(x[4]), _block(x[5:]))
    if head == "if":
        if len(x) not in (3, 4):
            raise IRSyntaxError(x.line, "if takes a condition, (then ...) and optional (else ...)")
        then = _expect_list(x[2], "(then ...)")
        if not then or then[0] != "then":
            raise IRSyntaxError(_line(then), "expected (then ...)")
        else_ = ()
        if len(x) == 4:
            el = _expect_list(x[3], "(else ...)")
            if not el or el[0] != "else":
                raise IRSyntaxError(_line(el), "expected (else ...)")
            else_ = _block(el[1:])
        return If(parse_expr(x[1]), _block(then[1:]), else_)
    if head == "return":
        if len(x) != 2:
            raise IRSyntaxError(x.line, "return takes one expression")
        return Return(parse_expr(x[1]))
    if head == "call":
        if len(x) not in (3, 5):
            raise IRSyntaxError(x.line, "call takes a name, (args ...) and optional 'into NAME'")
        args = tuple(parse_expr(a) for a in _expect_list(x[2], "(args ...)"))
        into = None
        if len(x) == 5:
            if x[3] != "into":
                raise IRSyntaxError(x.line, "expected 'into'")
            into = _name(x[4])
        return Call(_name(x[1]), args, into)
    if head == "emit":
        if len(x) != 3 or not isinstance(x[1], Str):
            raise IRSyntaxError(x.line, 'emit takes a "tag" and an expression')
        return Emit(str(x[1]), parse_expr(x[2]))
    if head == "guard":
        if len(x) not in (2, 4):
            raise IRSyntaxError(x.line, "guard takes (conds ...) and optional 'version N'")
        conds = tuple(parse_expr(c) for c in _expect_list(x[1], "(conds ...)"))
        version = None
        if len(x) == 4:
            if x[2] != "version" or not isinstance(x[3], Atom) or not _INT.match(x[3]):
                raise IRSyntaxError(x.line, "expected 'version N'")
            version = int(x[3])
        return Guard(conds, version)
    raise IRSyntaxError(x.line, f"unknown statement {_show(head)}")


def _typed_names(lst, allowed, what) -> tuple:
    out = []
    for item in _expect_list(lst, f"({what} ...)"):
        item = _expect_list(item, f"({what}-name type)")
        if len(item) != 2:
            raise IRSyntaxError(_line(item), f"expected ({what}-name type)")
        ty = str(item[1])
        if ty not in allowed:
            raise IRSyntaxError(_line(item), f"unknown type {ty!r}")
        out.append((_name(item[0]), ty))
    return tuple(out)


def parse_function(x) -> FunctionDef:
    if len(x) < 3:
        raise IRSyntaxError(x.line, "func takes a name and a parameter list")
    name = _name(x[1])
    params = _typed_names(x[2], SCALAR_TYPES + ARRAY_TYPES, "param")
    rest = list(x[3:])
    locals_ = ()
    if rest and isinstance(rest[0], list) and rest[0] and rest[0][0] == "locals":
        locals_ = _typed_names(SList(rest[0][1:]), SCALAR_TYPES, "local")
        rest = rest[1:]
    return FunctionDef(name, params, locals_, _block(rest))


def parse_forms(text: str) -> Program:
    """Parse without validating."""
    functions = {}
    points = []
    for form in read_sexprs(text):
        form = _expect_list(form, "a top-level form")
        if not form:
            raise IRSyntaxError(form.line, "empty top-level form")
        head = form[0]
        if head == "func":
            fn = parse_function(form)
            if fn.name in functions:
                raise IRSyntaxError(form.line, f"duplicate function {fn.name!r}")
            functions[fn.name] = fn
        elif head == "specpoint":
            if len(form) != 4 or form[3] not in ("workload", "config"):
                raise IRSyntaxError(form.line, "expected (specpoint FUNC VAR workload|config)")
            points.append(SpecPointDecl(_name(form[1]), _name(form[2]), str(form[3])))
        else:
            raise IRSyntaxError(form.line, f"unknown top-level form {_show(head)}")
    return Program(functions, tuple(points))


def parse_program(text: str) -> Program:
    """Parse and validate IR source text.

    Raises IRSyntaxError for malformed text and ValidationError when the
    program breaks a typing or well-formedness rule.
    """
    from .validate import validate

    program = parse_forms(text)
    diags = validate(program)
    if diags:
        first = diags[0]
        raise ValidationError(first.function, f"{first.rule}: {first.message}", diags)
    return program
