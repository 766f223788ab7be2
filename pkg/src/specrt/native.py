"""Native backend: lower IR functions to C and load them with ctypes.

The generated code keeps the reference interpreter's semantics exactly:
wrapping 64-bit integers (compiled with -fwrapv), truncating division,
traps reported with the same statement path, and the same op count. Only
leaf functions without Emit are lowered; the engine runs everything else
on the interpreter.

Compiled objects are cached by source hash, in memory and on disk, so a
variant is compiled at most once per machine.
"""

from __future__ import annotations

import ctypes
import hashlib
import math
import os
import shutil
import subprocess
import tempfile
import threading
from pathlib import Path

import numpy as np

from .errors import Trap
from .ir.nodes import (
    ARR_F64,
    ARRAY_TYPES,
    BOOL,
    F64,
    INT_MIN,
    Assign,
    BinOp,
    Bool,
    Cmp,
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
    expr_size,
    stmt_exprs,
    walk_stmts,
)
from .ir.validate import return_type

CFLAGS = ("-O1", "-fwrapv", "-fno-strict-aliasing", "-shared", "-fPIC")

_PRELUDE = """\
#include <stdint.h>
#include <math.h>
static inline int64_t sr_div(int64_t a, int64_t b) {
    return b == -1 ? (int64_t)(0ULL - (uint64_t)a) : a / b;
}
static inline int64_t sr_rem(int64_t a, int64_t b) {
    return b == -1 ? 0 : a % b;
}
"""


class CompilerUnavailable(RuntimeError):
    pass


def find_compiler() -> str | None:
    cc = os.environ.get("SPECRT_CC")
    if cc:
        return shutil.which(cc) or cc
    for name in ("cc", "gcc", "clang"):
        path = shutil.which(name)
        if path:
            return path
    return None


def available() -> bool:
    return find_compiler() is not None


def cache_dir() -> Path:
    root = os.environ.get("SPECRT_CACHE_DIR")
    path = Path(root) if root else Path(tempfile.gettempdir()) / f"specrt-native-{os.getuid()}"
    path.mkdir(parents=True, exist_ok=True)
    return path


def _c_type(ty: str) -> str:
    return "double" if ty == F64 else "int64_t"


class _Lowering:
    def __init__(self, fn: FunctionDef):
        self.fn = fn
        self.types = fn.var_types()
        self.names = {}
        for i, (n, _) in enumerate(fn.params + fn.locals):
            self.names[n] = f"v{i}"
        self.loop_vars = []
        for st in walk_stmts(fn.body):
            if isinstance(st, For) and st.var not in self.names:
                self.names[st.var] = f"v{len(self.names)}"
                self.loop_vars.append(st.var)
        self.temps = []  # (name, ctype)
        self.sites = [None]  # status codes >= 1 index trap sites
        self.lines = []
        self.pending = 0
        self.rtype = return_type(fn)

    def temp(self, ctype: str) -> str:
        name = f"t{len(self.temps)}"
        self.temps.append((name, ctype))
        return name

    def emit(self, depth: int, text: str):
        self.lines.append("    " * depth + text)

    def trap(self, depth: int, cond: str, kind: str, path: str):
        self.sites.append((kind, path))
        self.emit(depth, f"if ({cond}) {{ status = {len(self.sites) - 1}; goto done; }}")

    def flush(self, depth: int):
        if self.pending:
            self.emit(depth, f"ops += {self.pending};")
            self.pending = 0

    def is_float(self, e) -> bool:
        while isinstance(e, BinOp):
            e = e.lhs
        if isinstance(e, Float):
            return True
        if isinstance(e, Var):
            return self.types.get(e.name) == F64
        if isinstance(e, Load):
            return self.types.get(e.array) == ARR_F64
        return False

    def expr(self, e, depth: int, path: str) -> str:
        """Emit trapping sub-expressions into temporaries, in evaluation
        order, and return a side-effect-free C expression for the rest."""
        if isinstance(e, Int):
            if e.value == INT_MIN:
                return "(-9223372036854775807LL - 1)"
            return f"({e.value}LL)"
        if isinstance(e, Float):
            v = e.value
            if math.isnan(v):
                return "NAN"
            if math.isinf(v):
                return "INFINITY" if v > 0 else "(-INFINITY)"
            return f"({v!r})" if ("." in repr(v) or "e" in repr(v)) else f"({v!r}.0)"
        if isinstance(e, Bool):
            return "1" if e.value else "0"
        if isinstance(e, Var):
            return self.names[e.name]
        if isinstance(e, Load):
            arr = self.names[e.array]
            idx = self.temp("int64_t")
            self.emit(depth, f"{idx} = {self.expr(e.index, depth, path)};")
            self.trap(depth, f"{idx} < 0 || {idx} >= {arr}_n", "oob_index", path)
            is_f = self.types.get(e.array) == ARR_F64
            t = self.temp("double" if is_f else "int64_t")
            self.emit(depth, f"{t} = {arr}[{idx}];")
            return t
        if isinstance(e, Cmp):
            a = self.expr(e.lhs, depth, path)
            b = self.expr(e.rhs, depth, path)
            return f"(int64_t)({a} {e.op} {b})"
        if isinstance(e, BinOp):
            is_f = self.is_float(e)
            ct = "double" if is_f else "int64_t"
            if e.op in ("/", "%"):
                ta = self.temp(ct)
                self.emit(depth, f"{ta} = {self.expr(e.lhs, depth, path)};")
                tb = self.temp(ct)
                self.emit(depth, f"{tb} = {self.expr(e.rhs, depth, path)};")
                self.trap(depth, f"{tb} == 0", "div_by_zero", path)
                t = self.temp(ct)
                if is_f:
                    self.emit(depth, f"{t} = {ta} / {tb};")
                else:
                    fn = "sr_div" if e.op == "/" else "sr_rem"
                    self.emit(depth, f"{t} = {fn}({ta}, {tb});")
                return t
            a = self.expr(e.lhs, depth, path)
            b = self.expr(e.rhs, depth, path)
            return f"({a} {e.op} {b})"
        raise TypeError(e)

    def cost(self, st) -> int:
        return 1 + sum(expr_size(e) for e in stmt_exprs(st))

    def block(self, body, depth: int, prefix: str, start: int = 0):
        for i in range(start, len(body)):
            self.stmt(body[i], depth, f"{prefix}{i}")
        self.flush(depth)

    def stmt(self, st, depth: int, path: str):
        # ops for a straight-line run are added in one go; a trap discards
        # the count, so only exits and control flow need an exact total
        self.pending += self.cost(st)
        if isinstance(st, Assign):
            v = self.expr(st.value, depth, path)
            self.emit(depth, f"{self.names[st.name]} = {v};")
        elif isinstance(st, Store):
            arr = self.names[st.array]
            idx = self.temp("int64_t")
            self.emit(depth, f"{idx} = {self.expr(st.index, depth, path)};")
            v = self.expr(st.value, depth, path)
            self.trap(depth, f"{idx} < 0 || {idx} >= {arr}_n", "oob_index", path)
            self.emit(depth, f"{arr}[{idx}] = {v};")
        elif isinstance(st, Return):
            v = self.expr(st.value, depth, path)
            self.flush(depth)
            slot = "*out_f" if self.rtype == F64 else "*out_i"
            self.emit(depth, f"{slot} = {v}; goto done;")
        elif isinstance(st, If):
            c = self.expr(st.cond, depth, path)
            self.flush(depth)
            self.emit(depth, f"if ({c}) {{")
            self.block(st.then, depth + 1, f"{path}/then/")
            self.emit(depth, "} else {")
            self.block(st.else_, depth + 1, f"{path}/else/")
            self.emit(depth, "}")
        elif isinstance(st, For):
            lo, hi, step = (self.temp("int64_t") for _ in range(3))
            self.emit(depth, f"{lo} = {self.expr(st.lo, depth, path)};")
            self.emit(depth, f"{hi} = {self.expr(st.hi, depth, path)};")
            self.emit(depth, f"{step} = {self.expr(st.step, depth, path)};")
            self.trap(depth, f"{step} <= 0", "bad_step", path)
            self.flush(depth)
            # unsigned trip count: matches range() without overflowing near the limits
            trips, k = self.temp("uint64_t"), self.temp("uint64_t")
            self.emit(depth, f"{trips} = 0;")
            self.emit(depth, f"if ({hi} > {lo}) {{ uint64_t d = (uint64_t){hi} - (uint64_t){lo}; "
                             f"{trips} = d / (uint64_t){step} + (d % (uint64_t){step} != 0); }}")
            self.emit(depth, f"for ({k} = 0; {k} < {trips}; {k}++) {{")
            self.emit(depth + 1, f"{self.names[st.var]} = (int64_t)((uint64_t){lo} + {k} * (uint64_t){step});")
            self.pending += 1
            self.block(st.body, depth + 1, f"{path}/")
            self.emit(depth, "}")
            self.pending += 1
        else:
            raise NotImplementedError(f"cannot lower {type(st).__name__}")

    def lower(self, symbol: str) -> str:
        fn = self.fn
        sig = []
        for name, ty in fn.params:
            v = self.names[name]
            if ty in ARRAY_TYPES:
                sig.append(f"{'double' if ty == ARR_F64 else 'int64_t'} *restrict {v}")
                sig.append(f"int64_t {v}_n")
            else:
                sig.append(f"{_c_type(ty)} {v}")
        sig += ["int64_t table_version", "int64_t *out_ops", "int64_t *out_i", "double *out_f"]

        body = fn.body
        start = 0
        self.emit(1, "int64_t status = 0, ops = 0;")
        if body and isinstance(body[0], Guard):
            g = body[0]
            start = 1
            self.emit(1, f"ops += {1 + sum(expr_size(c) for c in g.conds) + (g.version is not None)};")
            self.emit(1, "int ok = 1;")
            for c in g.conds:
                self.emit(1, f"ok &= ({self.expr(c, 1, '0')}) != 0;")
            if g.version is not None:
                self.emit(1, f"ok &= table_version == {g.version}LL;")
            self.emit(1, "if (!ok) { status = -1; goto done; }")
        self.block(body, 1, "", start)
        self.emit(0, "done:")
        self.emit(1, "*out_ops = ops;")
        self.emit(1, "return status;")

        decls = []
        for name, ty in fn.locals:
            decls.append(f"    {_c_type(ty)} {self.names[name]} = 0;")
        for name in self.loop_vars:
            decls.append(f"    int64_t {self.names[name]} = 0;")
        for name, ct in self.temps:
            decls.append(f"    {ct} {name} = 0;")
        head = f"int64_t {symbol}({', '.join(sig)}) {{"
        return "\n".join([_PRELUDE, head, *decls, *self.lines, "}", ""])


def lower_function(fn: FunctionDef, symbol: str = "kernel") -> tuple[str, list]:
    low = _Lowering(fn)
    return low.lower(symbol), low.sites


_loaded: dict = {}
_build_lock = threading.Lock()


def _build(src: str) -> ctypes.CDLL:
    digest = hashlib.sha256(("\0".join(CFLAGS) + src).encode()).hexdigest()[:24]
    with _build_lock:
        lib = _loaded.get(digest)
        if lib is not None:
            return lib
        out = cache_dir() / f"k{digest}.so"
        if not out.exists():
            cc = find_compiler()
            if cc is None:
                raise CompilerUnavailable("no C compiler found (set SPECRT_CC)")
            with tempfile.TemporaryDirectory(dir=cache_dir()) as tmp:
                c_path = Path(tmp) / "k.c"
                c_path.write_text(src)
                so_tmp = Path(tmp) / "k.so"
                proc = subprocess.run([cc, *CFLAGS, "-o", str(so_tmp), str(c_path), "-lm"],
                                      capture_output=True, text=True)
                if proc.returncode != 0:
                    raise RuntimeError(f"native compile failed:\n{proc.stderr}")
                os.replace(so_tmp, out)  # atomic, safe against concurrent builders
        lib = ctypes.CDLL(str(out))
        _loaded[digest] = lib
        return lib


def compile_function(fn: FunctionDef):
    """Return run(args, table_version) -> (value, ops, effects), or None when
    a particular call has to go to the interpreter (see ``run``).

    Raises Trap on a fault and engine.GuardFailed when the entry check fails.
    """
    from .engine import GuardFailed

    src, sites = lower_function(fn)
    kernel = _build(src).kernel
    argtypes = []
    for _, ty in fn.params:
        if ty in ARRAY_TYPES:
            argtypes += [ctypes.c_void_p, ctypes.c_int64]
        elif ty == F64:
            argtypes.append(ctypes.c_double)
        else:
            argtypes.append(ctypes.c_int64)
    argtypes += [ctypes.c_int64, ctypes.c_void_p, ctypes.c_void_p, ctypes.c_void_p]
    kernel.argtypes = argtypes
    kernel.restype = ctypes.c_int64

    written = {st.array for st in walk_stmts(fn.body) if isinstance(st, Store)}
    array_params = [(i, name in written) for i, (name, ty) in enumerate(fn.params) if ty in ARRAY_TYPES]
    rtype = return_type(fn)
    name = fn.name

    def run(args, table_version):
        for i, w in array_params:
            a = args[i]
            if not a.flags.c_contiguous or (w and not a.flags.writeable):
                return None
        # a written buffer aliased under another parameter breaks restrict
        for i, w in array_params:
            if w:
                for j, _ in array_params:
                    if j != i and np.may_share_memory(args[i], args[j]):
                        return None
        cargs = []
        for a, (_, ty) in zip(args, fn.params):
            if ty in ARRAY_TYPES:
                cargs += [a.ctypes.data, a.shape[0]]
            else:
                cargs.append(a)
        ops = ctypes.c_int64(0)
        iv = ctypes.c_int64(0)
        fv = ctypes.c_double(0.0)
        status = kernel(*cargs, table_version, ctypes.addressof(ops), ctypes.addressof(iv),
                        ctypes.addressof(fv))
        if status == 0:
            if rtype is None:
                value = None
            elif rtype == F64:
                value = fv.value
            elif rtype == BOOL:
                value = bool(iv.value)
            else:
                value = iv.value
            return value, ops.value, []
        if status == -1:
            raise GuardFailed(ops.value)
        kind, path = sites[status]
        raise Trap(kind, name, path)

    return run
