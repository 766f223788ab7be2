"""The runtime handle that fixed code talks to.

Ten hooks make up the public surface:

    runtime_init, point_specialize, point_disable_spec,
    point_disable_spec_check, point_enable_collection,
    point_disable_collection, update_runtime, get_specialized_function,
    start_exploration, end_exploration

plus ``call`` for running handler code. Calls and hooks are serialized
on one lock. A hook that mutates dispatch takes effect at the next epoch
boundary: immediately when no call is running, otherwise when the running
call returns (hooks can be reached from a cleanup callback mid-call).
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass

from . import explorer as ex
from .engine import Engine, ExecResult, check_args
from .errors import AlreadyExploring, SpecializationError, UnknownFunction, UnknownPoint
from .ir import Program, parse_program
from .specializer import (
    CONFIG,
    DEFAULT_UNROLL_CAP,
    WORKLOAD,
    HotMapSpec,
    PinSet,
    SpecPoint,
    Variant,
    apply_hot_map,
    pin_and_specialize,
)
from .telemetry import DEFAULT_CAPACITY, MetricWindow, PointProfile, WindowAccumulator, close_window

DEFAULT_WINDOW_CALLS = 100
DEFAULT_BUDGET_OPS = 1_000_000_000


@dataclass
class RuntimeOptions:
    unroll_cap: int = DEFAULT_UNROLL_CAP
    window_calls: int = DEFAULT_WINDOW_CALLS
    budget_ops: float = DEFAULT_BUDGET_OPS
    monitor_windows: int = 0
    delta: float = ex.DEFAULT_DELTA
    drop_windows: int = ex.DEFAULT_DROP_WINDOWS
    restart_on: str = "drop"
    floor: float = ex.DEFAULT_FLOOR
    cap: int = ex.DEFAULT_CAP
    top_k: int = 8
    profile_capacity: int | None = DEFAULT_CAPACITY
    backend: str = "interp"
    memoize: bool = False
    wallclock: bool = False


class FunctionHandle:
    """What ``get_specialized_function`` hands out: one resolved variant.

    Calling the handle runs exactly that variant (with its guard and the
    generic fallback), even if dispatch has moved on since.
    """

    def __init__(self, runtime: "Runtime", name: str, variant: Variant):
        self._runtime = runtime
        self.name = name
        self.variant = variant

    @property
    def variant_id(self) -> str:
        return self.variant.variant_id

    @property
    def kind(self) -> str:
        return self.variant.kind

    def __call__(self, *args) -> ExecResult:
        return self._runtime.call(self.name, list(args), variant=self.variant)

    def __repr__(self):
        return f"<FunctionHandle {self.variant_id}>"


class Runtime:
    def __init__(self, program: Program, points=None, options: RuntimeOptions | None = None):
        self.program = program
        self.options = options or RuntimeOptions()
        opts = self.options
        self.engine = Engine(program, backend=opts.backend, memoize=opts.memoize)
        self.points: dict = {}
        for decl in program.specpoints:
            self.points[(decl.function, decl.var)] = SpecPoint(decl.function, decl.var, decl.kind)
        for p in points or ():
            if p.id not in self.points:
                raise UnknownPoint(f"{p.function}.{p.var} is not declared as a specpoint")
            if p.kind != self.points[p.id].kind:
                raise ValueError(f"{p.function}.{p.var} is declared {self.points[p.id].kind}, config says {p.kind}")
            self.points[p.id] = p
        for p in self.points.values():
            p.check(program)
        self.order = list(self.points)  # declaration order, used for labels
        self.profiles = {pid: PointProfile(pid, opts.profile_capacity) for pid in self.points}
        for pid, p in self.points.items():
            self.profiles[pid].enabled = p.collection_enabled
        self._observed: dict = {}  # function -> [(param index, profile)]
        self._reindex_observers()

        self.pins: dict = {}  # function -> {var: value}
        self.hot_maps: dict = {}  # function -> (key var, k, template args)
        self.variant_cache: dict = {}
        self.explorer: ex.ExplorerState | None = None
        self.trace: list = []  # exploration events across sessions
        self.events: list = []  # hook log
        self.windows: list[MetricWindow] = []
        self.acc = WindowAccumulator()
        self._in_call = 0
        self._dirty: set = set()
        self._lock = threading.RLock()
        self._trace_seen = 0
        self._log("runtime_init")

    # bookkeeping ------------------------------------------------------------

    def _log(self, event: str, detail: str = ""):
        self.events.append((event, detail))

    def _point(self, point_id) -> SpecPoint:
        pid = tuple(point_id)
        p = self.points.get(pid)
        if p is None:
            raise UnknownPoint(f"no specialization point {pid[0]}.{pid[1]}")
        return p

    def _reindex_observers(self):
        self._observed = {}
        for pid, prof in self.profiles.items():
            fn = self.program.functions[pid[0]]
            names = fn.param_names()
            if pid[1] in names:
                self._observed.setdefault(pid[0], []).append((names.index(pid[1]), prof))

    def _guard_flags(self, fn: str, pins: dict) -> tuple:
        return tuple(sorted((v, bool(self.points[(fn, v)].guard_enabled)) for v in pins))

    def _build(self, fn: str) -> Variant | None:
        """Variant that should be active for ``fn`` under the current state."""
        if fn in self.hot_maps:
            return self._build_hot_map(fn)
        pins = self.pins.get(fn)
        if not pins:
            return None
        pinset = PinSet.of(fn, pins)
        flags = self._guard_flags(fn, pins)
        key = (fn, pinset, flags, self.options.unroll_cap)
        variant = self.variant_cache.get(key)
        if variant is None:
            variant = pin_and_specialize(self.program, pinset, self.options.unroll_cap, dict(flags))
            self.variant_cache[key] = variant
        return variant

    def _apply(self):
        if self._in_call:
            return
        dirty, self._dirty = self._dirty, set()
        for fn in sorted(dirty):
            try:
                variant = self._build(fn)
            except SpecializationError:
                variant = None
            self.engine.set_active_variant(fn, variant)

    def _mutate_pins(self, fn: str, change):
        """Apply ``change`` to the pin map of ``fn`` and build the result.

        On a specializer error the previous pins are restored, nothing is
        installed, and the error propagates.
        """
        before = dict(self.pins.get(fn, {}))
        change(self.pins.setdefault(fn, {}))
        if not self.pins[fn]:
            del self.pins[fn]
        try:
            self._build(fn)
        except SpecializationError:
            if before:
                self.pins[fn] = before
            else:
                self.pins.pop(fn, None)
            raise
        self._dirty.add(fn)
        self._apply()

    # hooks ------------------------------------------------------------------

    def point_specialize(self, point_id, value) -> None:
        """Pin a point to a value."""
        with self._lock:
            p = self._point(point_id)
            if p.function in self.hot_maps:
                raise ValueError(f"{p.function} carries a hot map; remove it before pinning")
            self._mutate_pins(p.function, lambda pins: pins.__setitem__(p.var, value))
            self._log("point_specialize", f"{p.function}.{p.var}={value!r}")

    def point_disable_spec(self, point_id) -> None:
        """Drop the pin on a point; other pins on the same function stay."""
        with self._lock:
            p = self._point(point_id)
            if p.var in self.pins.get(p.function, {}):
                self._mutate_pins(p.function, lambda pins: pins.pop(p.var))
            self._log("point_disable_spec", f"{p.function}.{p.var}")

    def point_disable_spec_check(self, point_id) -> None:
        """Build future variants for this point without the entry check."""
        with self._lock:
            p = self._point(point_id)
            p.guard_enabled = False
            if p.var in self.pins.get(p.function, {}):
                self._dirty.add(p.function)
                self._apply()
            self._log("point_disable_spec_check", f"{p.function}.{p.var}")

    def point_enable_spec_check(self, point_id) -> None:
        with self._lock:
            p = self._point(point_id)
            p.guard_enabled = True
            if p.var in self.pins.get(p.function, {}):
                self._dirty.add(p.function)
                self._apply()
            self._log("point_enable_spec_check", f"{p.function}.{p.var}")

    def point_enable_collection(self, point_id) -> None:
        with self._lock:
            p = self._point(point_id)
            p.collection_enabled = True
            self.profiles[p.id].enabled = True
            self._log("point_enable_collection", f"{p.function}.{p.var}")

    def point_disable_collection(self, point_id) -> None:
        with self._lock:
            p = self._point(point_id)
            p.collection_enabled = False
            self.profiles[p.id].enabled = False
            self._log("point_disable_collection", f"{p.function}.{p.var}")

    def update_runtime(self) -> None:
        """Rebuild every variant from scratch against the current state."""
        with self._lock:
            self.variant_cache.clear()
            self._dirty.update(self.program.functions)
            self._apply()
            self._log("update_runtime")

    def get_specialized_function(self, name: str) -> FunctionHandle:
        with self._lock:
            variant = self.engine.resolve(name)
            self._log("get_specialized_function", variant.variant_id)
            return FunctionHandle(self, name, variant)

    def start_exploration(self, space: ex.ConfigSpace | None = None, policy=None) -> None:
        """Attach an explorer. ``space`` defaults to every declared point
        with its configured candidates; ``policy`` to a one-window sweep."""
        with self._lock:
            if self.explorer is not None:
                raise AlreadyExploring("an exploration is already running")
            if space is None:
                space = ex.ConfigSpace([self.points[pid] for pid in self.order], cap=self.options.cap)
            for p in space.points:
                self._point(p.id)
            opts = self.options
            state = ex.ExplorerState(
                space, policy or ex.ExhaustiveSweep(), delta=opts.delta,
                drop_windows=opts.drop_windows, monitor_windows=opts.monitor_windows,
                restart_on=opts.restart_on, floor=opts.floor, profiles=self.profiles,
                top_k=opts.top_k)
            self.explorer = state
            self._trace_seen = 0
            self._log("start_exploration", f"{len(space.points)} points")
            if state.phase == ex.EXPLORING:
                state._record("install", None, state.current, "install")
            self._install_config(state.current)
            self._sync_trace()

    def end_exploration(self):
        """Detach the explorer, keeping its best configuration installed.
        Returns the Settle action, or None when nothing was running."""
        with self._lock:
            state = self.explorer
            if state is None:
                return None
            action = state.finish()
            self._install_config(action.config)
            self._sync_trace()
            self.explorer = None
            self._log("end_exploration", ex.config_label(action.config))
            return action

    # exploration plumbing ------------------------------------------------------

    def _sync_trace(self):
        state = self.explorer
        new = state.trace[self._trace_seen:]
        self._trace_seen = len(state.trace)
        self.trace.extend(new)
        for e in new:
            self._log(e.event, e.config_id)

    def _install_config(self, config) -> bool:
        """Make the pins of the explorer's points match ``config``."""
        state = self.explorer
        wanted = ex.config_pins(config)
        touched = set()
        for p in state.space.points:
            if p.var in self.pins.get(p.function, {}):
                del self.pins[p.function][p.var]
                touched.add(p.function)
        for fn, vals in wanted.items():
            self.pins.setdefault(fn, {}).update(vals)
            touched.add(fn)
        for fn in list(self.pins):
            if not self.pins[fn]:
                del self.pins[fn]
        ok = True
        for fn in touched:
            try:
                self._build(fn)
            except SpecializationError:
                ok = False
        if not ok:
            state.mark_infeasible(config)
            for fn in touched:
                self.pins.pop(fn, None)
        self._dirty.update(touched)
        self._apply()
        return ok

    def config_label(self) -> str:
        if self.explorer is not None:
            return ex.config_label(self.explorer.current)
        parts = []
        pinned = [(pid, self.pins[pid[0]][pid[1]]) for pid in self.order
                  if pid[1] in self.pins.get(pid[0], {})]
        if pinned:
            parts.append(ex.config_label(tuple(pinned)))
        for fn in sorted(self.hot_maps):
            parts.append(self.engine.resolve(fn).variant_id)
        return ";".join(parts) if parts else "generic"

    # workload-facing helpers -------------------------------------------------

    def driver_value(self, point_id):
        """Pinned value the request driver should adopt, if any.

        Config points are always driven by the runtime; workload points only
        when marked driver-coupled.
        """
        p = self._point(point_id)
        if p.kind == CONFIG or p.driver_coupled:
            return self.pins.get(p.function, {}).get(p.var)
        return None

    def register_cleanup(self, name: str, callback) -> None:
        self.engine.register_cleanup(name, callback)

    def bump_table_version(self, name: str) -> int:
        with self._lock:
            v = self.engine.bump_table_version(name)
            self._log("bump_table_version", f"{name}={v}")
            return v

    def install_hot_map(self, name: str, key: str, k: int, template: list) -> Variant:
        """Hard-code the ``k`` hottest values of ``key`` into ``name``.

        ``template`` supplies the remaining arguments used to compute each
        hot value's answer on the generic code. Pass a callable to have it
        re-read on every rebuild, so answers follow a replaced table. The
        map is tied to the current table version; ``update_runtime``
        rebuilds it from fresh telemetry.
        """
        with self._lock:
            p = self._point((name, key))
            if self.pins.get(name):
                raise ValueError(f"{name} has pinned points; a hot map replaces the whole entry")
            self.hot_maps[name] = (key, k, template if callable(template) else list(template))
            try:
                variant = self._build_hot_map(name)
            except Exception:
                del self.hot_maps[name]
                raise
            self._dirty.add(name)
            self._apply()
            self._log("install_hot_map", variant.variant_id)
            return variant

    def remove_hot_map(self, name: str) -> None:
        with self._lock:
            if self.hot_maps.pop(name, None) is not None:
                self._dirty.add(name)
                self._apply()

    def _build_hot_map(self, name: str) -> Variant:
        key, k, template = self.hot_maps[name]
        prof = self.profiles[(name, key)]
        hot = [v for v, _ in prof.top_k(k)] if prof.histogram else []
        fn = self.program.functions[name]
        idx = fn.param_names().index(key)
        entries = []
        generic = self.engine.table.generic[name]
        base = list(template() if callable(template) else template)
        for v in hot:
            args = list(base)
            args[idx] = v
            out = self.engine._execute(generic, check_args(fn, args))  # not counted as a handler call
            entries.append((v, out[1]))
        version = self.engine.table_version(name)
        spec = HotMapSpec(name, key, tuple(entries), version)
        cache_key = ("hot", spec)
        variant = self.variant_cache.get(cache_key)
        if variant is None:
            variant = apply_hot_map(self.program, spec)
            self.variant_cache[cache_key] = variant
        return variant

    # calls --------------------------------------------------------------------

    def call(self, name: str, args, variant: Variant | None = None) -> ExecResult:
        with self._lock:
            if name not in self.program.functions:
                raise UnknownFunction(f"no function {name!r}")
            args = list(args)
            for idx, prof in self._observed.get(name, ()):
                if prof.enabled and idx < len(args):
                    prof.observe(args[idx])
            active = variant if variant is not None else self.engine.resolve(name)
            self._in_call += 1
            t0 = time.perf_counter() if self.options.wallclock else 0.0
            try:
                res = self.engine.call(name, args, variant=variant)
            finally:
                self._in_call -= 1
                self._apply()
            wall = time.perf_counter() - t0 if self.options.wallclock else 0.0
            if res.guard_failed:
                for var in active.pinned_vars:
                    prof = self.profiles.get((name, var))
                    if prof is not None:
                        prof.guard_failures += 1
            self.acc.add(res.ops, res.guard_failed, wall)
            if self.acc.calls >= self.options.window_calls:
                self.close_window()
            return res

    def close_window(self) -> MetricWindow | None:
        with self._lock:
            if self.acc.calls == 0:
                return None
            win = close_window(self.acc, self.options.budget_ops, self.config_label())
            if not self.options.wallclock:
                win.wall_ms = None
            self.windows.append(win)
            state = self.explorer
            if state is not None:
                action = state.step(win)
                if isinstance(action, (ex.Install, ex.Settle, ex.Restart)):
                    if isinstance(action, ex.Restart):
                        for prof in self.profiles.values():
                            prof.reset()
                    self._install_config(state.current)
                self._sync_trace()
            return win


def runtime_init(program_text: str | Program, policy=None, **overrides) -> Runtime:
    """Parse and validate a program, then wrap it in a runtime.

    ``policy`` is a mapping in the JSON config layout (see ``config``) or
    None for a hooks-only runtime without exploration.
    """
    from .config import runtime_from_policy

    program = program_text if isinstance(program_text, Program) else parse_program(program_text)
    return runtime_from_policy(program, policy or {}, **overrides)


__all__ = [
    "FunctionHandle",
    "Runtime",
    "RuntimeOptions",
    "runtime_init",
    "WORKLOAD",
    "CONFIG",
]
