"""Search over specialization configurations driven by measured windows.

A configuration is a tuple of ((function, var), value) pairs, one per
point in the space; the empty tuple is the all-generic configuration and
is always enumerated first.

Lifecycle: Monitoring (generic installed, profiles fill up) -> Exploring
(the policy installs configurations and scores them by throughput) ->
Exploiting (the winner stays installed and every window is compared
against its recorded score). A sustained deviation sends the explorer
back to Monitoring with an empty scoreboard.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field

import numpy as np

from .specializer import CONFIG, SpecPoint
from .telemetry import MetricWindow, format_throughput

MONITORING = "Monitoring"
EXPLORING = "Exploring"
EXPLOITING = "Exploiting"

DEFAULT_DELTA = 0.15
DEFAULT_DROP_WINDOWS = 3
DEFAULT_FLOOR = 0.5
DEFAULT_CAP = 256

TRACE_HEADER = ("event", "window_id", "config_id", "action", "throughput")

GENERIC = ()


class EmptyCandidates(ValueError):
    def __init__(self, point):
        super().__init__(f"point {point} has no candidate values")
        self.point = point


def config_label(config) -> str:
    if not config:
        return "generic"
    return ",".join(f"{fn}.{var}={val!r}" for (fn, var), val in config)


def config_pins(config) -> dict:
    """Group a configuration by function: {function: {var: value}}."""
    out: dict = {}
    for (fn, var), val in config:
        out.setdefault(fn, {})[var] = val
    return out


def rank_key(config, score: float):
    """Sort key: best first. Throughput, then fewer pins, then lexicographic."""
    return (-score, len(config), config)


def best_of(scoreboard: dict):
    if not scoreboard:
        return None
    return min(scoreboard.items(), key=lambda kv: rank_key(kv[0], kv[1]))


@dataclass
class ConfigSpace:
    points: list
    candidates: dict = field(default_factory=dict)  # point id -> values
    cap: int = DEFAULT_CAP

    def candidate_list(self, point: SpecPoint) -> list:
        vals = self.candidates.get(point.id)
        if vals is None:
            vals = point.candidates or []
        return sorted(set(vals))


def enumerate_configs(space: ConfigSpace) -> list:
    """Generic first, then the Cartesian product of candidate lists in
    lexicographic order (points in declaration order, values ascending),
    cut after ``space.cap`` entries."""
    lists = []
    for p in space.points:
        vals = space.candidate_list(p)
        if not vals:
            raise EmptyCandidates(p.id)
        lists.append([(p.id, v) for v in vals])
    configs = [GENERIC]
    if lists:
        configs.extend(itertools.islice(itertools.product(*lists), space.cap))
    return configs


def guard_feasibility_filter(space: ConfigSpace, profiles: dict, floor: float = DEFAULT_FLOOR):
    """Drop workload-point candidates the workload rarely supplies.

    A pinned workload knob whose value shows up in fewer than ``floor`` of
    the observed calls fails its guard on most calls, so it cannot pay off.
    Config points, and workload points whose value the driver adopts from
    the runtime, are left alone. Returns (filtered candidate map, list of
    point ids left without candidates).
    """
    out = {}
    excluded = []
    for p in space.points:
        vals = space.candidate_list(p)
        prof = profiles.get(p.id)
        if p.kind != CONFIG and not p.driver_coupled and prof is not None and prof.total_observations:
            vals = [v for v in vals if prof.frequency(v) >= floor]
        out[p.id] = vals
        if not vals:
            excluded.append(p.id)
    return out, excluded


# -- policies --------------------------------------------------------------


@dataclass
class ExhaustiveSweep:
    windows_per_config: int = 1

    def __post_init__(self):
        if self.windows_per_config < 1:
            raise ValueError("windows_per_config must be >= 1")

    def start(self, configs):
        self._configs = configs
        self._index = 0
        return configs[0]

    def next_config(self, scoreboard):
        """Config to try next, or None when the sweep is done."""
        self._index += 1
        if self._index >= len(self._configs):
            return None
        return self._configs[self._index]

    @property
    def windows_per_trial(self):
        return self.windows_per_config


@dataclass
class EpsilonGreedy:
    epsilon: float = 0.1
    windows_per_pull: int = 1
    seed: int = 0
    pulls: int | None = None  # default: twice the number of configs

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must be in [0, 1]")
        if self.windows_per_pull < 1:
            raise ValueError("windows_per_pull must be >= 1")

    def start(self, configs):
        self._configs = configs
        self._rng = np.random.default_rng(self.seed)
        self._budget = self.pulls if self.pulls is not None else 2 * len(configs)
        self._done = 1
        return configs[0]

    def next_config(self, scoreboard):
        if self._done >= self._budget:
            return None
        self._done += 1
        explore = self._rng.random() < self.epsilon
        if explore or not scoreboard:
            return self._configs[int(self._rng.integers(len(self._configs)))]
        return best_of(scoreboard)[0]

    @property
    def windows_per_trial(self):
        return self.windows_per_pull


# -- actions ---------------------------------------------------------------


@dataclass(frozen=True)
class Install:
    config: tuple


@dataclass(frozen=True)
class Settle:
    config: tuple
    throughput: float | None = None


@dataclass(frozen=True)
class Restart:
    pass


@dataclass(frozen=True)
class Continue:
    pass


@dataclass
class TraceEvent:
    event: str
    window_id: int
    config_id: str
    action: str
    throughput: float | None


class ExplorerState:
    """Drives one exploration session. Feed it every closed window via
    :meth:`step` and apply the returned action.

    ``restart_on`` chooses the trigger in Exploiting: "drop" restarts when
    throughput stays below (1 - delta) x the settled score, "shift" also
    restarts when it stays above (1 + delta) x, which catches a workload
    change that makes every request cheaper.
    """

    def __init__(self, space: ConfigSpace, policy, delta: float = DEFAULT_DELTA,
                 drop_windows: int = DEFAULT_DROP_WINDOWS, monitor_windows: int = 0,
                 restart_on: str = "drop", floor: float = DEFAULT_FLOOR, profiles=None,
                 top_k: int = 8):
        if not 0.0 < delta < 1.0:
            raise ValueError("delta must be in (0, 1)")
        if drop_windows < 1:
            raise ValueError("drop_windows must be >= 1")
        if restart_on not in ("drop", "shift"):
            raise ValueError("restart_on must be 'drop' or 'shift'")
        self.space = space
        self.policy = policy
        self.delta = delta
        self.drop_windows = drop_windows
        self.monitor_windows = monitor_windows
        self.restart_on = restart_on
        self.floor = floor
        self.profiles = profiles if profiles is not None else {}
        self.top_k = top_k
        self.trace: list[TraceEvent] = []
        self.excluded: list = []
        self.infeasible: set = set()
        self.sessions = 0
        self._begin()

    # state ---------------------------------------------------------------

    def _begin(self):
        self.scoreboard: dict = {}
        self.settled_best = None
        self.current = GENERIC
        self.configs = None
        self._streak = 0
        self._trial_windows = 0
        if self.monitor_windows > 0:
            self.phase = MONITORING
            self._monitored = 0
        else:
            self._enter_exploring()

    def _candidates(self):
        space = ConfigSpace(self.space.points, dict(self.space.candidates), self.space.cap)
        for p in space.points:
            if space.candidates.get(p.id) is None and not p.candidates:
                prof = self.profiles.get(p.id)
                space.candidates[p.id] = [v for v, _ in prof.top_k(self.top_k)] if prof else []
        cands, excluded = guard_feasibility_filter(space, self.profiles, self.floor)
        self.excluded = excluded
        kept = [p for p in space.points if p.id not in excluded]
        return ConfigSpace(kept, {p.id: cands[p.id] for p in kept}, space.cap)

    def _enter_exploring(self):
        self.phase = EXPLORING
        self.sessions += 1
        self.configs = enumerate_configs(self._candidates())
        self.current = self.policy.start(self.configs)
        self._trial_windows = 0

    @property
    def configs_or_empty(self):
        return self.configs or []

    def _record(self, event, window, config, action):
        wid = window.window_id if window is not None else -1
        thr = window.throughput if window is not None else None
        self.trace.append(TraceEvent(event, wid, config_label(config), action, thr))

    def mark_infeasible(self, config) -> None:
        """The runtime could not build this configuration."""
        self.infeasible.add(config)

    # transitions -----------------------------------------------------------

    def step(self, window: MetricWindow):
        if window.config_id != config_label(self.current):
            raise ValueError(f"window measured {window.config_id!r} but {config_label(self.current)!r} is current")
        if self.phase == MONITORING:
            self._monitored += 1
            if self._monitored < self.monitor_windows:
                return Continue()
            self._enter_exploring()
            self._record("install", window, self.current, "install")
            return Install(self.current)

        if self.phase == EXPLORING:
            if self.current in self.infeasible:
                self._record("install", window, self.current, "infeasible")
            elif window.throughput is not None:
                prev = self.scoreboard.get(self.current)
                if prev is None or window.throughput > prev:
                    self.scoreboard[self.current] = window.throughput
            self._trial_windows += 1
            if self._trial_windows < self.policy.windows_per_trial and self.current not in self.infeasible:
                return Continue()
            self._trial_windows = 0
            nxt = self.policy.next_config(self.scoreboard)
            if nxt is None:
                return self._settle(window)
            self.current = nxt
            self._record("install", window, nxt, "install")
            return Install(nxt)

        # Exploiting
        best = self.settled_best[1]
        thr = window.throughput
        deviated = False
        if thr is not None and best is not None:
            deviated = thr < (1.0 - self.delta) * best
            if self.restart_on == "shift":
                deviated = deviated or thr > (1.0 + self.delta) * best
        self._streak = self._streak + 1 if deviated else 0
        if self._streak >= self.drop_windows:
            self._record("restart", window, self.current, "restart")
            self._begin()
            if self.phase == EXPLORING:
                self._record("install", window, self.current, "install")
            return Restart()
        return Continue()

    def _settle(self, window):
        best = best_of(self.scoreboard)
        config, score = best if best is not None else (GENERIC, None)
        self.settled_best = (config, score)
        self.current = config
        self.phase = EXPLOITING
        self._streak = 0
        wid = window.window_id if window is not None else -1
        self.trace.append(TraceEvent("settle", wid, config_label(config), "settle", score))
        return Settle(config, score)

    def finish(self):
        """Stop exploring now: settle on the best configuration seen so far."""
        if self.phase == EXPLOITING:
            return Settle(*self.settled_best)
        return self._settle(None)


def step(state: ExplorerState, window: MetricWindow):
    return state.step(window)


def trace_csv(events) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for e in events:
        w.writerow([e.event, e.window_id, e.config_id, e.action, format_throughput(e.throughput)])
    return buf.getvalue()
