"""Value profiles per specialization point and windowed performance metrics."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

DEFAULT_CAPACITY = 256

METRICS_HEADER = ("window_id", "config_id", "calls", "total_ops", "throughput", "guard_failures")


class PointProfile:
    """Bounded value histogram for one point (space-saving eviction).

    While fewer than ``capacity`` distinct values have been seen the counts
    are exact. Once full, a new value replaces the entry with the lowest
    count (ties: the largest value) and inherits that count plus one, so a
    value that is frequent overall cannot be starved out by the tail.
    ``capacity=None`` keeps every value.
    """

    def __init__(self, point_id, capacity: int | None = DEFAULT_CAPACITY):
        if capacity is not None and capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.point_id = point_id
        self.capacity = capacity
        self.histogram: dict = {}
        self.total_observations = 0
        self.guard_failures = 0
        self.enabled = True
        # count -> set of values holding that count; lets eviction find the
        # minimum without scanning the whole histogram
        self._buckets: dict[int, set] = {}
        self._min = 0

    def _move(self, value, old: int, new: int):
        if old:
            b = self._buckets[old]
            b.discard(value)
            if not b:
                del self._buckets[old]
        self._buckets.setdefault(new, set()).add(value)
        self.histogram[value] = new

    def observe(self, value) -> None:
        if not self.enabled:
            return
        self.total_observations += 1
        count = self.histogram.get(value)
        if count is not None:
            self._move(value, count, count + 1)
            if count == self._min and count not in self._buckets:
                self._min = count + 1
            return
        if self.capacity is None or len(self.histogram) < self.capacity:
            self._move(value, 0, 1)
            self._min = 1
            return
        low = self._min
        victim = max(self._buckets[low])
        self._buckets[low].discard(victim)
        if not self._buckets[low]:
            del self._buckets[low]
        del self.histogram[victim]
        self._move(value, 0, low + 1)
        self._min = low if low in self._buckets else low + 1

    def observe_many(self, values) -> None:
        for v in values:
            self.observe(v)

    def reset(self) -> None:
        self.histogram.clear()
        self._buckets.clear()
        self._min = 0
        self.total_observations = 0

    def frequency(self, value) -> float:
        if not self.total_observations:
            return 0.0
        return self.histogram.get(value, 0) / self.total_observations

    def top_k(self, k: int) -> list:
        return top_k(self, k)


def top_k(profile: PointProfile, k: int) -> list:
    """Most frequent values: descending count, ties by ascending value."""
    if k < 1:
        raise ValueError("k must be >= 1")
    items = sorted(profile.histogram.items(), key=lambda kv: (-kv[1], kv[0]))
    return items[:k]


@dataclass
class MetricWindow:
    window_id: int
    config_id: str
    calls: int
    total_ops: int
    throughput: float | None
    guard_failures: int = 0
    wall_ms: float | None = None

    @property
    def ops_per_call(self) -> float | None:
        return self.total_ops / self.calls if self.calls else None


@dataclass
class WindowAccumulator:
    calls: int = 0
    total_ops: int = 0
    guard_failures: int = 0
    wall_s: float = 0.0
    next_id: int = 0
    extra: dict = field(default_factory=dict)

    def add(self, ops: int, guard_failed: bool = False, wall_s: float = 0.0) -> None:
        self.calls += 1
        self.total_ops += ops
        self.guard_failures += int(guard_failed)
        self.wall_s += wall_s


def throughput(calls: int, total_ops: int, budget_ops: float) -> float | None:
    """Calls that fit in a fixed op budget at this window's mean cost."""
    if calls == 0:
        return None
    if total_ops == 0:
        return float("inf")
    return budget_ops * calls / total_ops


def close_window(acc: WindowAccumulator, budget_ops: float, config_id: str = "",
                 window_id: int | None = None) -> MetricWindow:
    wid = acc.next_id if window_id is None else window_id
    win = MetricWindow(
        window_id=wid,
        config_id=config_id,
        calls=acc.calls,
        total_ops=acc.total_ops,
        throughput=throughput(acc.calls, acc.total_ops, budget_ops),
        guard_failures=acc.guard_failures,
        wall_ms=acc.wall_s * 1000.0,
    )
    acc.calls = acc.total_ops = acc.guard_failures = 0
    acc.wall_s = 0.0
    acc.next_id = wid + 1
    return win


def format_throughput(value: float | None) -> str:
    return "" if value is None else f"{value:.6f}"


def metrics_csv(windows, wallclock: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_HEADER + (("wall_ms",) if wallclock else ()))
    for win in windows:
        row = [win.window_id, win.config_id, win.calls, win.total_ops,
               format_throughput(win.throughput), win.guard_failures]
        if wallclock:
            row.append("" if win.wall_ms is None else f"{win.wall_ms:.3f}")
        w.writerow(row)
    return buf.getvalue()


def read_metrics_csv(text: str) -> list[MetricWindow]:
    rows = list(csv.DictReader(io.StringIO(text)))
    out = []
    for r in rows:
        thr = r["throughput"]
        wall = r.get("wall_ms")
        out.append(MetricWindow(
            window_id=int(r["window_id"]),
            config_id=r["config_id"],
            calls=int(r["calls"]),
            total_ops=int(r["total_ops"]),
            throughput=float(thr) if thr else None,
            guard_failures=int(r["guard_failures"]),
            wall_ms=float(wall) if wall else None,
        ))
    return out
