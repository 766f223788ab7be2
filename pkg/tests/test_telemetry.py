import collections

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specrt.telemetry import (
    METRICS_HEADER,
    MetricWindow,
    PointProfile,
    WindowAccumulator,
    close_window,
    metrics_csv,
    read_metrics_csv,
    throughput,
    top_k,
)


def test_observe_counts():
    p = PointProfile(("f", "x"))
    p.observe_many([5, 5, 7])
    assert p.histogram == {5: 2, 7: 1}
    assert p.total_observations == 3


def test_disabled_profile_is_frozen():
    p = PointProfile(("f", "x"))
    p.observe(1)
    p.enabled = False
    p.observe_many([1, 2, 3])
    assert p.histogram == {1: 1} and p.total_observations == 1
    p.enabled = True
    p.observe(2)
    assert p.histogram == {1: 1, 2: 1}


def test_capacity_bounds_histogram():
    p = PointProfile(("f", "x"), capacity=256)
    p.observe_many(range(10_000))
    assert len(p.histogram) <= 256
    assert p.total_observations == 10_000
    assert sum(p.histogram.values()) <= p.total_observations


def test_hot_value_survives_a_long_tail():
    p = PointProfile(("f", "x"), capacity=8)
    for i in range(2000):
        p.observe(42 if i % 3 == 0 else 1000 + i)
    assert p.top_k(1)[0][0] == 42


def test_eviction_picks_largest_among_minimum_counts():
    p = PointProfile(("f", "x"), capacity=3)
    p.observe_many([1, 1, 2, 3])
    p.observe(4)  # 2 and 3 both hold the minimum count; 3 goes
    assert p.histogram == {1: 2, 2: 1, 4: 2}


def test_top_k_examples():
    p = PointProfile(("f", "x"))
    p.observe_many([5, 5, 5, 7, 7, 9])
    assert top_k(p, 2) == [(5, 3), (7, 2)]
    assert top_k(PointProfile("e"), 3) == []
    q = PointProfile(("f", "x"))
    q.observe_many([4, 4, 2, 2])
    assert q.top_k(1) == [(2, 2)]
    with pytest.raises(ValueError):
        top_k(q, 0)


def test_frequency_and_reset():
    p = PointProfile(("f", "x"))
    p.observe_many([4] * 9 + [8])
    assert p.frequency(4) == pytest.approx(0.9)
    assert p.frequency(3) == 0.0
    p.guard_failures = 2
    p.reset()
    assert p.histogram == {} and p.total_observations == 0 and p.frequency(4) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 30), max_size=300), st.integers(1, 12))
def test_space_saving_matches_reference(stream, capacity):
    p = PointProfile("x", capacity=capacity)
    p.observe_many(stream)
    ref: dict = {}
    for v in stream:
        if v in ref:
            ref[v] += 1
        elif len(ref) < capacity:
            ref[v] = 1
        else:
            low = min(ref.values())
            victim = max(k for k, c in ref.items() if c == low)
            del ref[victim]
            ref[v] = low + 1
    assert p.histogram == ref
    assert p.total_observations == len(stream)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(-50, 50), max_size=400))
def test_unbounded_profile_is_exact(stream):
    p = PointProfile("x", capacity=None)
    p.observe_many(stream)
    assert p.histogram == dict(collections.Counter(stream))


def test_throughput_examples():
    assert throughput(10, 1000, 10_000) == 100
    assert throughput(0, 0, 10_000) is None
    assert throughput(5, 5 * 60, 1e6) / throughput(5, 5 * 100, 1e6) == pytest.approx(100 / 60)


def test_close_window_resets_and_numbers():
    acc = WindowAccumulator()
    for ops, gf in ((100, False), (300, True)):
        acc.add(ops, gf)
    w = close_window(acc, 1000, "generic")
    assert (w.window_id, w.calls, w.total_ops, w.guard_failures) == (0, 2, 400, 1)
    assert w.throughput == 5.0 and w.ops_per_call == 200
    assert (acc.calls, acc.total_ops, acc.guard_failures) == (0, 0, 0)
    empty = close_window(acc, 1000, "generic")
    assert empty.window_id == 1 and empty.throughput is None


def test_metrics_csv_header_and_round_trip():
    ws = [MetricWindow(0, "generic", 10, 1234, 8103727.714749, 0),
          MetricWindow(1, "f.x=4", 3, 9, None, 3)]
    text = metrics_csv(ws)
    assert text.splitlines()[0] == ",".join(METRICS_HEADER)
    assert text.splitlines()[1] == "0,generic,10,1234,8103727.714749,0"
    assert text.splitlines()[2] == "1,f.x=4,3,9,,3"
    back = read_metrics_csv(text)
    assert [(w.window_id, w.config_id, w.calls, w.total_ops, w.guard_failures) for w in back] == \
        [(0, "generic", 10, 1234, 0), (1, "f.x=4", 3, 9, 3)]
    assert back[1].throughput is None


def test_metrics_csv_wallclock_column():
    ws = [MetricWindow(0, "generic", 1, 2, 3.0, 0, wall_ms=1.5)]
    text = metrics_csv(ws, wallclock=True)
    assert text.splitlines()[0].endswith(",wall_ms")
    assert text.splitlines()[1].endswith(",1.500")
    assert "wall_ms" not in metrics_csv(ws)
