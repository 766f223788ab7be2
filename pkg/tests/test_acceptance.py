"""Acceptance criteria, one check per criterion.

Each check prints a single ``PASS``/``FAIL`` line with the measured numbers,
then asserts. Run under pytest or directly: ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import functools
import hashlib
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from equiv import check_case  # noqa: E402
from progen import ProgramGen  # noqa: E402
from specrt import explorer as ex  # noqa: E402
from specrt import native  # noqa: E402
from specrt.bench import run_config, updated_rules  # noqa: E402
from specrt.config import load_config  # noqa: E402
from specrt.engine import Engine  # noqa: E402
from specrt.errors import UnknownPoint  # noqa: E402
from specrt.ir import parse_program, pretty_print  # noqa: E402
from specrt.runtime import runtime_init  # noqa: E402
from specrt.specializer import PinSet, pin_and_specialize  # noqa: E402
from specrt.workloads import (  # noqa: E402
    Phase,
    PipelineDriver,
    RequestStream,
    RuleTable,
    build_batch_pipeline,
    build_mmul,
    gen_stream,
    synthetic_addresses,
    synthetic_rules,
    Uniform,
)
from specrt.workloads.batch_pipeline import BATCH_SIZES  # noqa: E402
from specrt.workloads.mmul import MmulDriver, from_tiled, make_matrices  # noqa: E402

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

# frozen from reference-evaluator runs
MMUL_N64_S4_GENERIC_OPS = 5_803_631
MMUL_N64_S4_PINNED_OPS = 4_017_775
LPM_GENERIC_OPS = 49_687_441  # windows 0-9, 10,000 packets, before the hot map
LPM_HOT_OPS = 187_484_493  # windows 10-89, 80,000 packets, hot map active
LPM_REDUCTION = 1 - (LPM_HOT_OPS / 80_000) / (LPM_GENERIC_OPS / 10_000)
PIPELINE_ARGMIN = (8, 16, 4)
CSV_SHA256 = {
    "mmul_phase_switch": ("0f5a2d51da88ff870d0b8475cc2d1a9870a73be6dac72958ca4391aef75f21b1",
                          "f3b296acc10081e72a5ddb1f137c02e2c161cd702689f17d7a3a4584dd798ad5"),
    "lpm_hotmap": ("15ba3685dfbce8d7ffa38964077860e9e7900c11299533482ebe82bc4bcc5ddc",
                   "8e9a539cc352c1e53360953cca25ddc8e2ba78f30cc132872093bc0a1a45acc5"),
    "pipeline_sweep": ("313e37de4cd68e80177211616c3bbe1c4a161e03f0b06e875d2de963d110abc0",
                       "fbbd4fadf5189af8f7784beede70c2af5d09f4381ec5f9c465ca95e0b4718e04"),
}


def sha(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


@functools.cache
def scenario(name: str):
    """First run of a shipped config, with a compact per-call log."""
    calls = []
    t0 = time.perf_counter()
    result = run_config(load_config(CONFIGS / f"{name}.json"),
                        on_call=lambda i, req, res: calls.append((req, res.value, res.guard_failed)))
    return result, calls, time.perf_counter() - t0


# -- 1 ------------------------------------------------------------------------


def criterion_1():
    t0 = time.perf_counter()
    triples = violating = skipped = 0
    failures = []
    seed = 10_000
    while triples < 1000:
        gen = ProgramGen(seed)
        checked, bad = check_case(gen, gen.case(), satisfying=2, violating=1)
        seed += 1
        if checked is None:
            skipped += 1
            continue
        triples += checked
        violating += 1
        failures += bad
    dt = time.perf_counter() - t0
    ok = not failures and dt < 60
    return ok, (f"{triples} satisfying + {violating} violating triples over {seed - 10_000} programs, "
                f"{len(failures)} mismatches, {skipped} oversized, {dt:.1f}s")


# -- 2 ------------------------------------------------------------------------


def criterion_2():
    program = build_mmul()
    stream = RequestStream("mmul", 11, (Phase(300, {"s": Uniform((1, 2, 8))}),))
    reqs = list(gen_stream(stream))
    n = 8
    a, b = make_matrices(n, 11)
    want = (a @ b).tolist()

    def drive(pin):
        rt = runtime_init(program, {"window_calls": 100})
        if pin:
            rt.point_specialize(("matmul", "s"), 4)
        d = MmulDriver(11)
        wrong = 0
        for r in reqs:
            args = d.args(n, r["s"])
            rt.call("matmul", args)
            wrong += from_tiled(args[2], n, r["s"]).tolist() != want
        rt.close_window()
        return rt.windows, wrong

    gw, gwrong = drive(False)
    sw, swrong = drive(True)
    failures = sum(w.guard_failures for w in sw)
    calls = sum(w.calls for w in sw)
    g_thr = np.mean([w.throughput for w in gw])
    s_thr = np.mean([w.throughput for w in sw])
    ok = gwrong == swrong == 0 and failures == calls == len(reqs) and s_thr < g_thr
    return ok, (f"{calls} violating calls, {failures} guard failures, {swrong} wrong results; "
                f"throughput guarded {s_thr:.3f} < generic {g_thr:.3f}")


# -- 3 ------------------------------------------------------------------------


def criterion_3():
    t0 = time.perf_counter()
    p = build_mmul()
    d = MmulDriver(0)
    v = pin_and_specialize(p, PinSet.of("matmul", {"s": 4}))
    e = Engine(p)
    ga, sa = d.args(64, 4), d.args(64, 4)
    g = e.call("matmul", ga)
    s = e.call("matmul", sa, v)
    correct = np.array_equal(ga[2], sa[2]) and np.array_equal(
        from_tiled(sa[2], 64, 4), np.matmul(*make_matrices(64, 0)))
    ratio = s.ops / g.ops
    dt = time.perf_counter() - t0
    ok = (correct and not s.guard_failed and (g.ops, s.ops) == (MMUL_N64_S4_GENERIC_OPS, MMUL_N64_S4_PINNED_OPS)
          and ratio <= 0.75 and dt < 10)
    return ok, f"ops/call generic {g.ops} pinned {s.ops}, ratio {ratio:.6f} <= 0.75, {dt:.1f}s"


# -- 4 ------------------------------------------------------------------------


def mmul_oracle(n: int, request_s: int, candidates) -> tuple:
    """Best configuration label by brute force over the same space."""
    p = build_mmul()
    d = MmulDriver(1)
    e = Engine(p, backend="native" if native.available() else "interp")
    ops = {"generic": e.call("matmul", d.args(n, request_s)).ops}
    for s in candidates:
        v = pin_and_specialize(p, PinSet.of("matmul", {"s": s}))
        ops[f"matmul.s={s}"] = e.call("matmul", d.args(n, s), v).ops
    best = min(ops.values())
    return [k for k, v in ops.items() if v == best], ops


def criterion_4():
    result, _, dt = scenario("mmul_phase_switch")
    cands = (2, 4, 8, 16, 32, 64)
    best1, _ = mmul_oracle(256, 8, cands)
    best2, _ = mmul_oracle(64, 8, cands)
    trace = result.runtime.trace
    settles = [e for e in trace if e.event == "settle"]
    restarts = [e for e in trace if e.event == "restart"]
    switch_window = 10_000 // 100  # call 10,001 opens window 100
    ok = (len(settles) == 2 and len(restarts) == 1
          and settles[0].window_id < switch_window <= restarts[0].window_id < switch_window + 3
          and settles[0].config_id in best1 and settles[1].config_id in best2
          and settles[1].window_id > restarts[0].window_id and dt < 30)
    return ok, (f"phase 1 settled {settles[0].config_id} (oracle {best1}) at window {settles[0].window_id}; "
                f"restart at window {restarts[0].window_id if restarts else None}; "
                f"phase 2 settled {settles[-1].config_id} (oracle {best2}); {dt:.1f}s")


# -- 5 ------------------------------------------------------------------------


def criterion_5():
    result, calls, dt = scenario("lpm_hotmap")
    ws = result.runtime.windows
    rules = synthetic_rules(1000, 5)
    addrs = synthetic_addresses(rules, 1000, 5)
    before, after = RuleTable(rules), RuleTable(updated_rules(rules))
    wrong = sum(res != (after if i >= 90_000 else before).lookup(addrs[req["key"]])
                for i, (req, res, _) in enumerate(calls))
    post = calls[90_000:]
    generic = ws[:10]
    hot = ws[10:90]
    g_ops = sum(w.total_ops for w in generic)
    h_ops = sum(w.total_ops for w in hot)
    reduction = 1 - (h_ops / 80_000) / (g_ops / 10_000)
    ok = (wrong == 0 and all(w.config_id == "generic" for w in generic)
          and all(w.config_id.startswith("lpm#hot") for w in hot)
          and (g_ops, h_ops) == (LPM_GENERIC_OPS, LPM_HOT_OPS) and reduction >= 0.05
          and len(post) == 10_000 and all(gf for _, _, gf in post)
          and not any(gf for _, _, gf in calls[:90_000]))
    return ok, (f"ops/packet generic {g_ops / 10_000:.1f} hot map {h_ops / 80_000:.1f}, "
                f"reduction {reduction:.2%} (frozen {LPM_REDUCTION:.2%}); after rule update "
                f"{sum(gf for _, _, gf in post)}/{len(post)} fell back; {wrong} wrong routes")


# -- 6 ------------------------------------------------------------------------


def criterion_6():
    t0 = time.perf_counter()
    e = Engine(build_batch_pipeline(), memoize=True)
    d = PipelineDriver(3, items=64)
    ops = {}
    for b1 in BATCH_SIZES:
        for b2 in BATCH_SIZES:
            for b3 in BATCH_SIZES:
                ops[(b1, b2, b3)] = e.call("pipeline", d.args(b1, b2, b3)).ops
    best = min(ops.values())
    argmin = [k for k, v in ops.items() if v == best]
    result, _, _ = scenario("pipeline_sweep")
    settles = [ev for ev in result.runtime.trace if ev.event == "settle"]
    want = "pipeline.b1={},pipeline.b2={},pipeline.b3={}".format(*PIPELINE_ARGMIN)
    dt = time.perf_counter() - t0
    ok = argmin == [PIPELINE_ARGMIN] and len(settles) == 1 and settles[0].config_id == want and dt < 60
    return ok, (f"oracle argmin {argmin} at {best} ops/call over {len(ops)} configs; "
                f"explorer settled {settles[0].config_id if settles else None}; {dt:.1f}s")


# -- 7 ------------------------------------------------------------------------

HOOKS = {"runtime_init", "point_specialize", "point_disable_spec", "point_disable_spec_check",
         "point_enable_collection", "point_disable_collection", "update_runtime",
         "get_specialized_function", "start_exploration", "end_exploration"}


def criterion_7():
    problems = []

    def expect(cond, what):
        if not cond:
            problems.append(what)

    S = ("matmul", "s")
    rt = runtime_init(build_mmul(), {
        "points": [{"function": "matmul", "var": "s", "candidates": [2, 4],
                    "collection": False, "driver_coupled": True}],
        "window_calls": 4})
    d = MmulDriver(0)
    expect(rt.get_specialized_function("matmul").kind == "generic", "fresh handle not generic")
    rt.call("matmul", d.args(4, 2))
    expect(rt.profiles[S].total_observations == 0, "collection on before enable")

    rt.point_enable_collection(S)
    for i in range(40):  # observe-heavy phase
        rt.call("matmul", d.args(4, 2 if i % 4 else 4))
    expect(rt.profiles[S].histogram == {2: 30, 4: 10}, "histogram after observe phase")

    rt.start_exploration()
    while rt.explorer.phase != ex.EXPLOITING:
        d.handle(rt, {"n": 4, "s": 2})
    rt.end_exploration()
    settled = rt.get_specialized_function("matmul")

    script = [e for e, _ in rt.events if e in ("runtime_init", "point_enable_collection",
                                                "start_exploration", "settle", "end_exploration")]
    expect(script == ["runtime_init", "point_enable_collection", "start_exploration", "settle",
                      "end_exploration"], f"scripted order {script}")

    # remaining hooks on the same handle
    rt.point_disable_collection(S)
    frozen = dict(rt.profiles[S].histogram)
    rt.call("matmul", d.args(4, 2))
    expect(rt.profiles[S].histogram == frozen, "histogram grew while disabled")

    rt.point_specialize(S, 4)
    h = rt.get_specialized_function("matmul")
    expect(h.kind == "pinned" and h.variant.guard is not None, "pin did not install a guarded variant")
    r = rt.call("matmul", d.args(4, 2))
    expect(r.guard_failed and r.fallback_used, "violating call did not fall back")
    n_cache = len(rt.variant_cache)
    rt.point_specialize(S, 4)
    expect(len(rt.variant_cache) == n_cache, "re-pin built a second variant")

    rt.point_disable_spec_check(S)
    expect(rt.get_specialized_function("matmul").variant.guard is None, "guard survived disable_spec_check")
    rt.update_runtime()
    expect(rt.get_specialized_function("matmul").variant.guard is None, "update_runtime restored guard")
    rt.point_disable_spec(S)
    expect(rt.get_specialized_function("matmul").kind == "generic", "disable_spec left a variant")

    snapshot = (list(rt.events), {k: dict(v) for k, v in rt.pins.items()},
                dict(rt.variant_cache), {k: dict(p.histogram) for k, p in rt.profiles.items()})
    for hook, extra in ((rt.point_specialize, (4,)), (rt.point_disable_spec, ()),
                        (rt.point_disable_spec_check, ()), (rt.point_enable_collection, ()),
                        (rt.point_disable_collection, ())):
        try:
            hook(("matmul", "t"), *extra)
            problems.append(f"{hook.__name__} accepted an unknown point")
        except UnknownPoint:
            pass
    after = (rt.events, rt.pins, rt.variant_cache, {k: dict(p.histogram) for k, p in rt.profiles.items()})
    expect(after == snapshot, "unknown point mutated state")

    used = {e for e, _ in rt.events} & HOOKS
    expect(used == HOOKS, f"hooks not exercised: {sorted(HOOKS - used)}")
    return not problems, (f"{len(used)}/10 hooks exercised, settled {settled.variant_id}; "
                          + ("; ".join(problems) if problems else "all state-machine checks hold"))


# -- 8 ------------------------------------------------------------------------


def criterion_8():
    lines = []
    ok = True
    for name, (m_hash, e_hash) in CSV_SHA256.items():
        first, _, _ = scenario(name)
        second = run_config(load_config(CONFIGS / f"{name}.json"))
        same = first.metrics == second.metrics and first.exploration == second.exploration
        pinned = (sha(first.metrics), sha(first.exploration)) == (m_hash, e_hash)
        ok &= same and pinned
        lines.append(f"{name}: rerun {'identical' if same else 'DIFFERS'}, "
                     f"golden hash {'match' if pinned else 'MISMATCH'}")
    return ok, "; ".join(lines)


# -- 9 ------------------------------------------------------------------------


def criterion_9():
    bad = []
    for seed in range(20_000, 20_500):
        p = ProgramGen(seed).program()
        text = pretty_print(p)
        q = parse_program(text)
        if q != p or pretty_print(q) != text:
            bad.append(seed)
    return not bad, f"500 generated programs, {500 - len(bad)} round-trip exactly"


CRITERIA = [
    (1, "specialization soundness", criterion_1),
    (2, "guard and fallback accounting", criterion_2),
    (3, "matmul N=64 s=4 op reduction", criterion_3),
    (4, "exploration follows a phase switch", criterion_4),
    (5, "LPM hot map", criterion_5),
    (6, "three-knob pipeline search", criterion_6),
    (7, "hook state machine", criterion_7),
    (8, "deterministic CSV output", criterion_8),
    (9, "IR print/parse round trip", criterion_9),
]


def verdict(num, title, ok, detail) -> str:
    return f"{'PASS' if ok else 'FAIL'} criterion {num} ({title}): {detail}"


@pytest.mark.parametrize("num, title, check", CRITERIA, ids=[f"criterion_{n}" for n, _, _ in CRITERIA])
def test_criterion(num, title, check, capsys):
    ok, detail = check()
    with capsys.disabled():
        print("\n" + verdict(num, title, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    results = []
    for num, title, check in CRITERIA:
        ok, detail = check()
        print(verdict(num, title, ok, detail), flush=True)
        results.append(ok)
    sys.exit(0 if all(results) else 1)
