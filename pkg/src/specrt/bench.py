"""Run a configured scenario end to end and summarize its CSV output."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

from . import explorer as ex
from .config import policy_from_config, runtime_from_policy, validate_config
from .ir import parse_program
from .telemetry import metrics_csv, read_metrics_csv
from .workloads import make_workload
from .workloads.lpm import synthetic_rules
from .workloads.streams import RequestStream, gen_stream

RULE_UPDATE_ROUTE_SHIFT = 1000


@dataclass
class RunResult:
    runtime: object
    metrics: str
    exploration: str
    summary: str


def updated_rules(rules):
    """The rule update used by LPM scenarios: same prefixes, new routes."""
    return [(p, ln, r + RULE_UPDATE_ROUTE_SHIFT) for p, ln, r in rules]


def run_config(cfg: dict, seed: int | None = None, wallclock: bool = False, on_call=None) -> RunResult:
    """Drive the configured workload through a fresh runtime.

    ``seed`` overrides the workload seed. ``on_call(index, request,
    result)`` is invoked after every call (1-based index) for callers that
    want to inspect results.
    """
    validate_config(cfg)
    workload = cfg["workload"]
    wseed = workload.get("seed", cfg.get("seed", 0)) if seed is None else seed
    program, driver = make_workload(workload, wseed)
    if "program" in cfg:
        program = parse_program(Path(cfg["program"]).read_text())
    overrides = {"wallclock": wallclock}
    rt = runtime_from_policy(program, cfg, **overrides)

    pol = cfg.get("policy") or {"name": "none"}
    policy = policy_from_config(cfg)
    if policy is not None:
        rt.start_exploration(policy=policy)
    hot = pol if pol["name"] == "hot_map" else None
    hot_after = rt.options.monitor_windows * rt.options.window_calls if hot else None
    update_at = workload.get("rule_update_at")

    stream = RequestStream.from_config(workload, wseed)
    for i, req in enumerate(gen_stream(stream), 1):
        if update_at is not None and i == update_at:
            driver.update_rules(rt, updated_rules(driver.table.rules))
        if hot is not None and i == hot_after + 1:
            rt.install_hot_map(hot.get("function", driver.function), hot.get("key", "addr"),
                               hot.get("k", rt.options.top_k), driver.template)
        res = driver.handle(rt, req)
        if on_call is not None:
            on_call(i, req, res)
    rt.close_window()
    if rt.explorer is not None:
        rt.end_exploration()
    metrics = metrics_csv(rt.windows, wallclock=wallclock)
    exploration = ex.trace_csv(rt.trace)
    return RunResult(rt, metrics, exploration, summarize(metrics, exploration))


def write_outputs(result: RunResult, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(result.metrics)
    (out / "exploration.csv").write_text(result.exploration)
    (out / "summary.txt").write_text(result.summary)


# -- summaries (CSV in, text out) ------------------------------------------------


def _trace_rows(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text))) if text else []


def _mean_ops(rows) -> float | None:
    calls = sum(r.calls for r in rows)
    return sum(r.total_ops for r in rows) / calls if calls else None


def _fmt(x, spec=".6f") -> str:
    return "n/a" if x is None else format(x, spec)


def summarize(metrics_text: str, trace_text: str) -> str:
    """Human summary computed from the two CSVs only."""
    windows = read_metrics_csv(metrics_text)
    events = _trace_rows(trace_text)
    settles = [e for e in events if e["event"] == "settle"]
    restarts = [e for e in events if e["event"] == "restart"]
    if settles:
        settled = settles[-1]["config_id"]
    elif windows:
        settled = windows[-1].config_id
    else:
        settled = "generic"
    # compare within the last workload segment
    seg_start = int(restarts[-1]["window_id"]) if restarts else -1
    settle_at = int(settles[-1]["window_id"]) if settles else -1
    segment = [w for w in windows if w.window_id > seg_start]
    generic = [w for w in segment if w.config_id == "generic"]
    chosen = [w for w in segment if w.config_id == settled and w.window_id > settle_at]
    g_ops, s_ops = _mean_ops(generic), _mean_ops(chosen)
    reduction = (1.0 - s_ops / g_ops) * 100.0 if g_ops and s_ops is not None else None
    lines = [
        f"settled_config: {settled}",
        f"windows: {len(windows)}",
        f"calls: {sum(w.calls for w in windows)}",
        f"install_events: {sum(e['event'] == 'install' for e in events)}",
        f"settle_events: {len(settles)}",
        f"restart_events: {len(restarts)}",
        f"throughput_before: {_fmt(windows[0].throughput if windows else None)}",
        f"throughput_after: {_fmt(windows[-1].throughput if windows else None)}",
        f"guard_failures: {sum(w.guard_failures for w in windows)}",
        f"generic_ops_per_call: {_fmt(g_ops, '.3f')}",
        f"settled_ops_per_call: {_fmt(s_ops, '.3f')}",
        f"op_reduction_pct: {_fmt(reduction, '.2f')}",
    ]
    return "\n".join(lines) + "\n"


def report_table(metrics_text: str) -> list[dict]:
    """Per-config rows: mean ops/call, mean throughput, benefit vs generic.

    Benefit is baseline_ops / config_ops - 1, where the baseline is the
    generic configuration when present and the first configuration seen
    otherwise.
    """
    windows = read_metrics_csv(metrics_text)
    order = []
    groups: dict = {}
    for w in windows:
        if w.config_id not in groups:
            order.append(w.config_id)
            groups[w.config_id] = []
        groups[w.config_id].append(w)
    if not order:
        return []
    base_id = "generic" if "generic" in groups else order[0]
    base = _mean_ops(groups[base_id])
    rows = []
    for cid in order:
        ws = groups[cid]
        ops = _mean_ops(ws)
        thr = [w.throughput for w in ws if w.throughput is not None]
        rows.append({
            "config": cid,
            "windows": len(ws),
            "ops_per_call": ops,
            "throughput": sum(thr) / len(thr) if thr else None,
            "benefit_pct": (base / ops - 1.0) * 100.0 if base and ops else None,
        })
    return rows


def format_report(rows) -> str:
    head = f"{'config':<40} {'windows':>8} {'ops/call':>16} {'throughput':>16} {'benefit%':>10}"
    out = [head, "-" * len(head)]
    for r in rows:
        out.append(f"{r['config']:<40} {r['windows']:>8} {_fmt(r['ops_per_call'], '.1f'):>16} "
                   f"{_fmt(r['throughput'], '.3f'):>16} {_fmt(r['benefit_pct'], '.2f'):>10}")
    return "\n".join(out) + "\n"


__all__ = ["run_config", "write_outputs", "summarize", "report_table", "format_report", "RunResult",
           "updated_rules", "synthetic_rules"]
