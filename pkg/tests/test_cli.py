import json
from pathlib import Path

import pytest

from specrt.bench import report_table, run_config
from specrt.cli import main
from specrt.config import ConfigError, load_config, validate_config

ROOT = Path(__file__).resolve().parents[1]

SMALL_PIPELINE = {
    "workload": {"generator": "pipeline", "seed": 3, "items": 64,
                 "phases": [{"calls": 40, "params": {"b1": 1, "b2": 1, "b3": 1}}]},
    "points": [{"function": "pipeline", "var": v, "kind": "config", "candidates": [4, 8]}
               for v in ("b1", "b2", "b3")],
    "policy": {"name": "exhaustive"},
    "window_calls": 4,
}


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return p


@pytest.mark.parametrize("name", ["mmul_phase_switch", "lpm_hotmap", "pipeline_sweep"])
def test_shipped_configs_validate(name):
    load_config(ROOT / "configs" / f"{name}.json")


@pytest.mark.parametrize("mutate, key", [
    (lambda c: c.pop("workload"), "workload"),
    (lambda c: c.update(window_calls=0), "window_calls"),
    (lambda c: c.update(delta=1.5), "delta"),
    (lambda c: c["workload"].update(generator="x"), "workload.generator"),
    (lambda c: c["points"][1].update(kind="other"), "points[1].kind"),
    (lambda c: c["policy"].update(name="magic"), "policy.name"),
    (lambda c: c.update(colour="red"), "colour"),
    (lambda c: c["workload"]["phases"][0].update(calls=0), "workload.phases[0].calls"),
])
def test_config_errors_name_the_key(mutate, key):
    cfg = json.loads(json.dumps(SMALL_PIPELINE))
    mutate(cfg)
    with pytest.raises(ConfigError) as e:
        validate_config(cfg)
    assert e.value.key == key


def test_malformed_json_reports_position(tmp_path):
    p = write(tmp_path, "bad.json", '{"workload": {"generator": "mmul",}}')
    with pytest.raises(ConfigError) as e:
        load_config(p)
    assert "line 1" in str(e.value)


def test_run_writes_outputs_and_settles(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", SMALL_PIPELINE)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    summary = capsys.readouterr().out
    assert "settled_config: pipeline.b1=8,pipeline.b2=8,pipeline.b3=4" in summary
    assert (out / "summary.txt").read_text() == summary
    metrics = (out / "metrics.csv").read_text().splitlines()
    assert metrics[0] == "window_id,config_id,calls,total_ops,throughput,guard_failures"
    assert len(metrics) == 11
    trace = (out / "exploration.csv").read_text().splitlines()
    assert trace[0] == "event,window_id,config_id,action,throughput"
    assert trace[-1].startswith("settle,")


def test_run_is_byte_identical_across_runs(tmp_path):
    cfg = write(tmp_path, "c.json", SMALL_PIPELINE)
    for d in ("a", "b"):
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / d)]) == 0
    for f in ("metrics.csv", "exploration.csv", "summary.txt"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_run_seed_flag_changes_stream(tmp_path):
    cfg = dict(SMALL_PIPELINE, workload=dict(SMALL_PIPELINE["workload"], phases=[
        {"calls": 40, "params": {"b1": {"uniform": [1, 2, 4]}}}]), policy={"name": "none"}, points=[])
    a = run_config(cfg, seed=1).metrics
    b = run_config(cfg, seed=2).metrics
    assert a != b and run_config(cfg, seed=1).metrics == a


def test_wallclock_column_is_opt_in(tmp_path):
    cfg = write(tmp_path, "c.json", SMALL_PIPELINE)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "w"), "--wallclock"]) == 0
    assert (tmp_path / "w" / "metrics.csv").read_text().splitlines()[0].endswith(",wall_ms")


def test_run_exit_codes(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 1
    bad = write(tmp_path, "bad.json", dict(SMALL_PIPELINE, window_calls=-1))
    assert main(["run", "--config", str(bad), "--out", str(tmp_path)]) == 1
    assert "window_calls" in capsys.readouterr().err
    prog = write(tmp_path, "trap.ir", "(func pipeline ((inp arr-i64) (out arr-i64) (t1 arr-i64) "
                 "(t2 arr-i64) (n i64) (b1 i64) (b2 i64) (b3 i64)) (return (/ n (- b1 b1))))"
                 "(specpoint pipeline b1 config) (specpoint pipeline b2 config) (specpoint pipeline b3 config)")
    trap = write(tmp_path, "trap.json", dict(SMALL_PIPELINE, program=str(prog), points=[],
                                             policy={"name": "none"}))
    assert main(["run", "--config", str(trap), "--out", str(tmp_path / "t")]) == 2
    assert "div_by_zero" in capsys.readouterr().err
    assert main([]) == 1
    assert main(["frobnicate"]) == 1


def test_specialize_prints_both_versions(capsys):
    prog = str(ROOT / "programs" / "mmul.ir")
    assert main(["specialize", "--program", prog, "--point", "matmul:s", "--value", "4"]) == 0
    out = capsys.readouterr().out
    assert ";; generic" in out and ";; specialized" in out
    assert "(guard ((== s 4)))" in out
    assert ";; statements:" in out


def test_specialize_without_guard(capsys):
    prog = str(ROOT / "programs" / "mmul.ir")
    assert main(["specialize", "--program", prog, "--point", "matmul:s", "--value", "4", "--no-guard"]) == 0
    assert "(guard" not in capsys.readouterr().out


def test_specialize_errors(tmp_path, capsys):
    prog = str(ROOT / "programs" / "mmul.ir")
    assert main(["specialize", "--program", prog, "--point", "matmul:n", "--value", "4"]) == 1
    assert "matmul:s" in capsys.readouterr().err  # lists what is declared
    assert main(["specialize", "--program", prog, "--point", "matmul:s", "--value", "x"]) == 1
    broken = write(tmp_path, "b.ir", "(func f ((x i64)) (return (+ x))")
    assert main(["specialize", "--program", str(broken), "--point", "f:x", "--value", "1"]) == 1
    assert "line" in capsys.readouterr().err


def test_report_tabulates_run(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", SMALL_PIPELINE)
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "r")])
    capsys.readouterr()
    assert main(["report", "--dir", str(tmp_path / "r")]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].split()[:2] == ["config", "windows"]
    assert out[2].startswith("generic")
    assert main(["report", "--dir", str(tmp_path / "nothing")]) == 1


def test_report_benefit_against_generic():
    text = ("window_id,config_id,calls,total_ops,throughput,guard_failures\n"
            "0,generic,2,200,1.0,0\n1,f.s=4,2,100,2.0,0\n")
    rows = report_table(text)
    assert rows[1]["benefit_pct"] == pytest.approx(100.0)
    assert rows[0]["benefit_pct"] == pytest.approx(0.0)
