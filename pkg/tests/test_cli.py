import json
import subprocess
import sys

import pytest
import yaml

from esorl import config as cfgmod
from esorl.cli import EXIT_DIVERGED, EXIT_INVALID, EXIT_OK, EXIT_THRESHOLD, main


def short_config(tmp_path, name="short", T=1.0, **edits):
    raw = cfgmod.load("example1_known_basis")
    raw["sim"]["T"] = T
    raw["sim"]["record_stride"] = 50
    for path, value in edits.items():
        node = raw
        keys = path.split("__")
        for k in keys[:-1]:
            node = node[k]
        node[keys[-1]] = value
    p = tmp_path / f"{name}.yaml"
    p.write_text(yaml.safe_dump(raw))
    return str(p)


def test_simulate_writes_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["simulate", "--config", short_config(tmp_path), "--out", str(out), "--plots"])
    assert code == EXIT_OK
    text = capsys.readouterr().out
    assert text.startswith("# resolved config")
    for f in ("config.yaml", "trace.csv", "weights.csv", "summary.json", "state.svg", "weights.svg"):
        assert (out / f).exists(), f
    summary = json.loads((out / "summary.json").read_text())
    assert len(summary["final_theta_c"]) == 3
    assert summary["theta_star"] == [1.5, 2.0, 1.0]
    assert "weight_error_max" in summary and "inf_a4_c" in summary


def test_rerun_from_echoed_config_is_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", short_config(tmp_path), "--out", str(a)]) == EXIT_OK
    assert main(["simulate", "--config", str(a / "config.yaml"), "--out", str(b)]) == EXIT_OK
    assert (a / "trace.csv").read_bytes() == (b / "trace.csv").read_bytes()
    assert (a / "config.yaml").read_text() == (b / "config.yaml").read_text()


def test_non_hurwitz_observer_is_rejected(tmp_path, capsys):
    cfg = short_config(tmp_path, observer__L=[1.0, 0.0, 0.0])
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_INVALID
    assert "Hurwitz" in capsys.readouterr().err


def test_step_above_stiffness_guard_is_rejected(tmp_path, capsys):
    cfg = short_config(tmp_path, sim__h=0.011)
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_INVALID
    assert "stiffness guard" in capsys.readouterr().err


def test_usage_errors_exit_one(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["simulate", "--out", str(tmp_path)])
    assert info.value.code == EXIT_INVALID
    assert main(["simulate", "--config", str(tmp_path / "missing.yaml"), "--out", str(tmp_path)]) == EXIT_INVALID


def test_divergence_exit_code(tmp_path):
    # an observer far too slow for the unstable open loop lets the state escape
    cfg = short_config(tmp_path, T=30.0, observer__epsilon=0.5, sim__h=0.01, sim__x0=[2.0, 2.0],
                       learner__theta_c0=[-5.0, -5.0, -5.0], learner__theta_v0=[-5.0, -5.0, -5.0])
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_DIVERGED


def test_check_a4_separates_grids(tmp_path, capsys):
    # a short horizon and an explicit threshold keep this quick; the 3x3
    # grid's infimum is reached in the first seconds
    three = short_config(tmp_path, "g3", T=2.0, learner__grid__a=3)
    two = short_config(tmp_path, "g2", T=2.0, learner__grid__a=2)
    assert main(["check-a4", "--config", three, "--threshold", "1e-5"]) == EXIT_OK
    assert "holds" in capsys.readouterr().out
    assert main(["check-a4", "--config", two, "--threshold", "1e-5"]) == EXIT_THRESHOLD
    assert "fails" in capsys.readouterr().out


def test_check_a4_single_point_grid_fails(tmp_path):
    cfg = short_config(tmp_path, T=0.5, learner__grid={"points": [[1.0, 0.5]]})
    assert main(["check-a4", "--config", cfg]) == EXIT_THRESHOLD


def test_verify_oracle(capsys):
    assert main(["verify-oracle"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "Riccati residual" in out and "oracle checks pass" in out
    assert main(["verify-oracle", "--tamper-theta", "1,1,1"]) == EXIT_THRESHOLD
    assert "FAIL" in capsys.readouterr().out


def test_sweep_single_size_matches_simulate(tmp_path):
    cfg = short_config(tmp_path)
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "sim")]) == EXIT_OK
    assert main(["sweep-grid", "--config", cfg, "--out", str(tmp_path / "sw"), "--grid-sizes", "5"]) == EXIT_OK
    a = json.loads((tmp_path / "sim" / "summary.json").read_text())
    b = json.loads((tmp_path / "sw" / "a5" / "summary.json").read_text())
    assert a == b
    assert (tmp_path / "sim" / "trace.csv").read_bytes() == (tmp_path / "sw" / "a5" / "trace.csv").read_bytes()
    rows = json.loads((tmp_path / "sw" / "sweep.json").read_text())
    assert [r["a"] for r in rows] == [5]


def test_sweep_needs_sizes(tmp_path, capsys):
    cfg = short_config(tmp_path)
    assert main(["sweep-grid", "--config", cfg, "--out", str(tmp_path / "sw"), "--grid-sizes", ""]) == EXIT_INVALID
    assert "at least one size" in capsys.readouterr().err
    assert main(["sweep-grid", "--config", cfg, "--out", str(tmp_path / "sw"), "--grid-sizes", "x"]) == EXIT_INVALID


def test_plot_is_deterministic_and_draws_reference_lines(tmp_path):
    run = tmp_path / "run"
    assert main(["simulate", "--config", short_config(tmp_path), "--out", str(run)]) == EXIT_OK
    assert main(["plot", "--trace", str(run / "trace.csv"), "--out", str(tmp_path / "p1")]) == EXIT_OK
    assert main(["plot", "--trace", str(run / "trace.csv"), "--out", str(tmp_path / "p2")]) == EXIT_OK
    for f in ("state.svg", "control.svg", "a4.svg", "weights.svg"):
        assert (tmp_path / "p1" / f).read_bytes() == (tmp_path / "p2" / f).read_bytes()
    svg = (tmp_path / "p1" / "weights.svg").read_text()
    for v in ("1.5", "2", "1"):
        assert f'class="ref"' in svg and f'data-value="{v}"' in svg


def test_plot_empty_trace(tmp_path, capsys):
    p = tmp_path / "trace.csv"
    p.write_text("t,x1,x2\n")
    assert main(["plot", "--trace", str(p), "--out", str(tmp_path / "p")]) != EXIT_OK
    assert "no records" in capsys.readouterr().out
    assert not (tmp_path / "p").exists()
    assert main(["plot", "--trace", str(tmp_path / "none.csv"), "--out", str(tmp_path / "p")]) == EXIT_INVALID


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "esorl", "verify-oracle", "--samples", "100"],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
