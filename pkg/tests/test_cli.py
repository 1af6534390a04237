"""Command-line front end: subcommands, formats, exit codes, manifest rerun."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from vekit.cli import main


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def read_csv(path: Path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# vekit-csv ")
    header = lines[1].split(",")
    rows = [dict(zip(header, line.split(","))) for line in lines[2:]]
    return header, rows


# ---------------------------------------------------------------------------
# estimands

def test_estimands_discussion_preset(capsys):
    code, out, _ = run(["estimands", "discussion"], capsys)
    assert code == 0
    payload = json.loads(out[: out.rindex("}") + 1])
    assert round(100 * payload["ve"]["ci"], 1) == 87.7
    assert round(100 * payload["ve"]["ch"], 1) == 88.0
    assert round(100 * payload["ve"]["odds"], 1) == 88.4
    lo, hi = payload["ir_bounds_ve"]
    assert round(100 * lo, 1) == 87.6
    assert round(100 * hi, 1) == 88.5
    assert "VE_CI=87.7%" in payload["summary"]


def test_estimands_null_scenario_file(tmp_path, capsys):
    spec = {"kind": "exponential", "rate": 0.001}
    cfg = tmp_path / "null.json"
    cfg.write_text(json.dumps({"f0": spec, "f1": spec, "tau": 100.0, "label": "null"}))
    code, out, _ = run(["estimands", str(cfg)], capsys)
    assert code == 0
    payload = json.loads(out[: out.rindex("}") + 1])
    for v in payload["ve"].values():
        assert abs(v) < 1e-8


def test_estimands_rampup3_negative_cumulative_hazard_ve(capsys):
    code, out, _ = run(["estimands", "rampup:3", "--at", "100"], capsys)
    assert code == 0
    payload = json.loads(out[: out.rindex("}") + 1])
    assert payload["ve"]["ch"] < 0.0


def test_estimands_unknown_scenario(capsys):
    code, _, err = run(["estimands", "no-such-preset"], capsys)
    assert code == 2
    assert "preset" in err


def test_estimands_scenario_with_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"f0": {"kind": "exponential", "rate": 1}, "f1": {}, "tau": 1, "zz": 2}))
    code, _, err = run(["estimands", str(cfg)], capsys)
    assert code == 2
    assert "zz" in err


def test_estimands_malformed_json_reports_position(tmp_path, capsys):
    cfg = tmp_path / "broken.json"
    cfg.write_text('{"f0": }')
    code, _, err = run(["estimands", str(cfg)], capsys)
    assert code == 2
    assert "line 1" in err and "column" in err


def test_estimands_numeric_failure_exit_code(tmp_path, capsys):
    # zero control attack rate at tau -> estimand failure, not a usage error
    cfg = tmp_path / "flat.json"
    flat = {"kind": "tabulated", "points": [[0, 0], [100, 0]]}
    cfg.write_text(json.dumps({"f0": flat, "f1": flat, "tau": 100.0}))
    code, _, err = run(["estimands", str(cfg)], capsys)
    assert code == 1


# ---------------------------------------------------------------------------
# curve

def test_curve_rampup1_constant_conditional_column(tmp_path, capsys):
    out_dir = tmp_path / "o"
    code, _, _ = run(
        ["curve", "rampup:1", "--grid", "29:150:12", "--kinds", "ch", "--rampup",
         "--out", str(out_dir)],
        capsys,
    )
    assert code == 0
    _, rows = read_csv(out_dir / "curve.csv")
    for row in rows:
        assert float(row["ve_ch_rampup"]) == pytest.approx(0.7, abs=1e-9)


def test_curve_figure3a_ch_cox_ir_agree(capsys, tmp_path):
    out_dir = tmp_path / "o"
    code, _, _ = run(
        ["curve", "figure3:a", "--grid", "0.25,0.5,1.0", "--kinds", "ir,cox,ch",
         "--out", str(out_dir)],
        capsys,
    )
    assert code == 0
    _, rows = read_csv(out_dir / "curve.csv")
    for row in rows:
        assert float(row["ve_ch"]) == pytest.approx(float(row["ve_cox"]), abs=1e-7)
        assert float(row["ve_ch"]) == pytest.approx(float(row["ve_ir"]), abs=1e-7)


def test_curve_empty_kinds_is_usage_error(capsys):
    code, _, err = run(["curve", "rampup:1", "--grid", "50:150:3", "--kinds", ""], capsys)
    assert code == 2
    assert "no estimands requested" in err


# ---------------------------------------------------------------------------
# peakdiff / table-discrete / frailty

def test_peakdiff_summary_values(capsys):
    code, out, _ = run(["peakdiff", "--f0", "0.01,0.1,0.2,0.3,0.4,0.5"], capsys)
    assert code == 0
    for snippet in ("0.13%", "1.32%", "2.79%", "4.45%", "6.36%", "8.61%"):
        assert snippet in out
    assert "delta1max - delta2max" in out


def test_table_discrete_defaults(capsys):
    code, out, _ = run(["table-discrete"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[1].split(",")[:3] == ["ve_ch", "f0_tau", "k"]
    pct = [line.split(",")[-1] for line in lines[2:]]
    assert pct == ["48.7", "49.7", "49.9", "50.0", "50.0", "47.2", "49.3", "49.8", "49.9", "50.0"]


def test_frailty_stable_list(capsys):
    code, out, _ = run(
        ["frailty", "--family", "stable", "--param", "0.95,0.8,0.65,0.5,0.25,0.1",
         "--theta-id", "0.3"],
        capsys,
    )
    assert code == 0
    ve = [float(line.split(",")[4]) for line in out.splitlines()[2:]]
    want = [68.1, 61.8, 54.3, 45.2, 26.0, 11.3]
    assert np.allclose(100 * np.array(ve), want, atol=0.05)


def test_frailty_gamma_kendall_zero_flat(capsys):
    code, out, _ = run(
        ["frailty", "--family", "gamma", "--kendall", "0", "--theta-id", "0.3",
         "--grid", "0:0.9:10"],
        capsys,
    )
    assert code == 0
    ve = [float(line.split(",")[4]) for line in out.splitlines()[2:]]
    assert np.allclose(ve, 0.7, atol=1e-12)


def test_frailty_needs_param_or_kendall(capsys):
    code, _, err = run(["frailty", "--family", "gamma"], capsys)
    assert code == 2


# ---------------------------------------------------------------------------
# simulate / sweep / fit and the manifest loop

TRIAL_CFG = {
    "n": 4000,
    "model0": {"kind": "exponential", "rate": 0.002},
    "model1": {"kind": "exponential", "rate": 0.001},
    "stopping": {"fixed_time": 105.0},
    "seed": 12,
}


def test_simulate_writes_artifacts_and_rerun_is_byte_identical(tmp_path, capsys):
    cfg = tmp_path / "trial.json"
    cfg.write_text(json.dumps(TRIAL_CFG))
    out_dir = tmp_path / "run"
    code, _, _ = run(["simulate", "--config", str(cfg), "--out", str(out_dir)], capsys)
    assert code == 0
    manifest = json.loads((out_dir / "vekit_manifest.json").read_text())
    assert set(manifest["outputs"]) == {"trial.csv", "trial_meta.json"}
    redo = tmp_path / "redo"
    code, out, _ = run(["rerun", str(out_dir / "vekit_manifest.json"), "--out", str(redo)], capsys)
    assert code == 0
    assert "byte-identical" in out
    assert (redo / "trial.csv").read_bytes() == (out_dir / "trial.csv").read_bytes()


def test_rerun_detects_tampering(tmp_path, capsys):
    cfg = tmp_path / "trial.json"
    cfg.write_text(json.dumps(TRIAL_CFG))
    out_dir = tmp_path / "run"
    run(["simulate", "--config", str(cfg), "--out", str(out_dir)], capsys)
    manifest_path = out_dir / "vekit_manifest.json"
    manifest = json.loads(manifest_path.read_text())
    manifest["outputs"]["trial.csv"] = "0" * 64
    manifest_path.write_text(json.dumps(manifest))
    code, _, err = run(["rerun", str(manifest_path), "--out", str(tmp_path / "x")], capsys)
    assert code == 1
    assert "MISMATCH" in err


def test_simulate_seed_override_and_env(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "trial.json"
    cfg.write_text(json.dumps(TRIAL_CFG))
    out_a = tmp_path / "a"
    run(["simulate", "--config", str(cfg), "--seed", "99", "--out", str(out_a)], capsys)
    meta = json.loads((out_a / "trial_meta.json").read_text())
    assert meta["config"]["seed"] == 99
    monkeypatch.setenv("VE_SEED", "123")
    out_b = tmp_path / "b"
    run(["simulate", "--config", str(cfg), "--seed", "99", "--out", str(out_b)], capsys)
    meta_b = json.loads((out_b / "trial_meta.json").read_text())
    assert meta_b["config"]["seed"] == 123  # env var wins over --seed


def test_missing_config_file(capsys):
    code, _, err = run(["simulate", "--config", "does-not-exist.json"], capsys)
    assert code == 2


def test_sweep_csv(tmp_path, capsys):
    cfg = tmp_path / "sweep.json"
    cfg.write_text(
        json.dumps(
            {
                "trial": TRIAL_CFG,
                "n_list": [2000],
                "replicates": 8,
                "estimators": ["ci", "ir"],
            }
        )
    )
    out_dir = tmp_path / "runs"
    code, _, _ = run(["sweep", "--config", str(cfg), "--out", str(out_dir)], capsys)
    assert code == 0
    header, rows = read_csv(out_dir / "sweep.csv")
    assert header[:4] == ["n", "estimator", "replicates", "mean"]
    assert len(rows) == 2
    for row in rows:
        assert abs(float(row["bias"])) < 0.2


def test_fit_pipeline_outputs(tmp_path, capsys):
    fit_cfg = {
        "trial": {
            "n": 30000,
            "model0": {"kind": "exponential", "rate": 0.003},
            "model1": {"kind": "exponential", "rate": 0.0009},
            "frailty": {"family": "positive_stable", "alpha": 0.7},
            "stopping": {"fixed_time": 168.0},
            "seed": 4,
        },
        "knots": [56.0, 112.0],
        "family": "constant",
        "alphas": [0.7, 0.99],
    }
    cfg = tmp_path / "fit.json"
    cfg.write_text(json.dumps(fit_cfg))
    out_dir = tmp_path / "fit"
    code, _, _ = run(["fit", "--config", str(cfg), "--out", str(out_dir)], capsys)
    assert code == 0
    payload = json.loads((out_dir / "fit.json").read_text())
    assert payload["edges"][0] == 0.0 and len(payload["edges"]) == 4
    assert math.isfinite(payload["loglik"])
    _, rows = read_csv(out_dir / "sensitivity.csv")
    assert {r["alpha"] for r in rows} == {"0.69999999999999996", "0.98999999999999999"}
    # matched alpha recovers roughly the generating individual effect (0.70)
    matched = [float(r["ve_id"]) for r in rows if r["alpha"].startswith("0.69")]
    assert np.allclose(matched, 0.7, atol=0.08)
    # rerun reproduces the whole pipeline
    redo = tmp_path / "fit_redo"
    code, out, _ = run(["rerun", str(out_dir / "vekit_manifest.json"), "--out", str(redo)], capsys)
    assert code == 0


def test_fit_from_data_csv(tmp_path, capsys):
    cfg = tmp_path / "trial.json"
    cfg.write_text(json.dumps(TRIAL_CFG))
    sim_dir = tmp_path / "sim"
    run(["simulate", "--config", str(cfg), "--out", str(sim_dir)], capsys)
    fit_cfg = {
        "data_csv": str(sim_dir / "trial.csv"),
        "knots": [50.0],
        "family": "constant",
        "alphas": [1.0],
    }
    fcfg = tmp_path / "fit.json"
    fcfg.write_text(json.dumps(fit_cfg))
    code, out, _ = run(["fit", "--config", str(fcfg)], capsys)
    assert code == 0
    payload = json.loads(out[: out.rindex("}") + 1])
    assert len(payload["arms"][0]) == 2


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
