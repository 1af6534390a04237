"""Command-line front end.

Subcommands map one-to-one onto the library modules and emit CSV/JSON
artifacts.  Every run with ``--out`` also writes ``vekit_manifest.json``
holding the tool version, the fully resolved request, and a SHA-256
digest per artifact; ``vekit rerun MANIFEST`` re-executes the request and
verifies the artifacts byte-for-byte.

Exit codes: 0 success, 1 numeric/estimand failure, 2 usage/config error.
The environment variable VE_SEED overrides ``--seed``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .discrete import table_ve_dh
from .distributions import parse_distribution
from .errors import DomainError, VekitError
from .estimands import CUMULATIVE_KINDS, Scenario, estimand_report
from .frailty import FrailtySpec, gamma_ph_population_ve, spec_from_tau
from .peakdiff import delta1_max, delta2_max, gap_curves, verify_peak_equality
from .presets import PRESET_NAMES, preset_scenario
from .rampup import ve_curves
from .trial import (
    TrialConfig,
    TrialData,
    consistency_sweep,
    fit_piecewise,
    sensitivity_id_ve,
    simulate,
)

MANIFEST_NAME = "vekit_manifest.json"


# ---------------------------------------------------------------------------
# Formatting and small helpers

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float) and math.isnan(v):
        return "nan"
    return f"{float(v):.17g}"


def _csv_text(name: str, header: list[str], rows) -> str:
    lines = [f"# vekit-csv {name} v1", ",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(col)) for col in header))
    return "\n".join(lines) + "\n"


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _parse_list(spec: str) -> list[float]:
    try:
        return [float(x) for x in spec.split(",") if x.strip() != ""]
    except ValueError:
        raise DomainError(f"cannot parse number list {spec!r}")


def _parse_grid(spec: str) -> list[float]:
    """Either 'start:stop:count' (inclusive) or a comma-separated list."""
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise DomainError(f"grid spec must be start:stop:count, got {spec!r}")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            raise DomainError("grid count must be >= 1")
        return [float(x) for x in np.linspace(start, stop, count)]
    return _parse_list(spec)


def _load_json(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _ConfigError(f"cannot read {path}: {exc}")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise _ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}")


class _ConfigError(Exception):
    """Usage/config problem (exit code 2)."""


def _scenario_request(arg: str) -> dict:
    """Resolve a preset name or a scenario-file path into a request object."""
    if arg in PRESET_NAMES:
        return {"preset": arg}
    if not Path(arg).exists():
        raise _ConfigError(
            f"{arg!r} is neither a preset ({', '.join(PRESET_NAMES)}) nor an existing file"
        )
    obj = _load_json(arg)
    known = {"f0", "f1", "tau", "t_ru", "label"}
    if not isinstance(obj, dict):
        raise _ConfigError(f"{arg}: scenario file must be a JSON object")
    extra = set(obj) - known
    if extra:
        raise _ConfigError(f"{arg}: unknown keys {sorted(extra)}")
    for key in ("f0", "f1", "tau"):
        if key not in obj:
            raise _ConfigError(f"{arg}: missing required key {key!r}")
    return {"file": obj}


def _build_scenario(req: dict) -> tuple[Scenario, str]:
    if "preset" in req:
        return preset_scenario(req["preset"]), req["preset"]
    obj = req["file"]
    scenario = Scenario(
        f0=parse_distribution(obj["f0"]),
        f1=parse_distribution(obj["f1"]),
        tau=float(obj["tau"]),
        t_ru=None if obj.get("t_ru") is None else float(obj["t_ru"]),
    )
    return scenario, obj.get("label", "scenario")


# ---------------------------------------------------------------------------
# Runners: fully resolved request dict -> (artifacts, stdout text)

def _run_estimands(req: dict):
    scenario, label = _build_scenario(req["scenario"])
    report = estimand_report(scenario, req.get("at"))
    payload = {
        "label": label,
        "tau": scenario.tau,
        "evaluated_at": report.evaluated_at,
        "ve": {
            "ci": report.ve_ci,
            "ir": report.ve_ir,
            "cox": report.ve_cox,
            "ch": report.ve_ch,
            "odds": report.ve_odds,
        },
        "theta": report.thetas,
        "ir_bounds_ve": [report.ir_bounds.ve_lower, report.ir_bounds.ve_upper],
        "summary": report.summary(),
    }
    text = _json_text(payload)
    return {"estimands.json": text}, text + report.summary() + "\n"


def _run_curve(req: dict):
    scenario, _ = _build_scenario(req["scenario"])
    kinds = req["kinds"]
    if not kinds:
        raise DomainError("no estimands requested")
    unknown = set(kinds) - set(CUMULATIVE_KINDS)
    if unknown:
        raise DomainError(f"unknown estimand kinds {sorted(unknown)}")
    rows = ve_curves(scenario, req["grid"], kinds=kinds, include_rampup=req["rampup"])
    header = ["t"] + [f"ve_{k}" for k in kinds]
    if req["rampup"]:
        header += [f"ve_{k}_rampup" for k in kinds]
    text = _csv_text("curve", header, rows)
    return {"curve.csv": text}, text


def _run_peakdiff(req: dict):
    f0_list = req["f0"]
    ve_grid = np.linspace(0.001, 0.999, req["ve_points"])
    rows = gap_curves(f0_list, ve_grid)
    csv = _csv_text("peakdiff", ["f0", "ve", "delta1", "delta2"], rows)
    lines = []
    for f0 in f0_list:
        r1, r2 = delta1_max(f0), delta2_max(f0)
        lines.append(
            f"f0={100 * f0:g}%: max gap {100 * r1.delta_max:.2f}% "
            f"(at F1={r1.f1_argmax:.6f} / {r2.f1_argmax:.6f})"
        )
    worst = verify_peak_equality(np.linspace(0.005, 0.995, 500))
    lines.append(f"max |delta1max - delta2max| over a 500-point grid = {worst:.3e}")
    summary = "\n".join(lines) + "\n"
    return {"peakdiff.csv": csv, "peakdiff_summary.txt": summary}, csv + summary


def _run_table_discrete(req: dict):
    rows = []
    for f0 in req["f0"]:
        rows.extend(table_ve_dh(req["ve_ch"], f0, req["k"]))
    for row in rows:
        row["ve_dh_pct"] = f"{100 * row['ve_dh']:.1f}"
    text = _csv_text("table_discrete", ["ve_ch", "f0_tau", "k", "ve_dh", "ve_dh_pct"], rows)
    return {"table_discrete.csv": text}, text


def _run_frailty(req: dict):
    theta_id = 1.0 - req["ve_id"]
    rows = []
    if req["family"] == "gamma":
        for nu in req["params"]:
            spec = FrailtySpec.gamma(nu)
            ve_pop = gamma_ph_population_ve(theta_id, nu, req["grid"])
            for f0, ve in zip(req["grid"], ve_pop):
                rows.append(
                    {
                        "family": "gamma",
                        "parameter": nu,
                        "kendall_tau": spec.kendall_tau,
                        "f0": f0,
                        "ve_population": float(ve),
                        "ve_individual": req["ve_id"],
                    }
                )
    else:
        for alpha in req["params"]:
            spec = FrailtySpec.positive_stable(alpha)
            rows.append(
                {
                    "family": "positive_stable",
                    "parameter": alpha,
                    "kendall_tau": spec.kendall_tau,
                    "f0": None,
                    "ve_population": 1.0 - theta_id**alpha,
                    "ve_individual": req["ve_id"],
                }
            )
    header = ["family", "parameter", "kendall_tau", "f0", "ve_population", "ve_individual"]
    text = _csv_text("frailty", header, rows)
    return {"frailty.csv": text}, text


def _trial_config(req_config: dict, seed) -> TrialConfig:
    config = TrialConfig.from_jsonable(req_config)
    if seed is not None:
        config = TrialConfig.from_jsonable({**req_config, "seed": int(seed)})
    return config


def _run_simulate(req: dict):
    config = _trial_config(req["config"], req.get("seed"))
    data = simulate(config)
    rows = [
        {
            "id": i,
            "arm": int(data.arm[i]),
            "entry": float(data.entry[i]),
            "time": float(data.time[i]),
            "observed": int(data.observed[i]),
        }
        for i in range(data.n)
    ]
    csv = _csv_text("trial", ["id", "arm", "entry", "time", "observed"], rows)
    meta = _json_text(
        {
            "config": config.to_jsonable(),
            "realized_tau": data.realized_tau,
            "events": int(data.observed.sum()),
        }
    )
    return {"trial.csv": csv, "trial_meta.json": meta}, meta


def _run_sweep(req: dict):
    config = _trial_config(req["config"], req.get("seed"))
    rows = consistency_sweep(
        config,
        n_list=req["n_list"],
        replicates=req["replicates"],
        estimators=req["estimators"],
    )
    header = [
        "n",
        "estimator",
        "replicates",
        "mean",
        "sd",
        "analytic_estimand",
        "bias",
        "se_of_mean",
    ]
    text = _csv_text("sweep", header, rows)
    return {"sweep.csv": text}, text


def _load_trial_csv(path: str) -> TrialData:
    try:
        raw = np.loadtxt(path, delimiter=",", skiprows=2)
    except OSError as exc:
        raise _ConfigError(f"cannot read {path}: {exc}")
    if raw.ndim == 1:
        raw = raw[None, :]
    time = raw[:, 3]
    return TrialData(
        arm=raw[:, 1].astype(np.int8),
        entry=raw[:, 2],
        time=time,
        observed=raw[:, 4].astype(bool),
        realized_tau=float(time.max()),
        seed=-1,
        frailty_diag=None,
    )


def _run_fit(req: dict):
    cfg = req["config"]
    if "trial" in cfg:
        data = simulate(_trial_config(cfg["trial"], req.get("seed")))
    elif "data_csv" in cfg:
        data = _load_trial_csv(cfg["data_csv"])
    else:
        raise _ConfigError("fit config needs either 'trial' or 'data_csv'")
    fit = fit_piecewise(
        data,
        knots=cfg["knots"],
        family=cfg.get("family", "constant"),
        equal_first_interval=bool(cfg.get("equal_first_interval", False)),
    )
    grid = cfg.get("grid")
    grid = fit.midpoints().tolist() if grid is None else [float(x) for x in grid]
    rows = []
    ve_pop = fit.ve_local(np.asarray(grid))
    for alpha in cfg.get("alphas", [1.0]):
        for point, pop in zip(sensitivity_id_ve(fit, float(alpha), grid), ve_pop):
            rows.append(
                {
                    "t": point["t"],
                    "alpha": float(alpha),
                    "ve_id": point["ve_id"],
                    "ve_population": float(pop),
                }
            )
    sens = _csv_text("sensitivity", ["t", "alpha", "ve_id", "ve_population"], rows)
    fit_json = _json_text(
        {
            "edges": list(fit.edges),
            "family": fit.family,
            "equal_first_interval": fit.equal_first_interval,
            "loglik": fit.loglik,
            "unidentifiable": list(fit.unidentifiable),
            "diagnostics": list(fit.diagnostics),
            "arms": [
                [
                    {
                        "kind": f.kind,
                        "params": list(f.params),
                        "events": f.events,
                        "person_time": f.person_time,
                        "fallback": f.fallback,
                    }
                    for f in fit.arm_fits[z]
                ]
                for z in (0, 1)
            ],
        }
    )
    return {"fit.json": fit_json, "sensitivity.csv": sens}, fit_json


_RUNNERS = {
    "estimands": _run_estimands,
    "curve": _run_curve,
    "peakdiff": _run_peakdiff,
    "table-discrete": _run_table_discrete,
    "frailty": _run_frailty,
    "simulate": _run_simulate,
    "sweep": _run_sweep,
    "fit": _run_fit,
}


def run_request(subcommand: str, request: dict) -> tuple[dict[str, str], str]:
    """Execute a resolved request; returns ({artifact name: text}, stdout text)."""
    return _RUNNERS[subcommand](request)


def _write_outputs(out_dir: str, subcommand: str, request: dict, outputs: dict[str, str]):
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    digests = {}
    for name, text in sorted(outputs.items()):
        (path / name).write_text(text, encoding="utf-8")
        digests[name] = _sha256(text)
    manifest = {
        "tool": "vekit",
        "version": __version__,
        "subcommand": subcommand,
        "request": request,
        "outputs": digests,
    }
    (path / MANIFEST_NAME).write_text(_json_text(manifest), encoding="utf-8")
    return digests


def _cmd_rerun(args) -> int:
    manifest = _load_json(args.manifest)
    for key in ("subcommand", "request", "outputs"):
        if key not in manifest:
            raise _ConfigError(f"{args.manifest}: not a vekit manifest (missing {key!r})")
    outputs, _ = run_request(manifest["subcommand"], manifest["request"])
    digests = _write_outputs(args.out, manifest["subcommand"], manifest["request"], outputs)
    mismatches = {
        name: (manifest["outputs"].get(name), digest)
        for name, digest in digests.items()
        if manifest["outputs"].get(name) != digest
    }
    missing = set(manifest["outputs"]) - set(digests)
    if mismatches or missing:
        for name, (want, got) in mismatches.items():
            print(f"MISMATCH {name}: manifest {want} != rerun {got}", file=sys.stderr)
        for name in sorted(missing):
            print(f"MISSING {name}", file=sys.stderr)
        return 1
    print(f"rerun OK: {len(digests)} artifact(s) byte-identical in {args.out}")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing

def _effective_seed(args) -> int | None:
    env = os.environ.get("VE_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise _ConfigError(f"VE_SEED must be an integer, got {env!r}")
    return args.seed


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vekit",
        description="Vaccine-efficacy estimands, conversions, and trial simulation.",
    )
    parser.add_argument("--version", action="version", version=f"vekit {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_out(p):
        p.add_argument("--out", help="directory for artifacts and the run manifest")

    p = sub.add_parser("estimands", help="all five cumulative VE estimands at one time")
    p.add_argument("scenario", help="preset name or scenario JSON file")
    p.add_argument("--at", type=float, default=None, help="evaluation time (default: tau)")
    add_out(p)

    p = sub.add_parser("curve", help="estimand values over a time grid (CSV)")
    p.add_argument("scenario")
    p.add_argument("--grid", required=True, help="start:stop:count or comma list")
    p.add_argument("--kinds", default="ci,ir,cox,ch,odds", help="comma list of estimand tags")
    p.add_argument("--rampup", action="store_true", help="add conditional (post-ramp) columns")
    add_out(p)

    p = sub.add_parser("peakdiff", help="largest estimand gaps at fixed control attack rates")
    p.add_argument("--f0", required=True, help="comma list of control attack rates")
    p.add_argument("--ve-points", type=int, default=999, help="VE grid resolution")
    add_out(p)

    p = sub.add_parser("table-discrete", help="discrete-hazard VE by assessment count")
    p.add_argument("--ve-ch", type=float, default=0.5)
    p.add_argument("--f0", default="0.1,0.2")
    p.add_argument("--k", default="1,4,13,52,364")
    add_out(p)

    p = sub.add_parser("frailty", help="population vs individual VE under frailty")
    p.add_argument("--family", choices=["gamma", "stable"], required=True)
    p.add_argument("--param", help="comma list: variance (gamma) or alpha (stable)")
    p.add_argument("--kendall", help="comma list of Kendall's tau values (alternative)")
    p.add_argument("--theta-id", type=float, default=0.3, help="individual hazard ratio")
    p.add_argument("--grid", default="0:0.99:100", help="control attack-rate grid (gamma)")
    add_out(p)

    for name, helptext in (
        ("simulate", "simulate one trial"),
        ("sweep", "estimator consistency sweep"),
        ("fit", "piecewise per-arm fit plus frailty sensitivity"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        add_out(p)

    p = sub.add_parser("rerun", help="re-execute a manifest and verify artifacts")
    p.add_argument("manifest")
    p.add_argument("--out", default="rerun_out")
    return parser


def _request_from_args(args) -> dict:
    sc = args.subcommand
    if sc == "estimands":
        return {"scenario": _scenario_request(args.scenario), "at": args.at}
    if sc == "curve":
        kinds = [k.strip() for k in args.kinds.split(",") if k.strip()]
        if not kinds:
            raise _ConfigError("no estimands requested")
        return {
            "scenario": _scenario_request(args.scenario),
            "grid": _parse_grid(args.grid),
            "kinds": kinds,
            "rampup": bool(args.rampup),
        }
    if sc == "peakdiff":
        return {"f0": _parse_list(args.f0), "ve_points": args.ve_points}
    if sc == "table-discrete":
        return {
            "ve_ch": args.ve_ch,
            "f0": _parse_list(args.f0),
            "k": [int(k) for k in _parse_list(args.k)],
        }
    if sc == "frailty":
        family = "gamma" if args.family == "gamma" else "positive_stable"
        if args.param is not None:
            params = _parse_list(args.param)
        elif args.kendall is not None:
            params = [
                (
                    spec_from_tau(family, k).variance
                    if family == "gamma"
                    else spec_from_tau(family, k).alpha
                )
                for k in _parse_list(args.kendall)
            ]
        else:
            raise _ConfigError("frailty needs --param or --kendall")
        return {
            "family": args.family if args.family == "gamma" else "stable",
            "params": params,
            "ve_id": 1.0 - args.theta_id,
            "grid": _parse_grid(args.grid) if args.family == "gamma" else [],
        }
    # simulate / sweep / fit
    cfg = _load_json(args.config)
    seed = _effective_seed(args)
    if sc == "simulate":
        return {"config": cfg, "seed": seed}
    if sc == "sweep":
        known = {"trial", "n_list", "replicates", "estimators"}
        extra = set(cfg) - known
        if extra:
            raise _ConfigError(f"unknown keys {sorted(extra)} in sweep config")
        return {
            "config": cfg["trial"],
            "n_list": [int(n) for n in cfg["n_list"]],
            "replicates": int(cfg["replicates"]),
            "estimators": cfg.get("estimators", list(CUMULATIVE_KINDS)),
            "seed": seed,
        }
    return {"config": cfg, "seed": seed}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.subcommand == "rerun":
            return _cmd_rerun(args)
        request = _request_from_args(args)
        outputs, stdout_text = run_request(args.subcommand, request)
        if args.out:
            _write_outputs(args.out, args.subcommand, request, outputs)
            for name in sorted(outputs):
                print(f"wrote {Path(args.out) / name}")
        else:
            sys.stdout.write(stdout_text)
        return 0
    except _ConfigError as exc:
        print(f"vekit: config error: {exc}", file=sys.stderr)
        return 2
    except VekitError as exc:
        print(f"vekit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
