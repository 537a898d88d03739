"""Batch command line: ``dgmv {solve,frontier,hedge,validate} --config FILE``.

Exit codes: 0 success, 2 invalid configuration, 3 solver failure, 4 I/O error.
Every JSON report starts with the fully resolved configuration, which can be
fed back in to reproduce the report.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import sys
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from . import moments, oracle
from .errors import ModelError, SolverError
from .hedging import HedgeProblem, solve_hedge
from .instruments import GreekBundle, InstrumentDef, Kind, greeks
from .market import FactorModel, PortfolioSpec, validate_factor_model
from .optimizer import frontier, frontier_csv, solve_p5, solve_p6
from .reduction import assemble_problem, problem_matrices, reduce_portfolio

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4

DEFAULT_SAMPLES = 100_000
FRONTIER_POINTS = 21
SE_BAND = 4.0

_num = {"type": "number"}
_vec = {"type": "array", "items": _num, "minItems": 1}
_mat = {"type": "array", "items": _vec, "minItems": 1}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["factors", "instruments"],
    "properties": {
        "factors": {
            "type": "object",
            "additionalProperties": False,
            "required": ["covariance", "levels"],
            "properties": {"covariance": _mat, "levels": _vec, "dt": _num},
        },
        "instruments": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["kind"],
                "properties": {
                    "kind": {"enum": [k.value for k in Kind]},
                    "factor": {"type": "integer", "minimum": 0},
                    "strike": _num,
                    "vol": _num,
                    "rate": _num,
                    "expiry": _num,
                    "position": _num,
                    "greeks": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["value", "theta"],
                        "properties": {
                            "value": _num,
                            "theta": _num,
                            "delta": _vec,
                            "gamma": _mat,
                            "file": {"type": "string"},
                        },
                    },
                },
            },
        },
        "problem": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["p5", "p6", "hedge", "validate"]},
                "target": _num,
                "targets": _vec,
                "hedge_target_index": {"type": "integer", "minimum": 0},
            },
        },
        "mc": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "samples": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
                "streams": {"type": "integer", "minimum": 1},
            },
        },
    },
}


class ConfigError(Exception):
    pass


def _path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def resolve_config(raw: dict, base_dir: Path, overrides: Optional[dict] = None) -> dict:
    """Validate ``raw`` against the schema and fill in every default.

    Custom greeks given by ``file`` are read and inlined so the result is
    self-contained.
    """
    errors = sorted(jsonschema.Draft7Validator(CONFIG_SCHEMA).iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(f"{_path(err.absolute_path)}: {err.message}")

    cfg = copy.deepcopy(raw)
    cfg["factors"].setdefault("dt", 1.0)
    n = len(cfg["factors"]["levels"])

    for i, inst in enumerate(cfg["instruments"]):
        where = f"instruments[{i}]"
        kind = Kind(inst["kind"])
        inst.setdefault("position", 1.0)
        if kind in (Kind.LINEAR, Kind.CALL, Kind.PUT):
            if "factor" not in inst:
                raise ConfigError(f"{where}.factor: required for {kind.value}")
            if inst["factor"] >= n:
                raise ConfigError(f"{where}.factor: {inst['factor']} outside [0, {n})")
        if kind in (Kind.CALL, Kind.PUT):
            for key in ("strike", "vol", "expiry"):
                if key not in inst:
                    raise ConfigError(f"{where}.{key}: required for {kind.value}")
            inst.setdefault("rate", 0.0)
        if kind is Kind.CUSTOM:
            g = inst.get("greeks")
            if g is None:
                raise ConfigError(f"{where}.greeks: required for Custom")
            if "file" in g:
                if "delta" in g or "gamma" in g:
                    raise ConfigError(f"{where}.greeks: give either file or delta/gamma, not both")
                fpath = base_dir / g.pop("file")
                try:
                    table = np.loadtxt(fpath, delimiter=",", ndmin=2)
                except OSError as exc:
                    raise OSError(f"{where}.greeks.file: cannot read {fpath}: {exc}") from exc
                except ValueError as exc:
                    raise ConfigError(f"{where}.greeks.file: malformed CSV {fpath}: {exc}") from exc
                if table.shape != (n + 1, n):
                    raise ConfigError(f"{where}.greeks.file: expected {n + 1} rows of {n} values, got {table.shape}")
                g["delta"] = table[0].tolist()
                g["gamma"] = table[1:].tolist()
            for key in ("delta", "gamma"):
                if key not in g:
                    raise ConfigError(f"{where}.greeks.{key}: required for Custom")
        elif "greeks" in inst:
            raise ConfigError(f"{where}.greeks: only allowed for Custom instruments")

    problem = cfg.setdefault("problem", {})
    problem.setdefault("mode", "p6")
    problem.setdefault("hedge_target_index", 0)
    if problem["hedge_target_index"] >= len(cfg["instruments"]):
        raise ConfigError("problem.hedge_target_index: outside the instrument list")

    mc = cfg.setdefault("mc", {})
    mc.setdefault("samples", DEFAULT_SAMPLES)
    mc.setdefault("seed", 0)
    mc.setdefault("streams", 1)
    for key, val in (overrides or {}).items():
        if val is not None:
            mc[key] = val
    return cfg


def build_inputs(cfg: dict):
    """Turn a resolved config into ``(model, defs, bundles, positions)``."""
    f = cfg["factors"]
    try:
        model = validate_factor_model(
            FactorModel(np.array(f["covariance"], dtype=float), f["dt"], np.array(f["levels"], dtype=float))
        )
    except (ModelError, ValueError) as exc:
        raise ConfigError(f"factors: {exc}") from exc
    if model.n != len(f["levels"]):
        raise ConfigError("factors.levels: length differs from covariance dimension")

    defs, bundles = [], []
    for i, inst in enumerate(cfg["instruments"]):
        kind = Kind(inst["kind"])
        try:
            custom = None
            if kind is Kind.CUSTOM:
                g = inst["greeks"]
                custom = GreekBundle.make(g["value"], g["theta"], g["delta"], g["gamma"])
            d = InstrumentDef(
                kind,
                inst.get("factor", 0),
                inst.get("strike"),
                inst.get("vol"),
                inst.get("rate", 0.0),
                inst.get("expiry"),
                custom,
            )
            bundles.append(greeks(d, model))
        except ModelError as exc:
            raise ConfigError(f"instruments[{i}]: {exc}") from exc
        defs.append(d)
    positions = np.array([inst["position"] for inst in cfg["instruments"]], dtype=float)
    return model, defs, bundles, positions


# --- subcommands ----------------------------------------------------------------


def _solve(cfg, model, defs, bundles, positions):
    mode = cfg["problem"]["mode"]
    if mode not in ("p5", "p6"):
        raise ConfigError(f"problem.mode: solve needs p5 or p6, got {mode!r}")
    problem = assemble_problem(bundles, model)
    if mode == "p5":
        if "target" not in cfg["problem"]:
            raise ConfigError("problem.target: required for mode p5")
        sol = solve_p5(problem, cfg["problem"]["target"])
    else:
        sol = solve_p6(problem)
    report = {"mode": mode, "solution": sol.to_dict()}
    report["solution"]["budget_residual"] = float(abs(problem.values @ sol.positions - 1.0))
    return report, None


def _frontier(cfg, model, defs, bundles, positions):
    problem = assemble_problem(bundles, model)
    if "targets" not in cfg["problem"]:
        # default grid: variance runs from the vertex up to 4x the vertex variance
        vertex = solve_p6(problem)
        curvature = solve_p5(problem, vertex.mean + 1.0).variance - vertex.variance
        half = np.sqrt(3.0 * vertex.variance / curvature) if curvature > 0 else 1.0
        grid = vertex.mean + half * np.linspace(-1.0, 1.0, FRONTIER_POINTS)
        cfg["problem"]["targets"] = [float(t) for t in grid]
    points = frontier(problem, cfg["problem"]["targets"])
    rows = [
        {
            "target": p.target,
            "status": p.status,
            "mean": None if p.positions is None else p.mean,
            "variance": None if p.positions is None else p.variance,
            "positions": None if p.positions is None else p.positions.tolist(),
            "message": p.message,
        }
        for p in points
    ]
    return {"frontier": rows}, frontier_csv(points, problem.m)


def _hedge(cfg, model, defs, bundles, positions):
    idx = cfg["problem"]["hedge_target_index"]
    hedgers = [b for k, b in enumerate(bundles) if k != idx]
    sol = solve_hedge(HedgeProblem(bundles[idx], hedgers, model))
    out = sol.to_dict()
    out["target_index"] = idx
    out["hedger_indices"] = [k for k in range(len(bundles)) if k != idx]
    return {"hedge": out}, None


def _mgf_theta(qf) -> float:
    sd = np.sqrt(moments.variance(qf))
    theta = 0.25 / sd if sd > 0 else 1.0
    lam_max = float(np.max(np.abs(qf.lam))) if qf.lam.size else 0.0
    if lam_max > 0:
        theta = min(theta, 0.1 / lam_max)
    return float(theta)


def _validate(cfg, model, defs, bundles, positions):
    mc = oracle.McConfig(cfg["mc"]["samples"], cfg["mc"]["seed"], cfg["mc"]["streams"])
    qf = reduce_portfolio(bundles, positions, model)
    mats = problem_matrices(bundles, model)
    h = mats["sigma_hat"] + mats["Q"]
    var_closed = moments.variance(qf)
    var_qp = float(0.5 * positions @ h @ positions)

    rows = []

    def check(name, analytic, estimate, se):
        diff = abs(analytic - estimate)
        ok = bool(diff <= SE_BAND * se) if np.isfinite(se) else bool(diff == 0)
        rows.append({"quantity": name, "analytic": analytic, "estimate": estimate, "se": se, "pass": ok})

    est = oracle.simulate_quadratic(qf, mc)
    check("mean", moments.mean(qf), est.mean_est, est.se_mean)
    check("variance", var_closed, est.var_est, est.se_var)
    theta = _mgf_theta(qf)
    mgf_est = oracle.simulate_mgf(qf, theta, mc)
    check(f"mgf(theta={theta!r})", moments.mgf(theta, qf), mgf_est.mean_est, mgf_est.se_mean)

    report = {
        "analytic": {
            "mean": moments.mean(qf),
            "variance": var_closed,
            "second_moment": moments.second_moment(qf),
            "variance_qp_form": var_qp,
            "variance_identity_residual": abs(var_closed - var_qp) / max(abs(var_closed), 1e-300),
        },
        "quadratic_mc": est.to_dict(),
        "checks": rows,
    }
    if all(d.kind is not Kind.CUSTOM for d in defs):
        spec = PortfolioSpec(defs, positions, float(positions @ [b.value for b in bundles]))
        ex = oracle.simulate_exact(spec, model, mc)
        report["exact_mc"] = ex.to_dict()
        report["exact_mc"]["variance_rel_diff"] = (
            abs(var_closed - ex.var_est) / ex.var_est if ex.var_est > 0 else 0.0
        )
    else:
        report["exact_mc"] = None
    report["all_pass"] = all(r["pass"] for r in rows)

    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["quantity", "analytic", "estimate", "se", "pass"], lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return report, buf.getvalue()


COMMANDS = {"solve": _solve, "frontier": _frontier, "hedge": _hedge, "validate": _validate}


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="scenario JSON file")
    common.add_argument("--output", help="report path (default: stdout)")
    common.add_argument("--seed", type=int, help="override mc.seed")
    common.add_argument("--samples", type=int, help="override mc.samples")
    common.add_argument("--format", choices=["json", "csv"], default="json")
    parser = argparse.ArgumentParser(prog="dgmv", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _fail(code: int, msg: str) -> int:
    print(f"dgmv: {msg}", file=sys.stderr)
    return code


def run(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK

    cfg_path = Path(args.config)
    try:
        raw = json.loads(cfg_path.read_text())
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot read config: {exc}")
    except json.JSONDecodeError as exc:
        return _fail(EXIT_CONFIG, f"config is not valid JSON: {exc}")

    overrides = {"seed": args.seed, "samples": args.samples}
    try:
        if args.samples is not None and args.samples < 1:
            raise ConfigError("--samples: must be >= 1")
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed: must be a 64-bit unsigned integer")
        cfg = resolve_config(raw, cfg_path.parent, overrides)
        inputs = build_inputs(cfg)
        body, table = COMMANDS[args.command](cfg, *inputs)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, f"invalid config: {exc}")
    except OSError as exc:
        return _fail(EXIT_IO, str(exc))
    except ModelError as exc:
        return _fail(EXIT_CONFIG, f"invalid config: {type(exc).__name__}: {exc}")
    except SolverError as exc:
        return _fail(EXIT_SOLVER, f"{type(exc).__name__}: {exc}")

    if args.format == "csv":
        if table is None:
            return _fail(EXIT_CONFIG, f"--format csv is not available for {args.command}")
        text = table
    else:
        text = json.dumps({"command": args.command, "config": cfg, **body}, indent=2) + "\n"

    if args.output:
        try:
            Path(args.output).write_text(text)
        except OSError as exc:
            return _fail(EXIT_IO, f"cannot write report: {exc}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
