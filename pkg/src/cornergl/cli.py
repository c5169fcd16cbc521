"""Batch front-end: config parsing, pipeline dispatch, report files.

Subcommands: solve1d | cost | solve2d | trial | sweep.  Parameters come
from a plain-text key-value config file (TOML-style: `key = value`, `#`
comments, lists as `[a, b, c]`) merged over documented defaults; every
report embeds the config hash, package version, and the numerical knobs
(d_ell, gamma, h, tolerances, seed), and identical config + seed yields
byte-identical files.

    cornergl sweep --config run.toml --out results/ --jobs 2
    CORNER_GL_LOG=debug cornergl solve1d --out results/

Exit status: 0 success, 2 configuration error, 1 downstream failure (a
machine-readable error.json is left in the output directory).
"""

import argparse
import logging
import os
import sys
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (agmon_fit, conjecture_sweep, run_corner_case,
                       splitting_diagnostic, trial_energy, trial_state,
                       _pipeline_sol1d)
from .costfn import D_ELL_COEFF, build_cost_function, cost_report_dict
from .effective1d import (ALPHA_TOL, NEWTON_TOL, THETA0, Grid1D, minimize_1d,
                          solution_to_dict)
from .errors import ConfigError
from .geometry import build_wedge, generate_mesh, save_mesh_txt
from .glsolver import GRAD_TOL_FACTOR, MAX_ITERATIONS, save_field
from .reporting import provenance, write_csv, write_json

log = logging.getLogger("cornergl")

B_MAX_TOOL = 1.75   # solver remains usable slightly past 1/Theta0 for
                    # threshold studies; the physical window is (1, 1/Theta0)

DEFAULTS = {
    "b": 1.5,
    "ell": 6.0,
    "L": 8.0,
    "beta": None,          # overrides delta/side when set
    "delta": 0.2,
    "side": "minus",       # beta = pi - delta (minus) or pi + delta (plus)
    "gamma": None,         # default via gamma_rule
    "gamma_rule": "upper",  # "upper": delta^(2/3); "log": delta^(2/3) log(1/delta)^2
    "h": 0.1,
    "n1d": None,           # default 820 nodes per unit length
    "deltas": [0.1, 0.15, 0.2, 0.25],
    "sides": ["minus"],
    "seed": 0,
    "jobs": 0,             # 0 -> number of physical cores
    "newton_tol": NEWTON_TOL,
    "alpha_tol": ALPHA_TOL,
    "grad_tol_factor": GRAD_TOL_FACTOR,
    "max_iter": MAX_ITERATIONS,
    "save_field": True,
    "save_mesh": False,
}


@dataclass
class RunConfig:
    command: str
    out: Path
    fmt: str = "json"
    params: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.params[key]

    def resolved_beta(self):
        if self.params["beta"] is not None:
            return float(self.params["beta"])
        d = float(self.params["delta"])
        return np.pi - d if self.params["side"] == "minus" else np.pi + d

    def validate(self):
        p = self.params
        b = p["b"]
        if not 1.0 < b <= B_MAX_TOOL:
            raise ConfigError(
                f"b = {b} outside the surface superconductivity window "
                f"(1, 1/Theta0) = (1, {1 / THETA0:.4f}) "
                f"(tool accepts up to {B_MAX_TOOL} for threshold studies)")
        if p["ell"] < 4.0:
            raise ConfigError(f"ell = {p['ell']} below the supported minimum 4")
        if p["L"] <= 0:
            raise ConfigError(f"L = {p['L']} must be positive")
        if self.command in ("solve2d", "trial", "sweep"):
            if p["h"] > p["ell"] / 8:
                raise ConfigError(
                    f"h = {p['h']} too coarse; need h <= ell/8 = {p['ell'] / 8}")
        if self.command == "sweep":
            for d in p["deltas"]:
                if not 0.0 <= d <= 0.4:
                    raise ConfigError(f"sweep delta {d} outside [0, 0.4]")
            for s in p["sides"]:
                if s not in ("minus", "plus"):
                    raise ConfigError(f"side {s!r} not in {{minus, plus}}")
        if p["side"] not in ("minus", "plus"):
            raise ConfigError(f"side {p['side']!r} not in {{minus, plus}}")
        if p["gamma_rule"] not in ("upper", "log"):
            raise ConfigError(f"gamma_rule {p['gamma_rule']!r} not in "
                              "{upper, log}")
        if self.fmt not in ("json", "csv"):
            raise ConfigError(f"format {self.fmt!r} not in {{json, csv}}")
        if p["n1d"] is not None and p["n1d"] < 64:
            raise ConfigError(f"n1d = {p['n1d']} below the minimum 64")
        return self


def parse_config_file(path) -> dict:
    """Minimal TOML-style parser: key = value, # comments, flat keys."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("["):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        out[key.strip()] = _parse_value(val.strip(), path, lineno)
    return out


def _parse_value(val, path, lineno):
    if "#" in val and not val.startswith('"'):
        val = val.split("#", 1)[0].strip()
    if val.lower() in ("true", "false"):
        return val.lower() == "true"
    if val.startswith('"') and val.endswith('"'):
        return val[1:-1]
    if val.startswith("[") and val.endswith("]"):
        inner = val[1:-1].strip()
        if not inner:
            return []
        return [_parse_value(v.strip(), path, lineno) for v in inner.split(",")]
    try:
        return int(val)
    except ValueError:
        pass
    try:
        return float(val)
    except ValueError:
        raise ConfigError(f"{path}:{lineno}: cannot parse value {val!r}")


def _grid(cfg):
    ell = cfg["ell"]
    n = cfg["n1d"] or int(round(820 * ell)) + 1
    return Grid1D(ell, n)


def resolve_gamma(params, beta):
    """Transition half-width: explicit value, or the configured rule."""
    if params["gamma"] is not None:
        return float(params["gamma"])
    d = abs(np.pi - beta)
    if d == 0.0:
        return 0.0
    g = d ** (2.0 / 3.0)
    if params["gamma_rule"] == "log":
        g *= np.log(1.0 / d) ** 2
    return g


def _tolerances(cfg):
    return {
        "newton_tol": cfg["newton_tol"],
        "alpha_tol": cfg["alpha_tol"],
        "grad_tol_factor": cfg["grad_tol_factor"],
        "max_iter": cfg["max_iter"],
    }


def _header(cfg):
    p = dict(cfg.params)
    p["command"] = cfg.command
    p["format"] = cfg.fmt
    p = {k: (list(v) if isinstance(v, (list, tuple)) else v)
         for k, v in p.items() if v is not None}
    gamma = cfg.params["gamma"]
    if gamma is None and cfg.command in ("solve2d", "trial", "sweep"):
        gamma = resolve_gamma(cfg.params, np.pi - float(cfg.params["delta"]))
    return provenance(
        p,
        d_ell=D_ELL_COEFF * float(cfg.params["ell"]) ** -4,
        gamma=gamma,
        h=cfg.params["h"],
        seed=cfg.params["seed"],
        tolerances=_tolerances(cfg.params),
    )


def emit_report(results: dict, fmt: str, out_dir, stem: str):
    """Write a result mapping as JSON or CSV; returns the paths written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    if fmt == "json":
        path = out_dir / f"{stem}.json"
        write_json(path, results)
        paths.append(path)
    elif fmt == "csv":
        path = out_dir / f"{stem}.csv"
        if "rows" in results and isinstance(results["rows"], list) and results["rows"]:
            header = list(results["rows"][0])
            write_csv(path, header, [[r[k] for k in header] for r in results["rows"]])
        else:
            flat = [(k, v) for k, v in results.items()
                    if isinstance(v, (int, float, str, bool))]
            write_csv(path, ["key", "value"], flat)
        paths.append(path)
    else:
        raise ConfigError(f"format {fmt!r} not in {{json, csv}}")
    return paths


def _cmd_solve1d(cfg):
    p = cfg.params
    sol = minimize_1d(p["ell"], p["b"], _grid(p), alpha_tol=p["alpha_tol"],
                      newton_tol=p["newton_tol"])
    report = _header(cfg)
    report.update(solution_to_dict(sol))
    emit_report(report, cfg.fmt, cfg.out, "solve1d")
    if not sol.degenerate:
        t = sol.grid.nodes
        write_csv(cfg.out / "profile.csv", ["t", "f0", "f0_prime"],
                  zip(t, sol.f0.values, sol.f0.derivative_nodal()))
    return 0


def _cmd_cost(cfg):
    p = cfg.params
    sol = minimize_1d(p["ell"], p["b"], _grid(p), alpha_tol=p["alpha_tol"],
                      newton_tol=p["newton_tol"])
    data = build_cost_function(sol)
    report = _header(cfg)
    report.update(cost_report_dict(data))
    emit_report(report, cfg.fmt, cfg.out, "cost_report")
    write_csv(cfg.out / "cost.csv", ["t", "F0", "K0"],
              zip(sol.grid.nodes, data.F0, data.K0))
    return 0


def _cmd_solve2d(cfg):
    p = cfg.params
    beta = cfg.resolved_beta()
    sol1d = minimize_1d(p["ell"], p["b"], _grid(p), alpha_tol=p["alpha_tol"],
                        newton_tol=p["newton_tol"])
    row, fieldv, res, geom, mesh = run_corner_case(
        p["b"], beta, p["L"], p["ell"], p["h"],
        gamma=resolve_gamma(p, beta), seed=p["seed"], sol1d=sol1d)
    split = splitting_diagnostic(fieldv, geom, sol1d, p["b"])
    decay = agmon_fit(fieldv, geom, sol1d)
    report = _header(cfg)
    report.update(res.to_dict())
    report.update({
        "e_trial": row.e_trial,
        "splitting_residual": split.identity_residual,
        "e0_u": split.e0_u,
        "bisectrix_term": split.bisectrix_term,
        "agmon_c_fit": decay.c_fit,
        "agmon_residual": decay.residual,
    })
    emit_report(report, cfg.fmt, cfg.out, "solve2d")
    if p["save_field"]:
        save_field(fieldv, cfg.out / "field.txt")
    if p["save_mesh"]:
        save_mesh_txt(mesh, cfg.out / "mesh.txt")
    return 0


def _cmd_trial(cfg):
    p = cfg.params
    beta = cfg.resolved_beta()
    gamma = resolve_gamma(p, beta)
    sol1d = minimize_1d(p["ell"], p["b"], _grid(p), alpha_tol=p["alpha_tol"],
                        newton_tol=p["newton_tol"])
    geom = build_wedge(beta, p["L"], p["ell"], gamma)
    mesh = generate_mesh(geom, p["h"])
    ts = trial_state(geom, sol1d, gamma)
    e_tr = trial_energy(ts, mesh, p["b"])
    report = _header(cfg)
    report.update({
        "beta": beta,
        "gamma": gamma,
        "e_trial": e_tr,
        "e_trial_minus_2L_e1d": e_tr - 2 * p["L"] * sol1d.e1d,
        "conjectured": -(np.pi - beta) * sol1d.ecorr,
        "phase_continuity_mismatch": ts.phase_continuity_mismatch(),
    })
    emit_report(report, cfg.fmt, cfg.out, "trial")
    return 0


def _cmd_sweep(cfg):
    p = cfg.params
    jobs = p["jobs"] or _physical_cores()
    rep = conjecture_sweep(p["b"], list(p["deltas"]), list(p["sides"]),
                           p["L"], p["ell"], p["h"], jobs=jobs, seed=p["seed"])
    report = _header(cfg)
    report.update({
        "slope": rep.slope,
        "ecorr_reference": rep.ecorr_reference,
        "slope_rel_err": rep.slope_rel_err,
        "e1d": rep.e1d,
        "fit_points": rep.fit_points,
        "failures": [list(f) for f in rep.failures],
        "rows": [r.to_dict() for r in rep.rows],
    })
    write_json(cfg.out / "sweep.json", report)
    header = ["beta", "delta", "side", "e_gamma", "e_corner", "e_trial",
              "grad_norm", "iterations", "converged"]
    write_csv(cfg.out / "sweep.csv", header,
              [[getattr(r, k) for k in header] for r in rep.rows])
    write_csv(cfg.out / "sweep_plot.csv", ["pi_minus_beta", "e_corner"],
              [[np.pi - r.beta, r.e_corner] for r in rep.rows])
    return 0


_COMMANDS = {
    "solve1d": _cmd_solve1d,
    "cost": _cmd_cost,
    "solve2d": _cmd_solve2d,
    "trial": _cmd_trial,
    "sweep": _cmd_sweep,
}


def _physical_cores():
    try:
        import psutil
        n = psutil.cpu_count(logical=False)
        if n:
            return n
    except ImportError:
        pass
    return os.cpu_count() or 1


def build_config(argv=None) -> RunConfig:
    parser = argparse.ArgumentParser(
        prog="cornergl",
        description="corner-energy pipelines for the surface GL model")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", type=Path, default=None,
                        help="TOML-style key = value file")
    parser.add_argument("--out", type=Path, default=Path("cornergl-out"))
    parser.add_argument("--jobs", type=int, default=None)
    parser.add_argument("--format", dest="fmt", choices=("json", "csv"),
                        default="json")
    args = parser.parse_args(argv)

    params = dict(DEFAULTS)
    if args.config is not None:
        file_cfg = parse_config_file(args.config)
        unknown = set(file_cfg) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        params.update(file_cfg)
    if args.jobs is not None:
        params["jobs"] = args.jobs
    return RunConfig(command=args.command, out=args.out, fmt=args.fmt,
                     params=params).validate()


def _error_record(exc):
    module = "cornergl"
    for frame in traceback.extract_tb(exc.__traceback__):
        if "cornergl" in frame.filename:
            module = Path(frame.filename).stem
    return {"error": type(exc).__name__, "module": module, "message": str(exc)}


def main(argv=None):
    logging.basicConfig(
        level=os.environ.get("CORNER_GL_LOG", "warning").upper(),
        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_config(argv)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 2
    cfg.out.mkdir(parents=True, exist_ok=True)
    try:
        log.info("running %s -> %s", cfg.command, cfg.out)
        return _COMMANDS[cfg.command](cfg)
    except Exception as exc:
        record = _error_record(exc)
        write_json(cfg.out / "error.json", record)
        sys.stderr.write(f"{record['error']} in {record['module']}: "
                         f"{record['message']}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
