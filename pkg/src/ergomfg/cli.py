"""Command-line front end: configuration, solve artifacts and sweeps.

Usage::

    ergomfg <command> --config run.toml [--out DIR] [--seed N] [--threads N] [--quiet]

Commands are ``solve-hjb``, ``solve-fp``, ``solve-mfg``, ``verify-asymptotics``,
``simulate`` and ``sweep``.  Every run writes one CSV per field (``node,d,value``)
and a ``report.json`` that echoes the fully resolved configuration.

Configuration is TOML.  Any key can be overridden from the environment with
``ERGOMFG__<SECTION>__<KEY>=<value>``; the value is read as a TOML literal
and falls back to a plain string.

Exit codes: 0 success, 2 invalid configuration, 3 solver failure,
4 verification failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import itertools
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from . import __version__
from .asymptotics import boundary_rate_checks
from .domain import Grid, GridError, Interval, RadialDisk, build_grid, centered_gradient
from .fokker_planck import solve_fp
from .hjb import (
    BOUNDARY_MODES,
    HjbConvergenceError,
    HjbProblem,
    HjbTemplate,
    continuation_in_eps,
    max_spacing,
    solve_ergodic_hjb,
)
from .linearized import SCHEMES, SingularOperatorError
from .mfg import COUPLING_KINDS, CouplingSpec, MfgSolverError, solve_mfg
from .particles import SdeConfig, SimulationError, empirical_distance, simulate

log = logging.getLogger("ergomfg")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VERIFY = 4

ENV_PREFIX = "ERGOMFG__"

COMMANDS = ("solve-hjb", "solve-fp", "solve-mfg", "verify-asymptotics", "simulate", "sweep")

DEFAULTS: Dict[str, Dict[str, Any]] = {
    "domain": {"kind": "interval", "a": 0.0, "b": 1.0, "radius": 1.0, "dim": 2},
    "grid": {"n_cells": 512, "eps": 1.0 / 128},
    "problem": {"p": 2.0, "f0": 0.0, "boundary_mode": "matched_neumann"},
    "solver": {
        "tol": 1e-10,
        "max_iter": 100,
        "scheme": "hybrid",
        "eps_schedule": [],
        "richardson_order": 1.0,
    },
    "coupling": {
        "kind": "none",
        "strength": 0.0,
        "width": 0.05,
        "damping": 0.5,
        "tol": 1e-8,
        "max_iter": 200,
    },
    "sde": {
        "n_particles": 10000,
        "dt": 1e-3,
        "t_burn": 10.0,
        "t_sample": 50.0,
        "d_floor": 0.0,
        "substep_safety": 0.1,
        "noise_safety": 0.2,
    },
    "verify": {"tolerance": 0.05, "window": [2.0, 20.0]},
    "sweep": {"command": "solve-hjb", "parameters": {}},
    "run": {"seed": 0, "threads": 1},
}


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending key."""

    def __init__(self, key: str, msg: str):
        super().__init__(f"{key}: {msg}")
        self.key = key


class VerificationFailed(RuntimeError):
    pass


# ------------------------------------------------------------------ config


def _merge(base: Dict[str, Any], extra: Mapping[str, Any], path: str = "") -> Dict[str, Any]:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        where = f"{path}{key}"
        if key not in out:
            raise ConfigError(where, "unknown key")
        if isinstance(out[key], dict) and key != "parameters":
            if not isinstance(value, Mapping):
                raise ConfigError(where, "expected a table")
            out[key] = _merge(out[key], value, where + ".")
        else:
            out[key] = copy.deepcopy(value)
    return out


def _parse_literal(text: str) -> Any:
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def env_overrides(environ: Mapping[str, str]) -> Dict[str, Any]:
    """``ERGOMFG__GRID__EPS=0.01`` becomes ``{"grid": {"eps": 0.01}}``."""
    out: Dict[str, Any] = {}
    for name, text in sorted(environ.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        parts = [p.lower() for p in name[len(ENV_PREFIX):].split("__") if p]
        if len(parts) != 2:
            raise ConfigError(name, "environment overrides need the form ERGOMFG__SECTION__KEY")
        out.setdefault(parts[0], {})[parts[1]] = _parse_literal(text)
    return out


def set_key(cfg: Dict[str, Any], dotted: str, value: Any) -> None:
    section, _, key = dotted.partition(".")
    if section not in cfg or not key or key not in cfg[section]:
        raise ConfigError(dotted, "unknown key")
    cfg[section][key] = value


def load_config(path: Optional[str], environ: Optional[Mapping[str, str]] = None) -> Dict[str, Any]:
    """Defaults, then the TOML file, then environment overrides."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError("--config", f"file not found: {path}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError("--config", f"cannot parse {path}: {exc}") from None
        cfg = _merge(cfg, data)
    cfg = _merge(cfg, env_overrides(os.environ if environ is None else environ))
    return cfg


def _number(cfg, section, key, *, positive=False, integer=False):
    value = cfg[section][key]
    where = f"{section}.{key}"
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(where, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(where, "must be finite")
    if integer and int(value) != value:
        raise ConfigError(where, "must be an integer")
    if positive and value <= 0:
        raise ConfigError(where, "must be positive")
    return int(value) if integer else float(value)


def _choice(cfg, section, key, options):
    value = cfg[section][key]
    if value not in options:
        raise ConfigError(f"{section}.{key}", f"must be one of {list(options)}, got {value!r}")
    return value


def validate(cfg: Dict[str, Any]) -> Dict[str, Any]:
    """Check every precondition before any solve; returns the config."""
    kind = _choice(cfg, "domain", "kind", ("interval", "disk"))
    try:
        if kind == "interval":
            spec = Interval(_number(cfg, "domain", "a"), _number(cfg, "domain", "b"))
        else:
            spec = RadialDisk(
                _number(cfg, "domain", "radius", positive=True),
                _number(cfg, "domain", "dim", integer=True),
            )
    except GridError as exc:
        raise ConfigError("domain", str(exc)) from None

    p = _number(cfg, "problem", "p")
    if not 1.0 < p <= 2.0 or 1.999 < p < 2.0:
        raise ConfigError("problem.p", "must lie in (1, 1.999] or equal 2")
    _number(cfg, "problem", "f0")
    _choice(cfg, "problem", "boundary_mode", BOUNDARY_MODES)

    n_cells = _number(cfg, "grid", "n_cells", positive=True, integer=True)
    eps = _number(cfg, "grid", "eps", positive=True)
    schedule = cfg["solver"]["eps_schedule"]
    if not isinstance(schedule, list):
        raise ConfigError("solver.eps_schedule", "must be a list")
    for i, e in enumerate(schedule):
        if isinstance(e, bool) or not isinstance(e, (int, float)) or not e > 0:
            raise ConfigError(f"solver.eps_schedule[{i}]", f"must be a positive number, got {e!r}")
    if any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise ConfigError("solver.eps_schedule", "must be strictly decreasing")
    for where, e in [("grid.eps", eps)] + [(f"solver.eps_schedule[{i}]", e) for i, e in enumerate(schedule)]:
        try:
            g = build_grid(spec, n_cells, float(e))
        except GridError as exc:
            raise ConfigError(where, str(exc)) from None
        if g.h > max_spacing(g.eps, p) * (1 + 1e-9):
            raise ConfigError(
                "grid.n_cells",
                f"{n_cells} cells leave h={g.h:.3g} above (p-1) eps={max_spacing(g.eps, p):.3g} at {where}",
            )

    _number(cfg, "solver", "tol", positive=True)
    _number(cfg, "solver", "max_iter", positive=True, integer=True)
    _choice(cfg, "solver", "scheme", SCHEMES)
    _number(cfg, "solver", "richardson_order", positive=True)

    _choice(cfg, "coupling", "kind", COUPLING_KINDS)
    _number(cfg, "coupling", "strength")
    _number(cfg, "coupling", "width", positive=True)
    damping = _number(cfg, "coupling", "damping", positive=True)
    if damping > 1:
        raise ConfigError("coupling.damping", "must lie in (0, 1]")
    _number(cfg, "coupling", "tol", positive=True)
    _number(cfg, "coupling", "max_iter", positive=True, integer=True)

    for key in ("n_particles",):
        _number(cfg, "sde", key, positive=True, integer=True)
    for key in ("dt", "t_sample", "substep_safety", "noise_safety"):
        _number(cfg, "sde", key, positive=True)
    for key in ("t_burn", "d_floor"):
        if _number(cfg, "sde", key) < 0:
            raise ConfigError(f"sde.{key}", "must be non-negative")
    try:
        sde = _sde_config(cfg)
        sde.floor_for(build_grid(spec, n_cells, eps))
    except ValueError as exc:
        raise ConfigError("sde", str(exc)) from None

    if _number(cfg, "verify", "tolerance") < 0:
        raise ConfigError("verify.tolerance", "must be non-negative")
    win = cfg["verify"]["window"]
    if not (isinstance(win, list) and len(win) == 2 and 0 < win[0] < win[1]):
        raise ConfigError("verify.window", "must be [lo, hi] multiples of eps with 0 < lo < hi")

    seed = _number(cfg, "run", "seed", integer=True)
    if not 0 <= seed < 2**64:
        raise ConfigError("run.seed", "must be an unsigned 64-bit integer")
    _number(cfg, "run", "threads", positive=True, integer=True)

    _choice(cfg, "sweep", "command", tuple(c for c in COMMANDS if c != "sweep"))
    params = cfg["sweep"]["parameters"]
    if not isinstance(params, Mapping):
        raise ConfigError("sweep.parameters", "must be a table of key -> list")
    for key, values in params.items():
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep.parameters.{key}", "must be a non-empty list")
        section, _, name = key.partition(".")
        if section not in DEFAULTS or name not in DEFAULTS[section] or section in ("sweep", "run"):
            raise ConfigError(f"sweep.parameters.{key}", "unknown or non-sweepable key")
    return cfg


def _domain(cfg) -> Any:
    d = cfg["domain"]
    if d["kind"] == "interval":
        return Interval(float(d["a"]), float(d["b"]))
    return RadialDisk(float(d["radius"]), int(d["dim"]))


def _grid(cfg, eps: Optional[float] = None) -> Grid:
    return build_grid(_domain(cfg), int(cfg["grid"]["n_cells"]), float(eps or cfg["grid"]["eps"]))


def _sde_config(cfg) -> SdeConfig:
    s = cfg["sde"]
    return SdeConfig(
        n_particles=int(s["n_particles"]),
        dt=float(s["dt"]),
        t_burn=float(s["t_burn"]),
        t_sample=float(s["t_sample"]),
        seed=int(cfg["run"]["seed"]),
        d_floor=float(s["d_floor"]) if s["d_floor"] > 0 else None,
        substep_safety=float(s["substep_safety"]),
        noise_safety=float(s["noise_safety"]),
    )


def config_hash(cfg: Mapping[str, Any]) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


# --------------------------------------------------------------- artifacts


def write_field(path: Path, grid: Grid, values: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "d", "value"])
        for x, d, v in zip(grid.nodes, grid.d, np.asarray(values, dtype=float)):
            w.writerow([repr(float(x)), repr(float(d)), repr(float(v))])


def _clean(obj: Any) -> Any:
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _report(cfg, command: str, **fields) -> Dict[str, Any]:
    base = {
        "command": command,
        "version": __version__,
        "seed": int(cfg["run"]["seed"]),
        "lambda": None,
        "eps_schedule": list(cfg["solver"]["eps_schedule"]) or [cfg["grid"]["eps"]],
        "rate_fits": {},
        "residuals": {},
        "history": [],
        "escape_count": None,
        "config": cfg,
    }
    base.update(fields)
    return _clean(base)


def write_report(out: Path, report: Dict[str, Any]) -> None:
    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------- commands


def _hjb(cfg, grid: Grid):
    pr = cfg["problem"]
    problem = HjbProblem(
        grid,
        float(pr["p"]),
        np.full(grid.size, float(pr["f0"])),
        boundary_mode=pr["boundary_mode"],
        tol=float(cfg["solver"]["tol"]),
        max_iter=int(cfg["solver"]["max_iter"]),
    )
    return problem, solve_ergodic_hjb(problem)


def _residuals(sol) -> Dict[str, Any]:
    return {"hjb_abs": sol.residual_inf, "hjb_rel": sol.residual_rel, "hjb_iterations": sol.iterations}


def cmd_solve_hjb(cfg, out: Path) -> Dict[str, Any]:
    schedule = [float(e) for e in cfg["solver"]["eps_schedule"]]
    if len(schedule) > 1:
        pr = cfg["problem"]
        f0 = float(pr["f0"])
        template = HjbTemplate(
            _domain(cfg),
            float(pr["p"]),
            f=lambda x: np.full_like(x, f0),
            n_cells=int(cfg["grid"]["n_cells"]),
            boundary_mode=pr["boundary_mode"],
            tol=float(cfg["solver"]["tol"]),
            max_iter=int(cfg["solver"]["max_iter"]),
        )
        cont = continuation_in_eps(template, schedule, order=float(cfg["solver"]["richardson_order"]))
        grid, sol = cont.problems[-1].grid, cont.solutions[-1]
        history = [{"eps": e, "lambda": s.lam, "iterations": s.iterations} for e, s in zip(cont.eps, cont.solutions)]
        lam = cont.lambda_extrapolated
        extra = {
            "lambda_finest": sol.lam,
            "monotone_in_eps": cont.monotone,
            "observed_order": cont.observed_order,
        }
    else:
        grid = _grid(cfg, schedule[0] if schedule else None)
        _, sol = _hjb(cfg, grid)
        history = [{"eps": grid.eps, "lambda": sol.lam, "iterations": sol.iterations}]
        lam, extra = sol.lam, {}
    write_field(out / "u.csv", grid, sol.u)
    write_field(out / "drift_b.csv", grid, sol.drift_b)
    return _report(cfg, "solve-hjb", **{"lambda": lam, "residuals": _residuals(sol), "history": history}, **extra)


def cmd_solve_fp(cfg, out: Path) -> Dict[str, Any]:
    grid = _grid(cfg)
    _, sol = _hjb(cfg, grid)
    fp = solve_fp(sol.drift_b, grid, cfg["solver"]["scheme"])
    write_field(out / "u.csv", grid, sol.u)
    write_field(out / "m.csv", grid, fp.m)
    fits = {"m": fp.rate_fit.as_dict() if fp.rate_fit else None}
    res = _residuals(sol)
    res["mass_error"] = abs(fp.mass - 1.0)
    return _report(
        cfg,
        "solve-fp",
        **{"lambda": sol.lam, "rate_fits": fits, "residuals": res},
        tail_masses=[{"eta": e, "mass_outside": v} for e, v in fp.tail_masses],
    )


def _coupling(cfg) -> CouplingSpec:
    c = cfg["coupling"]
    return CouplingSpec(
        f0=float(cfg["problem"]["f0"]),
        kind=c["kind"],
        strength=float(c["strength"]),
        width=float(c["width"]),
    )


def cmd_solve_mfg(cfg, out: Path) -> Dict[str, Any]:
    grid = _grid(cfg)
    c = cfg["coupling"]
    eq = solve_mfg(
        grid,
        float(cfg["problem"]["p"]),
        _coupling(cfg),
        float(c["damping"]),
        float(c["tol"]),
        int(c["max_iter"]),
        scheme=cfg["solver"]["scheme"],
        boundary_mode=cfg["problem"]["boundary_mode"],
    )
    if not eq.converged:
        raise MfgSolverError(f"no convergence, last L1 change {eq.residual:.3e}", eq.iterations)
    write_field(out / "u.csv", grid, eq.u)
    write_field(out / "m.csv", grid, eq.m)
    res = _residuals(eq.hjb)
    res["fixed_point_l1"] = eq.residual
    return _report(
        cfg,
        "solve-mfg",
        **{
            "lambda": eq.lam,
            "residuals": res,
            "history": [{"iteration": k, "l1_change": r, "lambda": lam} for k, r, lam in eq.history],
        },
        monotone=eq.monotone,
    )


def cmd_verify(cfg, out: Path) -> Dict[str, Any]:
    grid = _grid(cfg)
    p = float(cfg["problem"]["p"])
    _, sol = _hjb(cfg, grid)
    fp = solve_fp(sol.drift_b, grid, cfg["solver"]["scheme"])
    lo, hi = cfg["verify"]["window"]
    window = (lo * grid.eps, hi * grid.eps)
    checks = boundary_rate_checks(
        grid.d,
        sol.u,
        centered_gradient(sol.u, grid),
        sol.drift_b,
        fp.m,
        p,
        window,
        float(cfg["verify"]["tolerance"]),
    )
    for c in checks:
        log.info(
            "%s %-20s measured %.6g expected %.6g rel.err %.3e",
            "PASS" if c.passed else "FAIL",
            c.name,
            c.measured,
            c.expected,
            c.rel_error,
        )
    report = _report(
        cfg,
        "verify-asymptotics",
        **{"lambda": sol.lam, "rate_fits": {c.name: c.as_dict() for c in checks}, "residuals": _residuals(sol)},
        passed=all(c.passed for c in checks),
    )
    if not report["passed"]:
        write_report(out, report)
        raise VerificationFailed(", ".join(c.name for c in checks if not c.passed))
    return report


def cmd_simulate(cfg, out: Path) -> Dict[str, Any]:
    grid = _grid(cfg)
    p = float(cfg["problem"]["p"])
    _, sol = _hjb(cfg, grid)
    fp = solve_fp(sol.drift_b, grid, cfg["solver"]["scheme"])
    emp = simulate(
        _sde_config(cfg),
        -sol.drift_b,
        grid,
        p,
        running_cost=np.full(grid.size, float(cfg["problem"]["f0"])),
        threads=int(cfg["run"]["threads"]),
    )
    write_field(out / "m.csv", grid, fp.m)
    write_field(out / "histogram.csv", grid, emp.histogram)
    res = _residuals(sol)
    res["histogram_l1"] = empirical_distance(emp, fp)
    res["escape_rate"] = emp.escape_rate
    return _report(
        cfg,
        "simulate",
        **{"lambda": sol.lam, "residuals": res, "escape_count": emp.escape_count},
        steps=emp.steps,
        n_samples=emp.n_samples,
        min_distance=emp.min_distance,
        cost_average=emp.cost_average,
    )


HANDLERS = {
    "solve-hjb": cmd_solve_hjb,
    "solve-fp": cmd_solve_fp,
    "solve-mfg": cmd_solve_mfg,
    "verify-asymptotics": cmd_verify,
    "simulate": cmd_simulate,
}


def execute(command: str, cfg: Dict[str, Any], out: Path) -> int:
    """Run one validated command; maps failures to exit codes."""
    out.mkdir(parents=True, exist_ok=True)
    try:
        report = HANDLERS[command](cfg, out)
    except VerificationFailed as exc:
        log.error("verification failed: %s", exc)
        return EXIT_VERIFY
    except MfgSolverError as exc:
        log.error("solver failure (mfg %s)", exc)
        return EXIT_SOLVER
    except (HjbConvergenceError, SingularOperatorError, SimulationError) as exc:
        log.error("solver failure: %s", exc)
        return EXIT_SOLVER
    write_report(out, report)
    if report.get("lambda") is not None:
        log.info("lambda = %.12g", report["lambda"])
    return EXIT_OK


def _sweep_one(job: Tuple[str, Dict[str, Any], str]) -> Tuple[str, int]:
    command, cfg, out = job
    logging.getLogger("ergomfg").setLevel(logging.WARNING)
    return out, execute(command, cfg, Path(out))


def cmd_sweep(cfg, out: Path) -> int:
    params = cfg["sweep"]["parameters"]
    keys = sorted(params)
    jobs = []
    for combo in itertools.product(*(params[k] for k in keys)):
        run = copy.deepcopy(cfg)
        run["sweep"] = copy.deepcopy(DEFAULTS["sweep"])
        for k, v in zip(keys, combo):
            set_key(run, k, v)
        try:
            validate(run)
        except ConfigError as exc:
            raise ConfigError(f"sweep[{dict(zip(keys, combo))}].{exc.key}", str(exc).split(": ", 1)[-1]) from None
        jobs.append((cfg["sweep"]["command"], run, str(out / config_hash(run))))

    out.mkdir(parents=True, exist_ok=True)
    workers = int(cfg["run"]["threads"])
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]

    summary = [
        {"dir": Path(d).name, "exit_code": code, "parameters": {k: v for k, v in zip(keys, combo)}}
        for (d, code), combo in zip(results, itertools.product(*(params[k] for k in keys)))
    ]
    with open(out / "sweep.json", "w") as fh:
        json.dump(_clean({"version": __version__, "config": cfg, "runs": summary}), fh, indent=2, sort_keys=True)
        fh.write("\n")
    for entry in summary:
        log.info("%s exit %d %s", entry["dir"], entry["exit_code"], entry["parameters"])
    return max((code for _, code in results), default=EXIT_OK)


# --------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ergomfg", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="TOML configuration file")
        sp.add_argument("--out", default="ergomfg-out", help="output directory")
        sp.add_argument("--seed", type=int, help="override run.seed")
        sp.add_argument("--threads", type=int, help="override run.threads")
        sp.add_argument("--quiet", action="store_true", help="only print errors")
    return parser


def run_command(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(format="%(message)s", stream=sys.stderr, force=True)
    log.setLevel(logging.ERROR if args.quiet else logging.INFO)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["run"]["seed"] = args.seed
        if args.threads is not None:
            cfg["run"]["threads"] = args.threads
        validate(cfg)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG

    out = Path(args.out)
    if args.command == "sweep":
        try:
            return cmd_sweep(cfg, out)
        except ConfigError as exc:
            log.error("configuration error: %s", exc)
            return EXIT_CONFIG
    return execute(args.command, cfg, out)


def main() -> None:  # pragma: no cover - thin wrapper
    sys.exit(run_command())
