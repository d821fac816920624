"""Command line front end: spectrum | simulate | verify | extinction | all.

A single JSON config drives every stage.  Exit codes: 0 all checks passed,
1 at least one gated check failed, 2 configuration or regime error (bad
config, subcritical field where a positive eigenvalue is required, d < 3
for the extinction solves).  Numeric output uses 17 significant digits.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .analysis import (NotSupercritical, domain_fraction_check,
                       dichotomy_check, front_speed_check, growth_rate_fit,
                       limit_moment_check, moving_window_check,
                       reports_to_json)
from .extinction import DimensionTooLow, compare_M_to_mc, fk_survival_mc, solve_M
from .grid import Grid
from .mc import MCConfig, run_ensemble, with_horizon
from .moments import compute_f, xi_moment
from .rate_field import RateField
from .regions import Region
from .spectral import (NoPositiveEigenvalue, discretize, principal_eigenpair)

EXIT_OK, EXIT_CHECK_FAIL, EXIT_CONFIG = 0, 1, 2


def _load_config(path: str, overrides) -> dict:
    with open(path) as fh:
        cfg = json.load(fh)
    if overrides.seed is not None:
        cfg.setdefault("mc", {})["seed"] = overrides.seed
    return cfg


def _spectral_from_config(cfg: dict):
    fld = RateField.from_config(cfg["field"])
    g = cfg["grid"]
    grid = Grid.for_field(fld, float(g["extent"]), int(g["n"]))
    mat = discretize(fld, grid)
    return fld, grid, principal_eigenpair(mat)


def _mc_config(cfg: dict, fld: RateField) -> MCConfig:
    mc = dict(cfg["mc"])
    regions = tuple(Region.from_config(r) for r in cfg.get("regions", []))
    windows = tuple((Region.from_config(w["region"]), w["velocity"])
                    for w in cfg.get("windows", []))
    obs = mc.get("obs_times")
    if obs is None:
        dt = float(mc["obs_spacing"])
        obs = np.arange(dt, float(mc["t_end"]) + 1e-9, dt)
    return MCConfig(field=fld, x0=mc.get("x0", np.zeros(fld.dim)),
                    t_end=float(mc["t_end"]), obs_times=obs,
                    replicas=int(mc.get("replicas", 100)),
                    seed=int(mc.get("seed", 0)),
                    cap=int(mc.get("cap", 1_000_000)),
                    regions=regions, windows=windows)


def _write_table(rows, header, out: Path, stem: str, fmt: str) -> Path:
    if fmt == "json":
        path = out / f"{stem}.json"
        with open(path, "w") as fh:
            json.dump([dict(zip(header, r)) for r in rows], fh, indent=2)
    else:
        path = out / f"{stem}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in rows:
                w.writerow([f"{x:.17g}" if isinstance(x, float) else x
                            for x in r])
    return path


def cmd_spectrum(cfg: dict, out: Path, fmt: str, threads: int) -> int:
    from .plots import psi_figure
    _, _, spec = _spectral_from_config(cfg)
    spec.to_csv(out / "spectrum.csv")
    spec.to_json(out / "spectrum.json")
    psi_figure(spec, out / "spectrum.png")
    print(f"lambda0 = {spec.lambda0:.17g}")
    print(f"mass    = {spec.mass:.17g}")
    print(f"tail    = {spec.tail_slope:.17g}")
    print(f"gap     = {spec.gap:.17g}")
    return EXIT_OK


def cmd_simulate(cfg: dict, out: Path, fmt: str, threads: int) -> int:
    fld, _, spec = _supercritical_or_none(cfg)
    mc = _mc_config(cfg, fld)
    psi_eval = spec.psi_at if spec is not None else None
    stats = run_ensemble(mc, psi_eval=psi_eval, threads=threads)
    stats.to_csv(out / "ensemble.csv")
    stats.save_manifest(out / "manifest.json")
    if spec is not None:
        from .plots import growth_figure
        growth_figure(stats, spec.lambda0, out / "growth.png")
    print(f"replicas = {stats.replicas}, exploded = "
          f"{int(np.count_nonzero(stats.exploded))}")
    return EXIT_OK


def _supercritical_or_none(cfg: dict):
    fld = RateField.from_config(cfg["field"])
    if fld.max_rate() == 0.0:
        g = cfg["grid"]
        return fld, Grid.for_field(fld, float(g["extent"]), int(g["n"])), None
    return _spectral_from_config(cfg)


def cmd_verify(cfg: dict, out: Path, fmt: str, threads: int) -> int:
    fld, _, spec = _spectral_from_config(cfg)
    mc = _mc_config(cfg, fld)
    ana = cfg.get("analysis", {})
    stats = run_ensemble(mc, psi_eval=spec.psi_at, threads=threads)
    table = compute_f(spec, nmax=int(ana.get("nmax", 2)))
    reports = [growth_rate_fit(stats, spec.lambda0)]
    for n in range(1, table.nmax + 1):
        reports.append(limit_moment_check(stats, table, n))
    for k, reg in enumerate(mc.regions):
        reports.append(domain_fraction_check(stats, spec, reg, region_index=k))
    for k, (reg, vel) in enumerate(mc.windows):
        b = math.sqrt(spec.lambda0 / 2.0)
        if float(np.linalg.norm(vel)) < b:
            reports.append(
                moving_window_check(stats, spec, reg, vel, window_index=k))
    if ana.get("front", True):
        reports.append(front_speed_check(
            stats, spec, delta_frac=float(ana.get("front_delta", 0.15)),
            confidence=float(ana.get("front_confidence", 0.95))))
    if ana.get("dichotomy", False):
        reports.append(dichotomy_check(stats))
    reports_to_json(reports, out / "reports.json")
    rows = [(r.theorem, r.statistic, r.predicted, r.estimate, r.stderr,
             "pass" if r.passed else "fail") for r in reports]
    _write_table(rows, ["theorem", "statistic", "predicted", "estimate",
                        "stderr", "verdict"], out, "reports", fmt)
    from .plots import front_figure, growth_figure, martingale_figure
    growth_figure(stats, spec.lambda0, out / "growth.png")
    martingale_figure(stats, spec.lambda0, out / "martingale.png")
    front_figure(stats, math.sqrt(spec.lambda0 / 2.0), out / "front.png")
    for r in reports:
        print(r.line())
    return EXIT_OK if all(r.passed for r in reports) else EXIT_CHECK_FAIL


def cmd_extinction(cfg: dict, out: Path, fmt: str, threads: int) -> int:
    fld = RateField.from_config(cfg["field"])
    g = cfg["grid"]
    grid = Grid.for_field(fld, float(g["extent"]), int(g["n"]))
    ext = cfg.get("extinction", {})
    nmax = int(ext.get("nmax", 3))
    tables = [solve_M(fld, grid, nmax=nmax, variant=v)
              for v in ("paper_literal", "feynman_kac")]
    for tab in tables:
        tab.to_csv(out / f"extinction_{tab.variant}.csv")
    from .plots import extinction_figure
    extinction_figure(tables, out / "extinction.png")

    x0 = np.asarray(ext.get("x0", np.zeros(fld.dim)), dtype=float)
    fk_mean, fk_se = fk_survival_mc(
        fld, x0, replicas=int(ext.get("fk_replicas", 50_000)),
        seed=int(ext.get("fk_seed", 1)))
    verdict = {
        "x0": x0.tolist(),
        "fk_mc": {"mean": fk_mean, "stderr": fk_se},
    }
    reports = []
    if "mc" in cfg:
        mc = _mc_config(cfg, fld)
        stats = run_ensemble(mc, threads=threads)
        for tab in tables:
            reports.append(compare_M_to_mc(tab, stats, 1))
    for tab in tables:
        verdict[tab.variant] = {"M1_x0": tab.M_at(1, x0)}
    verdict["reports"] = [r.to_dict() for r in reports]
    with open(out / "extinction_verdict.json", "w") as fh:
        json.dump(verdict, fh, indent=2)
    for tab in tables:
        print(f"{tab.variant}: M1(x0) = {tab.M_at(1, x0):.17g}")
    print(f"feynman-kac MC: {fk_mean:.17g} +/- {fk_se:.3g}")
    for r in reports:
        print(r.line())
    ok = all(r.passed for r in reports if r.details.get("in_range", True))
    return EXIT_OK if ok else EXIT_CHECK_FAIL


def cmd_all(cfg: dict, out: Path, fmt: str, threads: int) -> int:
    rc = cmd_spectrum(cfg, out, fmt, threads)
    rc = max(rc, cmd_verify(cfg, out, fmt, threads))
    fld = RateField.from_config(cfg["field"])
    if fld.dim >= 3:
        rc = max(rc, cmd_extinction(cfg, out, fmt, threads))
    return rc


COMMANDS = {
    "spectrum": cmd_spectrum,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "extinction": cmd_extinction,
    "all": cmd_all,
}


def main(argv=None) -> int:
    p = argparse.ArgumentParser(
        prog="bdsim",
        description="branching diffusion: spectral solve, exact Monte Carlo, "
                    "theorem checks, finite-limit probabilities")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config seed")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    args = p.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        cfg = _load_config(args.config, args)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg, out, args.format, args.threads)
    except (NoPositiveEigenvalue, DimensionTooLow, NotSupercritical) as exc:
        print(f"regime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (KeyError, ValueError) as exc:
        print(f"config error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
