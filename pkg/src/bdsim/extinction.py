"""Probabilities of ending with a finite population, d >= 3 radial solves.

M^n(r) is the chance that a process started from one particle at radius r
ends up with exactly n particles forever.  Two variants are produced:

* paper_literal solves the printed system (1/2)Lap M^1 = v with M^1 -> 1 at
  infinity, and (1/2)Lap M^n = v * sum_k M^k M^{n-k} with M^n -> 0.
* feynman_kac solves (1/2)Lap M^1 = v M^1, which is the equation forced by
  the representation M^1(x) = E[exp(-int v(X_s) ds)] for a single particle
  that never splits.  Only n = 1 is defined for this variant.

Both keep the far field honest by substituting the decaying part
w ~ C r^{2-d} and closing the outer face with w_ghost = w_R (R/r_ghost)^{d-2}.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .grid import Grid, sphere_surface
from .rate_field import RateField
from .spectral import _assemble

VARIANTS = ("paper_literal", "feynman_kac")


class DimensionTooLow(ValueError):
    """Finite terminal populations have probability zero below d = 3."""


@dataclass(frozen=True)
class ExtinctionTable:
    variant: str
    nmax: int
    grid: Grid
    M: np.ndarray            # (nmax, m) node values; rows beyond the variant's
                             # reach are NaN

    def M_at(self, n: int, point) -> float:
        if not 1 <= n <= self.nmax:
            raise ValueError(f"order {n} outside 1..{self.nmax}")
        p = np.atleast_1d(np.asarray(point, dtype=float))
        r = float(np.linalg.norm(p))
        return float(np.interp(r, self.grid.nodes, self.M[n - 1]))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["radius"] + [f"M{n}" for n in range(1, self.nmax + 1)])
            for i, r in enumerate(self.grid.nodes):
                w.writerow([f"{r:.17g}"]
                           + [f"{self.M[n, i]:.17g}" for n in range(self.nmax)])


def _radial_halflap(field: RateField, grid: Grid, with_potential: bool):
    """Banded form of (1/2)Lap [- v] with the r^{2-d} outer closure.

    Returns (ab, v_cells) where ab is the (3, m) banded matrix of the
    operator acting on the decaying unknown.
    """
    d = grid.dim
    if d < 3:
        raise DimensionTooLow("finite-limit probabilities need dim >= 3")
    lo, hi = grid.cell_edges()
    if field.discontinuous:
        a, beta = field.support_radius, field.amplitude
        ov = np.clip(np.minimum(hi, a) - np.maximum(lo, 0.0), 0.0, None)
        v_cells = beta * ov / (hi - lo)
    else:
        v_cells = field.eval_radial(grid.nodes)
    mat = _assemble(grid, np.zeros(grid.n), v_cells, field.max_rate())
    diag = mat.diag.copy()
    if with_potential:
        diag -= v_cells
    # outer face: the Dirichlet ghost is replaced by algebraic decay
    r_last = grid.nodes[-1]
    r_ghost = r_last + grid.h
    c_ghost = sphere_surface(d) * (r_last + grid.h / 2.0) ** (d - 1) \
        / (2.0 * grid.h * grid.weights[-1])
    diag[-1] += c_ghost * (r_last / r_ghost) ** (d - 2)
    m = grid.n
    ab = np.zeros((3, m))
    ab[0, 1:] = mat.upper
    ab[1, :] = diag
    ab[2, :-1] = mat.lower
    return ab, v_cells


def solve_M(field: RateField, grid: Grid, nmax: int = 3,
            variant: str = "paper_literal") -> ExtinctionTable:
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    if nmax < 1:
        raise ValueError("nmax must be >= 1")
    M = np.full((nmax, grid.n), np.nan)
    if variant == "feynman_kac":
        ab, v = _radial_halflap(field, grid, with_potential=True)
        w = solve_banded((1, 1), ab, -v)
        M[0] = 1.0 - w
        return ExtinctionTable(variant=variant, nmax=nmax, grid=grid, M=M)
    ab, v = _radial_halflap(field, grid, with_potential=False)
    M[0] = 1.0 - solve_banded((1, 1), ab, -v)
    for n in range(2, nmax + 1):
        src = np.zeros(grid.n)
        for k in range(1, n):
            src += M[k - 1] * M[n - k - 1]
        M[n - 1] = solve_banded((1, 1), ab, v * src)
    return ExtinctionTable(variant=variant, nmax=nmax, grid=grid, M=M)


def fk_survival_mc(field: RateField, x0, replicas: int,
                   seed: int = 0) -> tuple[float, float]:
    """Direct estimate of E[exp(-int_0^inf v(X_s) ds)], one diffusing particle.

    Candidate splits arrive at rate vmax while the particle is inside the
    split-rate support; each candidate multiplies the replica weight by
    1 - v(X)/vmax, which averages to the exponential functional without any
    time-step bias.  Once the particle sits at radius r >= a the rate is
    zero until it re-enters, so the whole excursion is resolved in one step:
    with probability 1 - (a/r)^{d-2} it escapes for good, otherwise it is
    restarted on the sphere of radius a (only the radius matters for a
    radial rate).  No time horizon, hence no truncation bias; needs d >= 3.
    Returns (mean, standard error).
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    d = field.dim
    if d < 3:
        raise DimensionTooLow("infinite-horizon weights need transience, d >= 3")
    vmax = field.max_rate()
    if vmax == 0.0:
        return 1.0, 0.0
    a = field.support_radius
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed])))
    pos = np.tile(x0, (replicas, 1))
    wgt = np.ones(replicas)
    active = np.ones(replicas, dtype=bool)
    while np.any(active):
        idx = np.nonzero(active)[0]
        r = np.linalg.norm(pos[idx], axis=1)
        out = r >= a
        o_idx = idx[out]
        if len(o_idx):
            ro = r[out]
            escape = rng.random(len(o_idx)) >= (a / ro) ** (d - 2)
            active[o_idx[escape]] = False
            back = o_idx[~escape]
            pos[back] *= (a / ro[~escape] * (1.0 - 1e-12))[:, None]
        i_idx = idx[~out]
        if len(i_idx):
            gap = rng.exponential(1.0 / vmax, size=len(i_idx))
            pos[i_idx] += rng.standard_normal(pos[i_idx].shape) \
                * np.sqrt(gap)[:, None]
            wgt[i_idx] *= 1.0 - field.eval_many(pos[i_idx]) / vmax
            dead = i_idx[wgt[i_idx] <= 0.0]
            active[dead] = False
    m = float(wgt.mean())
    se = float(wgt.std(ddof=1) / math.sqrt(replicas))
    return m, se


def compare_M_to_mc(table: ExtinctionTable, stats, n: int):
    """PDE value M^n(x0) against the MC fraction finite with n particles."""
    from .analysis import TheoremReport, classify_survival
    labels = classify_survival(stats)
    finite_n = (labels == "finite") & (stats.final_count == n)
    p = float(np.count_nonzero(finite_n) / stats.replicas)
    se = math.sqrt(max(p * (1 - p), 1e-12) / stats.replicas)
    pred = table.M_at(n, stats.config.x0)
    rep = TheoremReport.gated(
        "finite-limit", f"P(terminal count = {n}), {table.variant}",
        pred, p, se, tol=0.0, replicas=stats.replicas,
        horizon=float(stats.config.t_end),
        details={"variant": table.variant,
                 "in_range": bool(0.0 <= pred <= 1.0)})
    if not 0.0 <= pred <= 1.0:
        rep.note = "prediction outside [0,1]; variant inconsistent"
        rep.passed = False
    return rep
