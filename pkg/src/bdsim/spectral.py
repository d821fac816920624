"""Discretization of (1/2)*Laplacian + v and its spectral objects.

The operator is assembled as a tridiagonal matrix A, symmetric with respect
to the weighted inner product <f, g>_w = sum_i w_i f_i g_i of the grid.  The
principal eigenpair (lambda0, psi) is found by inverse iteration with a
Rayleigh-quotient-updated shift, seeded with a positive constant vector: the
target eigenvalue is simple and its eigenvector positive, so positivity of
the iterates certifies convergence to the right pair.

For the idealized discontinuous square-well profile in 1-D, plain
second-order differences carry an O(h^2) eigenvalue error with a constant
large enough to matter at desk resolutions.  When the well edges fall on
grid nodes, ``discretize`` therefore applies a self-consistent correction to
the diagonal: a dispersion term -(h^2/6)(lambda - v)^2 cancelling the
leading truncation error of the three-point stencil in the constant-v
regions, plus an interface term (h/6)*beta*sqrt(2*lambda) at the two edge
nodes cancelling the O(h) local truncation caused by the jump of psi'''
(psi' = -sqrt(2*lambda)*psi exactly at the support edge).  The correction is
lambda-dependent and converges in a few fixed-point sweeps; the returned
matrix is still symmetric tridiagonal and O(h^2)-consistent on smooth
functions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.linalg import eigh_tridiagonal, solve_banded

from .grid import Grid, sphere_surface
from .rate_field import RateField
from .regions import Region, region_psi_integral


class NoPositiveEigenvalue(RuntimeError):
    """The operator has no positive eigenvalue (sub- or critical regime)."""


class NonConvergence(RuntimeError):
    """Eigen-iteration failed to reach the residual tolerance."""


class ShiftInsideSpectrum(ValueError):
    """Resolvent shift mu lies at or below the principal eigenvalue."""


class GridTooSmall(ValueError):
    """Grid extent does not cover the field support."""


RESIDUAL_TOL = 1e-10          # eigenpair residual target (weighted norm)
RESIDUAL_CEIL = 1e-8          # hard invariant: ||A psi - lambda0 psi||_w bound
CRITICALITY_FACTOR = 1e-6     # NoPositiveEigenvalue if top value < this * max_rate


@dataclass
class OperatorMatrix:
    """Tridiagonal discretization of (1/2)*Laplacian + v on a grid."""

    grid: Grid
    diag: np.ndarray          # A_ii
    upper: np.ndarray         # A_{i,i+1}
    lower: np.ndarray         # A_{i+1,i}
    v_nodes: np.ndarray       # cell-averaged true v at the nodes
    max_rate: float
    corrected: bool = False

    @property
    def size(self) -> int:
        return len(self.diag)

    def sym_bands(self) -> tuple[np.ndarray, np.ndarray]:
        """(diag, offdiag) of the similarity-symmetrized matrix W^1/2 A W^-1/2."""
        w = self.grid.weights
        off = self.upper * np.sqrt(w[:-1] / w[1:])
        return self.diag, off

    def apply(self, f: np.ndarray) -> np.ndarray:
        out = self.diag * f
        out[:-1] += self.upper * f[1:]
        out[1:] += self.lower * f[:-1]
        return out

    def solve_shifted(self, mu: float, g: np.ndarray) -> np.ndarray:
        """Solve (mu*I - A) u = g by a banded LU solve."""
        m = self.size
        ab = np.zeros((3, m))
        ab[0, 1:] = -self.upper
        ab[1, :] = mu - self.diag
        ab[2, :-1] = -self.lower
        return solve_banded((1, 1), ab, g)

    def selfadjoint_defect(self, f: np.ndarray, g: np.ndarray) -> float:
        """<Af, g>_w - <f, Ag>_w (round-off sized by construction)."""
        return self.grid.dot(self.apply(f), g) - self.grid.dot(f, self.apply(g))


@dataclass
class SpectralData:
    """Principal eigenpair and derived scalars."""

    lambda0: float
    psi: np.ndarray           # positive, <psi, psi>_w = 1
    mass: float               # integral of psi over R^d (tail-corrected)
    tail_slope: float         # fitted decay rate of the profile log
    gap: float                # lambda0 minus the second Rayleigh-Ritz value
    grid: Grid
    matrix: OperatorMatrix = dc_field(repr=False, default=None)

    def psi_at(self, points: np.ndarray) -> np.ndarray:
        """psi interpolated at (m, dim) points (0 beyond the grid edge)."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if self.grid.geometry == "full_line":
            x = pts[:, 0]
            return np.interp(x, self.grid.nodes, self.psi, left=0.0, right=0.0)
        r = np.sqrt(np.einsum("ij,ij->i", pts, pts))
        return np.interp(r, self.grid.nodes, self.psi, left=self.psi[0], right=0.0)

    def psi_radial(self, r: np.ndarray) -> np.ndarray:
        """psi as a function of |x|, with the fitted exponential tail beyond R."""
        r = np.asarray(r, dtype=float)
        nodes = self.grid.nodes
        if self.grid.geometry == "full_line":
            base = np.interp(r, nodes, self.psi, left=self.psi[0], right=0.0)
            r_edge, p_edge = nodes[-1], self.psi[-1]
        else:
            base = np.interp(r, nodes, self.psi, left=self.psi[0], right=0.0)
            r_edge, p_edge = nodes[-1], self.psi[-1]
        kappa = -self.tail_slope
        if kappa > 0 and p_edge > 0:
            d = self.grid.dim
            tail = p_edge * np.exp(-kappa * (r - r_edge))
            if d >= 2:
                with np.errstate(divide="ignore", invalid="ignore"):
                    tail = tail * (r / r_edge) ** ((1 - d) / 2.0)
            base = np.where(r > r_edge, tail, base)
        return base

    # -- export --------------------------------------------------------------

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("node,psi\n")
            for x, p in zip(self.grid.nodes, self.psi):
                fh.write(f"{x:.17g},{p:.17g}\n")

    def header_dict(self) -> dict:
        return {
            "lambda0": self.lambda0,
            "mass": self.mass,
            "tail_slope": self.tail_slope,
            "gap": self.gap,
            "grid": {
                "dim": self.grid.dim,
                "geometry": self.grid.geometry,
                "extent": self.grid.extent,
                "n": self.grid.n,
            },
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.header_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def _assemble(grid: Grid, v_diag: np.ndarray, v_true: np.ndarray,
              max_rate: float, corrected: bool = False) -> OperatorMatrix:
    h = grid.h
    m = len(grid.nodes)
    if grid.geometry == "full_line":
        off = np.full(m - 1, 0.5 / h ** 2)
        diag = -1.0 / h ** 2 + v_diag
        return OperatorMatrix(grid, diag, off, off.copy(), v_true, max_rate, corrected)
    # radial finite volume: flux faces at r_{i+1/2}
    d = grid.dim
    s = sphere_surface(d)
    r = grid.nodes
    w = grid.weights
    face = s * (r + h / 2.0) ** (d - 1)          # outer face area of cell i
    upper = face[:-1] / (2.0 * h * w[:-1])
    lower = face[:-1] / (2.0 * h * w[1:])
    diag = np.empty(m)
    diag[0] = -face[0] / (2.0 * h * w[0])
    inner_face = face[:-1]                        # face between i-1 and i
    diag[1:] = -(face[1:] + inner_face) / (2.0 * h * w[1:])
    diag += v_diag
    return OperatorMatrix(grid, diag, upper, lower, v_true, max_rate, corrected)


def discretize(field: RateField, grid: Grid) -> OperatorMatrix:
    """Weighted-symmetric tridiagonal matrix for (1/2)*Laplacian + v."""
    from .rate_field import support_radius
    if grid.extent <= support_radius(field):
        raise GridTooSmall("grid extent must exceed the field support radius")
    if field.dim != grid.dim:
        raise ValueError("field and grid dimensions differ")
    lo, hi = grid.cell_edges()
    if grid.geometry == "full_line":
        v_true = field.cell_average(lo, hi)
    else:
        v_true = field.eval_radial(grid.nodes)
        # cell-average in r keeps O(h^2) for the discontinuous well
        if field.discontinuous:
            a, beta = field.support_radius, field.amplitude
            ov = np.clip(np.minimum(hi, a) - np.maximum(lo, 0.0), 0.0, None)
            v_true = beta * ov / (hi - lo)
    base = _assemble(grid, v_true.copy(), v_true, field.max_rate())

    if not (field.discontinuous and grid.geometry == "full_line"
            and field.amplitude > 0.0):
        return base
    a, beta = field.support_radius, field.amplitude
    edge = np.isclose(np.abs(np.abs(grid.nodes) - a), 0.0, atol=1e-9 * grid.h)
    if edge.sum() != 2:
        return base          # edges off-node: fall back to the plain stencil
    try:
        lam, _ = _top_eigenpair(base)
    except NoPositiveEigenvalue:
        return base
    h = grid.h
    v_node = np.where(np.abs(grid.nodes) < a, beta, 0.0)
    mat = base
    for _ in range(16):
        v_eff = v_node - (h ** 2 / 6.0) * (lam - v_node) ** 2
        v_eff[edge] = (beta / 2.0
                       - (h ** 2 / 12.0) * ((lam - beta) ** 2 + lam ** 2)
                       + (h / 6.0) * beta * math.sqrt(2.0 * lam))
        mat = _assemble(grid, v_eff, v_true, field.max_rate(), corrected=True)
        lam_new, _ = _top_eigenpair(mat)
        if abs(lam_new - lam) < 1e-14:
            lam = lam_new
            break
        lam = lam_new
    return mat


# ---------------------------------------------------------------------------
# principal eigenpair
# ---------------------------------------------------------------------------

def _solve_sym_shifted(diag, off, sigma, rhs):
    """Solve (sigma*I - S) u = rhs for the symmetrized tridiagonal S."""
    m = len(diag)
    ab = np.zeros((3, m))
    ab[0, 1:] = -off
    ab[1, :] = sigma - diag
    ab[2, :-1] = -off
    return solve_banded((1, 1), ab, rhs)


def _top_eigenpair(matrix: OperatorMatrix, max_iter: int = 200):
    """Largest eigenvalue and positive w-normalized eigenvector.

    Fixed-shift inverse iteration from a positive constant vector (the shift
    sits just above max v, which bounds the spectrum from above), followed by
    Rayleigh-quotient polishing.
    """
    diag, off = matrix.sym_bands()
    m = len(diag)
    vmax = matrix.max_rate
    if vmax <= 0.0:
        raise NoPositiveEigenvalue("v is identically zero")
    scale = max(vmax, 1.0)
    sigma = vmax + 0.1 * scale
    u = np.full(m, 1.0 / math.sqrt(m))
    lam = None
    for _ in range(max_iter):
        u_new = _solve_sym_shifted(diag, off, sigma, u)
        u_new /= np.linalg.norm(u_new)
        if u_new[np.argmax(np.abs(u_new))] < 0:
            u_new = -u_new
        su = diag * u_new
        su[:-1] += off * u_new[1:]
        su[1:] += off * u_new[:-1]
        lam_new = float(u_new @ su)
        res = np.linalg.norm(su - lam_new * u_new)
        u = u_new
        if lam is not None and abs(lam_new - lam) < 1e-3 * max(abs(lam_new), 1e-30):
            lam = lam_new
            break
        lam = lam_new
    if lam < CRITICALITY_FACTOR * vmax:
        raise NoPositiveEigenvalue(
            f"top Rayleigh-Ritz value {lam:.3e} below {CRITICALITY_FACTOR:g}*max_rate")
    # Rayleigh-quotient iteration: quadratic convergence near the target
    for _ in range(25):
        su = diag * u
        su[:-1] += off * u[1:]
        su[1:] += off * u[:-1]
        lam = float(u @ su)
        res = np.linalg.norm(su - lam * u)
        if res <= RESIDUAL_TOL * max(1.0, abs(lam)):
            break
        try:
            u_new = _solve_sym_shifted(diag, off, lam + 1e-14 * scale, u)
        except np.linalg.LinAlgError:
            break
        nrm = np.linalg.norm(u_new)
        if not np.isfinite(nrm) or nrm == 0.0:
            break
        u = u_new / nrm
        if u[np.argmax(np.abs(u))] < 0:
            u = -u
    su = diag * u
    su[:-1] += off * u[1:]
    su[1:] += off * u[:-1]
    lam = float(u @ su)
    res = np.linalg.norm(su - lam * u)
    if res > RESIDUAL_CEIL * max(1.0, abs(lam)):
        raise NonConvergence(f"eigen residual {res:.3e} after iteration budget")
    if lam < CRITICALITY_FACTOR * vmax:
        raise NoPositiveEigenvalue(
            f"converged value {lam:.3e} below {CRITICALITY_FACTOR:g}*max_rate")
    if np.any(u <= 0.0):
        # tolerate hard zeros from underflow in the far tail only
        tiny = np.abs(u) < 1e-14 * np.max(u)
        if np.any(u[~tiny] <= 0.0):
            raise NonConvergence("iterate lost positivity; wrong eigenpair")
        u = np.abs(u)
        u[u == 0.0] = np.min(u[u > 0.0]) if np.any(u > 0.0) else 1e-300
    psi = u / np.sqrt(matrix.grid.weights)     # undo symmetrization; <psi,psi>_w = 1
    return lam, psi


def _fit_tail_slope(grid: Grid, psi: np.ndarray, lam: float,
                    support: float) -> float:
    kappa = math.sqrt(2.0 * lam)
    lo = support + 2.0 / kappa
    hi = 0.8 * grid.extent
    x = grid.nodes
    if grid.geometry == "full_line":
        sel = (x >= lo) & (x <= hi)
        prof = psi[sel]
        xs = x[sel]
    else:
        sel = (x >= lo) & (x <= hi)
        xs = x[sel]
        prof = psi[sel] * xs ** ((grid.dim - 1) / 2.0)
    ok = prof > 0
    xs, prof = xs[ok], prof[ok]
    if len(xs) < 8:
        return -kappa
    slope = np.polyfit(xs, np.log(prof), 1)[0]
    return float(slope)


def principal_eigenpair(matrix: OperatorMatrix, grid: Grid | None = None,
                        support: float | None = None) -> SpectralData:
    """Largest eigenvalue with positive normalized eigenvector and extras.

    Raises NoPositiveEigenvalue in the sub/critical regime and NonConvergence
    if the iteration budget is exhausted.
    """
    grid = grid or matrix.grid
    lam, psi = _top_eigenpair(matrix)
    if support is None:
        nz = matrix.v_nodes > 0
        support = float(np.max(np.abs(grid.nodes[nz]))) if np.any(nz) else 0.0
    tail_slope = _fit_tail_slope(grid, psi, lam, support)
    kappa = -tail_slope if tail_slope < 0 else math.sqrt(2 * lam)
    mass = float(np.sum(grid.weights * psi))
    # analytic tail beyond the grid edge
    if grid.geometry == "full_line":
        mass += (psi[0] + psi[-1]) / kappa
    else:
        d = grid.dim
        mass += sphere_surface(d) * grid.nodes[-1] ** (d - 1) * psi[-1] / kappa
    # spectral gap from the second Rayleigh-Ritz value
    diag, off = matrix.sym_bands()
    m = len(diag)
    vals = eigh_tridiagonal(diag, off, select="i",
                            select_range=(m - 2, m - 1), eigvals_only=True)
    gap = float(vals[1] - vals[0])
    return SpectralData(lambda0=lam, psi=psi, mass=mass, tail_slope=tail_slope,
                        gap=gap, grid=grid, matrix=matrix)


# ---------------------------------------------------------------------------
# resolvent and parabolic stepping
# ---------------------------------------------------------------------------

def resolvent_apply(matrix: OperatorMatrix, mu: float, g: np.ndarray,
                    lambda0: float | None = None) -> np.ndarray:
    """u = (mu - L)^{-1} g with a residual check of 1e-10 * ||g||_w."""
    if lambda0 is not None and mu <= lambda0:
        raise ShiftInsideSpectrum(f"shift mu={mu} is <= lambda0={lambda0}")
    g = np.asarray(g, dtype=float)
    u = matrix.solve_shifted(mu, g)
    r = g - (mu * u - matrix.apply(u))
    gn = matrix.grid.norm(g)
    if matrix.grid.norm(r) > 1e-10 * max(gn, 1e-300):
        u = u + matrix.solve_shifted(mu, r)      # one step of iterative refinement
        r = g - (mu * u - matrix.apply(u))
        if matrix.grid.norm(r) > 1e-10 * max(gn, 1e-300):
            raise NonConvergence("resolvent residual above tolerance")
    return u


def evolve_density(matrix: OperatorMatrix, g0: np.ndarray, t: float,
                   dt: float) -> np.ndarray:
    """Implicit-trapezoidal (Crank-Nicolson) solution of d_t rho = L rho.

    Unconditionally stable and second order in dt; returns rho(t, .) from
    rho(0) = g0.
    """
    g = np.asarray(g0, dtype=float).copy()
    if t <= 0.0:
        return g
    steps = max(1, round(t / dt))
    k = t / steps
    m = matrix.size
    ab = np.zeros((3, m))
    ab[0, 1:] = -(k / 2.0) * matrix.upper
    ab[1, :] = 1.0 - (k / 2.0) * matrix.diag
    ab[2, :-1] = -(k / 2.0) * matrix.lower
    for _ in range(steps):
        rhs = g + (k / 2.0) * matrix.apply(g)
        g = solve_banded((1, 1), ab, rhs)
    return g


def mass_and_alpha(spectral: SpectralData, region: Region) -> float:
    """alpha(U): fraction of the psi integral carried by the region."""
    return region_psi_integral(spectral, region) / spectral.mass
