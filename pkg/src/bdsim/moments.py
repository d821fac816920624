"""Moments of the rescaled population limit and window expectations.

The limit variable xi = lim N_t / e^{lambda0 t} has moments built by a
recursion: the n-th moment profile solves a shifted elliptic problem with a
source quadratic in the lower profiles.  The first profile is the principal
eigenfunction itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .regions import Region, VelocityTooFast, region_psi_integral
from .spectral import SpectralData, resolvent_apply


@dataclass(frozen=True)
class MomentTable:
    """Moment profiles f_1..f_nmax on the grid nodes of the spectral data."""

    spectral: SpectralData
    nmax: int
    profiles: tuple  # tuple of node arrays, profiles[0] is f_1

    def f(self, n: int) -> np.ndarray:
        if not 1 <= n <= self.nmax:
            raise ValueError(f"moment order {n} outside 1..{self.nmax}")
        return self.profiles[n - 1]

    def f_at(self, n: int, point) -> float:
        grid = self.spectral.grid
        p = np.atleast_1d(np.asarray(point, dtype=float))
        x = float(np.linalg.norm(p)) if grid.geometry == "radial" else float(p[0])
        return float(np.interp(x, grid.nodes, self.f(n)))


def compute_f(spectral: SpectralData, nmax: int = 4) -> MomentTable:
    """Build the moment profiles by the pairwise-split recursion.

    f_1 = psi and, for n >= 2,

        f_n = (n lambda0 - L)^{-1} [ v * sum_{k=1}^{n-1} C(n,k) f_k f_{n-k} ]

    which is well posed since n lambda0 lies above the spectrum of L.
    """
    if nmax < 1:
        raise ValueError("nmax must be >= 1")
    mat = spectral.matrix
    lam = spectral.lambda0
    v = mat.v_nodes
    profs = [spectral.psi]
    for n in range(2, nmax + 1):
        src = np.zeros_like(spectral.psi)
        for k in range(1, n):
            src += math.comb(n, k) * profs[k - 1] * profs[n - k - 1]
        profs.append(resolvent_apply(mat, n * lam, v * src, lambda0=lam))
    return MomentTable(spectral=spectral, nmax=nmax, profiles=tuple(profs))


def xi_moment(table: MomentTable, n: int, x0) -> float:
    """E[xi^n] for a process started from one particle at x0."""
    return table.spectral.mass ** n * table.f_at(n, x0)


def g_window(spectral: SpectralData, region: Region, velocity,
             times) -> np.ndarray:
    """g(t) = e^{lambda0 t} alpha(U + t*velocity) along the given times.

    The window must move strictly slower than the front, |velocity| < b with
    b = sqrt(lambda0 / 2); otherwise the expected count in the window does
    not grow and the quantity is rejected.
    """
    vel = np.atleast_1d(np.asarray(velocity, dtype=float))
    b = math.sqrt(spectral.lambda0 / 2.0)
    speed = float(np.linalg.norm(vel))
    if speed >= b:
        raise VelocityTooFast(
            f"window speed {speed:.6g} >= front speed b={b:.6g}")
    times = np.atleast_1d(np.asarray(times, dtype=float))
    out = np.empty(times.shape)
    for i, t in enumerate(times):
        moved = region.translate(t * vel)
        alpha = region_psi_integral(spectral, moved) / spectral.mass
        out[i] = math.exp(spectral.lambda0 * t) * alpha
    return out
