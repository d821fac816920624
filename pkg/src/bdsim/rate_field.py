"""Branching-rate profiles v(x): nonnegative, compactly supported.

Three kinds are supported:

* ``square_well``   -- v = amplitude on |x| <= a, 0 outside (idealized,
  discontinuous; flagged as such so the spectral solver can apply its
  interface-corrected stencil).
* ``smooth_bump``   -- v = amplitude * (1 - (r/a)^2)^2 for r <= a (C^1).
* ``tabulated_radial`` -- linear interpolation of (radius, value) nodes.

All profiles are radial; non-radial rates are rejected for dim >= 2 so the
spectral problem stays one-dimensional.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

KINDS = ("square_well", "smooth_bump", "tabulated_radial")


class DimensionMismatch(ValueError):
    """A point's dimension does not match the field's."""


@dataclass(frozen=True)
class RateField:
    """Immutable branching intensity v >= 0 with compact support."""

    dim: int
    kind: str
    amplitude: float = 0.0
    support_radius: float = 0.0
    radii: np.ndarray | None = field(default=None, repr=False)
    values: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}, expected one of {KINDS}")
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")
        if self.support_radius < 0:
            raise ValueError("support_radius must be >= 0")
        if self.kind == "tabulated_radial":
            r = np.asarray(self.radii, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if r.ndim != 1 or r.shape != v.shape or len(r) < 2:
                raise ValueError("tabulated_radial needs matching 1-D radii/values, >= 2 nodes")
            if np.any(np.diff(r) <= 0):
                raise ValueError("tabulated radii must be strictly increasing")
            if np.any(v < 0):
                raise ValueError("tabulated values must be >= 0")
            object.__setattr__(self, "radii", r)
            object.__setattr__(self, "values", v)
            nz = np.nonzero(v)[0]
            a = float(r[min(nz[-1] + 1, len(r) - 1)]) if len(nz) else 0.0
            object.__setattr__(self, "support_radius", a)
            object.__setattr__(self, "amplitude", float(v.max()))

    # -- constructors -------------------------------------------------------

    @classmethod
    def square_well(cls, beta: float, a: float, dim: int = 1) -> "RateField":
        return cls(dim=dim, kind="square_well", amplitude=beta, support_radius=a)

    @classmethod
    def smooth_bump(cls, beta: float, a: float, dim: int = 1) -> "RateField":
        return cls(dim=dim, kind="smooth_bump", amplitude=beta, support_radius=a)

    @classmethod
    def tabulated(cls, radii, values, dim: int = 1) -> "RateField":
        return cls(dim=dim, kind="tabulated_radial", radii=np.asarray(radii, float),
                   values=np.asarray(values, float))

    @classmethod
    def from_csv(cls, path, dim: int = 1) -> "RateField":
        """Load a tabulated radial profile from a two-column (radius, value) CSV."""
        radii, values = [], []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    r = float(row[0])
                except ValueError:
                    continue  # header line
                radii.append(r)
                values.append(float(row[1]))
        return cls.tabulated(radii, values, dim=dim)

    @classmethod
    def from_config(cls, cfg: dict) -> "RateField":
        kind = cfg["kind"]
        dim = int(cfg.get("dim", 1))
        if kind == "square_well":
            return cls.square_well(float(cfg["amplitude"]), float(cfg["support_radius"]), dim)
        if kind == "smooth_bump":
            return cls.smooth_bump(float(cfg["amplitude"]), float(cfg["support_radius"]), dim)
        if kind == "tabulated_radial":
            if "table_path" in cfg:
                return cls.from_csv(cfg["table_path"], dim=dim)
            return cls.tabulated(cfg["radii"], cfg["values"], dim=dim)
        raise ValueError(f"unknown field kind {kind!r}")

    # -- evaluation ---------------------------------------------------------

    @property
    def discontinuous(self) -> bool:
        return self.kind == "square_well"

    def eval_radial(self, r) -> np.ndarray:
        """v as a function of |x| (vectorized)."""
        r = np.asarray(r, dtype=float)
        if self.kind == "square_well":
            return np.where(r <= self.support_radius, self.amplitude, 0.0)
        if self.kind == "smooth_bump":
            a = self.support_radius
            if a == 0.0 or self.amplitude == 0.0:
                return np.zeros_like(r)
            u = np.clip(1.0 - (r / a) ** 2, 0.0, None)
            return self.amplitude * u * u
        out = np.interp(r, self.radii, self.values, left=self.values[0], right=0.0)
        return np.where(r > self.support_radius, 0.0, out)

    def eval_many(self, points: np.ndarray) -> np.ndarray:
        """v at an (m, dim) array of points."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise DimensionMismatch(
                f"expected points of shape (m, {self.dim}), got {pts.shape}")
        if self.dim == 1:
            r = np.abs(pts[:, 0])
        else:
            r = np.sqrt(np.einsum("ij,ij->i", pts, pts))
        return self.eval_radial(r)

    def eval(self, x) -> float:
        """v at a single point (scalar allowed in 1-D)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.dim,):
            raise DimensionMismatch(
                f"point has dimension {x.shape}, field has dim {self.dim}")
        return float(self.eval_many(x[None, :])[0])

    def max_rate(self) -> float:
        """sup_x v(x); thinning bound for the simulator."""
        if self.kind == "tabulated_radial":
            return float(self.values.max())
        return float(self.amplitude)

    def cell_average(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """Mean of v(|x|) over 1-D cells [lo, hi] (used for grid assembly).

        Exact for square_well; 5-point Gauss-Legendre otherwise.
        """
        lo = np.asarray(lo, float)
        hi = np.asarray(hi, float)
        if self.kind == "square_well":
            a, beta = self.support_radius, self.amplitude
            # overlap of [lo, hi] with [-a, a]
            ov = np.clip(np.minimum(hi, a) - np.maximum(lo, -a), 0.0, None)
            return beta * ov / (hi - lo)
        xg, wg = np.polynomial.legendre.leggauss(5)
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        vals = self.eval_radial(np.abs(mid[:, None] + half[:, None] * xg[None, :]))
        return vals @ (wg / 2.0)


def support_radius(f: RateField) -> float:
    """Radius of the support of v (0 for v identically zero)."""
    if f.max_rate() == 0.0:
        return 0.0
    return float(f.support_radius)


def max_rate(f: RateField) -> float:
    return f.max_rate()
