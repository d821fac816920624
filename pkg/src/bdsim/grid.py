"""Line and radial grids with quadrature weights.

``full_line`` covers [-R, R] with n cells and Dirichlet walls at both ends
(interior nodes only).  ``radial`` covers [0, R] with a node at r = 0
(reflecting, forced by radial symmetry) and a Dirichlet wall at R; the node
weights are shell volumes surface(d) * r^(d-1) * h, with the half-cell rule
giving the r = 0 node the volume of the ball of radius h/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def sphere_surface(d: int) -> float:
    """Surface area of the unit sphere in R^d."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


@dataclass(frozen=True)
class Grid:
    dim: int
    geometry: str            # "full_line" | "radial"
    extent: float            # R
    n: int                   # cell count
    nodes: np.ndarray        # strictly increasing node coordinates
    weights: np.ndarray      # quadrature weights, all positive
    h: float                 # spacing

    @classmethod
    def line(cls, extent: float, n: int) -> "Grid":
        """1-D grid on [-R, R]: n cells, n-1 interior nodes."""
        if n < 4:
            raise ValueError("need at least 4 cells")
        h = 2.0 * extent / n
        nodes = -extent + h * np.arange(1, n)
        weights = np.full(n - 1, h)
        return cls(dim=1, geometry="full_line", extent=float(extent), n=int(n),
                   nodes=nodes, weights=weights, h=h)

    @classmethod
    def radial(cls, dim: int, extent: float, n: int) -> "Grid":
        """Radial grid on [0, R) for dim >= 2: nodes at i*h, i = 0..n-1."""
        if dim < 2:
            raise ValueError("radial geometry needs dim >= 2; use Grid.line for 1-D")
        if n < 4:
            raise ValueError("need at least 4 cells")
        h = extent / n
        r = h * np.arange(n)
        s = sphere_surface(dim)
        weights = s * r ** (dim - 1) * h
        weights[0] = s * (h / 2.0) ** dim / dim   # half-cell ball volume
        return cls(dim=int(dim), geometry="radial", extent=float(extent), n=int(n),
                   nodes=r, weights=weights, h=h)

    @classmethod
    def for_field(cls, field, extent: float, n: int) -> "Grid":
        """Grid matching a field's dimension; extent must exceed its support."""
        from .rate_field import support_radius
        if extent <= support_radius(field):
            raise ValueError("grid extent must exceed the field's support radius")
        if field.dim == 1:
            return cls.line(extent, n)
        return cls.radial(field.dim, extent, n)

    # -- inner product helpers ---------------------------------------------

    def dot(self, f: np.ndarray, g: np.ndarray) -> float:
        """Weighted inner product <f, g>_w."""
        return float(np.sum(self.weights * f * g))

    def norm(self, f: np.ndarray) -> float:
        return math.sqrt(max(self.dot(f, f), 0.0))

    def cell_edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Lower/upper cell boundaries around each node (for cell averages)."""
        lo = self.nodes - self.h / 2.0
        hi = self.nodes + self.h / 2.0
        if self.geometry == "radial":
            lo = np.maximum(lo, 0.0)
        return lo, hi
