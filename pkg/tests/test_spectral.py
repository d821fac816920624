import math

import numpy as np
import pytest

from bdsim import (Grid, NoPositiveEigenvalue, RateField, Region,
                   ShiftInsideSpectrum, discretize, mass_and_alpha,
                   principal_eigenpair, resolvent_apply)
from bdsim.spectral import GridTooSmall, evolve_density

from conftest import LAMBDA0_WELL_1D


def _bisect_well_3d(beta, a):
    """Independent oracle: k*cot(k*a) = -sqrt(2*lam), k = sqrt(2(beta-lam))."""
    def f(lam):
        k = math.sqrt(2 * (beta - lam))
        return k / math.tan(k * a) + math.sqrt(2 * lam)
    # restrict to the branch where k*a is in (pi/2, pi)
    lo = max(1e-9, beta - (math.pi / a) ** 2 / 2 + 1e-9)
    hi = beta - (math.pi / (2 * a)) ** 2 / 2 - 1e-9
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(lo) * f(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def test_eigenvalue_matches_oracle(spec1d):
    assert abs(spec1d.lambda0 - LAMBDA0_WELL_1D) < 1e-6


def test_eigenfunction_positive_normalized(spec1d):
    assert np.all(spec1d.psi > 0)
    g = spec1d.grid
    assert g.dot(spec1d.psi, spec1d.psi) == pytest.approx(1.0, abs=1e-10)


def test_gap_positive(spec1d):
    # the unit well has a single bound state, so the rest of the spectrum
    # starts at 0 and the gap is essentially lambda0 itself
    assert spec1d.gap > 0.9 * spec1d.lambda0


def test_smooth_bump_second_order_refinement():
    f = RateField.smooth_bump(2.0, 1.0, dim=1)
    lams = []
    for n in (500, 1000, 2000):
        g = Grid.line(15.0, n)
        lams.append(principal_eigenpair(discretize(f, g)).lambda0)
    e1 = lams[1] - lams[0]
    e2 = lams[2] - lams[1]
    assert e1 / e2 == pytest.approx(4.0, rel=0.25)


def test_radial_3d_eigenvalue_oracle():
    beta, a = 3.0, 1.0
    oracle = _bisect_well_3d(beta, a)
    f = RateField.square_well(beta, a, dim=3)
    g = Grid.radial(3, 25.0, 6000)
    lam = principal_eigenpair(discretize(f, g)).lambda0
    assert lam == pytest.approx(oracle, abs=5e-5)


def test_subcritical_raises():
    f = RateField.square_well(0.05, 0.3, dim=3)   # too shallow in 3-D
    g = Grid.radial(3, 20.0, 1500)
    with pytest.raises(NoPositiveEigenvalue):
        principal_eigenpair(discretize(f, g))
    z = RateField.square_well(0.0, 1.0, dim=1)
    with pytest.raises(NoPositiveEigenvalue):
        principal_eigenpair(discretize(z, Grid.line(10.0, 100)))


def test_grid_too_small():
    f = RateField.square_well(1.0, 5.0, dim=1)
    with pytest.raises((GridTooSmall, ValueError)):
        discretize(f, Grid.line(4.0, 100))


def test_resolvent_residual_and_shift_guard(spec1d):
    mat = spec1d.matrix
    g = np.exp(-spec1d.grid.nodes ** 2)
    mu = 2.0 * spec1d.lambda0
    u = resolvent_apply(mat, mu, g, lambda0=spec1d.lambda0)
    res = g - (mu * u - mat.apply(u))
    assert spec1d.grid.norm(res) <= 1e-9 * spec1d.grid.norm(g)
    with pytest.raises(ShiftInsideSpectrum):
        resolvent_apply(mat, 0.5 * spec1d.lambda0, g,
                        lambda0=spec1d.lambda0)


def test_evolve_density_semigroup_property(spec1d):
    mat = spec1d.matrix
    g0 = np.exp(-spec1d.grid.nodes ** 2)
    one = evolve_density(mat, g0, 2.0, dt=0.01)
    two = evolve_density(mat, evolve_density(mat, g0, 1.0, dt=0.01), 1.0,
                         dt=0.01)
    assert np.allclose(one, two, rtol=1e-8, atol=1e-12)


def test_psi_radial_tail_extension(spec1d):
    r_edge = spec1d.grid.nodes[-1]
    vals = spec1d.psi_radial(np.array([r_edge + 1.0, r_edge + 2.0]))
    kappa = -spec1d.tail_slope
    assert vals[0] / vals[1] == pytest.approx(math.exp(kappa), rel=1e-6)


def test_mass_and_alpha_everything(spec1d):
    assert mass_and_alpha(spec1d, Region.everything(1)) == pytest.approx(1.0, abs=1e-9)
