import math

import numpy as np
import pytest

from btspec.grid import Grid1D
from btspec.variational import (auxiliary_airy_estimate, compute_rho0, direct_interval_eigenvalue,
                                higher_eigenvalues, nu_curve, nu_value, scaling_samples)

# self-converged reference constant on (0, 1)
RHO0_UNIT = 10.512141722555699


@pytest.fixture(scope="module")
def rho0_unit():
    return compute_rho0(0, 1)


def test_rho0_unit_interval(rho0_unit):
    assert rho0_unit.rho0 == pytest.approx(RHO0_UNIT, abs=1e-9)
    assert rho0_unit.rho0 > math.pi ** 2
    assert rho0_unit.extrapolant_spread < 1e-6
    assert rho0_unit.el_residual < 1e-6
    assert np.all(rho0_unit.minimizer >= 0)


def test_rho0_reflection_invariance():
    assert compute_rho0(-1, 0).rho0 == pytest.approx(RHO0_UNIT, abs=1e-8)


def test_rho0_symmetric_interval():
    assert compute_rho0(-1, 1, (255, 511)).rho0 > math.pi ** 2 / 4


def test_rho0_argument_checks():
    with pytest.raises(ValueError):
        compute_rho0(1, 0)
    with pytest.raises(ValueError):
        compute_rho0(0, 1, (511,))


def test_rho0_csv(rho0_unit):
    lines = rho0_unit.to_csv().splitlines()
    assert lines[0] == "n,rho0_n" and len(lines) == 4


def test_higher_eigenvalues_ordered():
    vals = higher_eigenvalues(0, 1, 1023, 4)
    assert vals[0] == pytest.approx(RHO0_UNIT, rel=1e-5)
    assert np.all(np.diff(vals) > 0)


def test_nu_positive_at_dirichlet_floor():
    eps = 0.05
    assert nu_value(eps, Grid1D(0, 1, 400), math.pi ** 2 * eps ** 2) > 0


def test_nu_crossing_matches_direct_system():
    eps = 0.1
    samples = scaling_samples(eps, 0, 1, RHO0_UNIT, 12)
    curve = nu_curve(eps, 0, 1, samples, n=300, workers=1)
    assert curve.crossing is not None
    assert math.pi ** 2 * eps ** 2 < curve.crossing < RHO0_UNIT * eps ** 2 * (1 + eps ** (2 / 3))
    direct = direct_interval_eigenvalue(eps, curve.grid, curve.crossing)
    assert abs(direct - curve.crossing) < 1e-6
    assert curve.to_csv().startswith("lambda,nu\n")


def test_nu_curve_rejects_out_of_range_samples():
    with pytest.raises(ValueError):
        nu_curve(0.1, 0, 1, [-0.01, 0.01], n=50)
    with pytest.raises(ValueError):
        nu_curve(0.1, 0, 1, [0.5], n=50)


def test_airy_estimate_properties(rho0_unit):
    g = Grid1D(0, 1, 400)
    w0 = np.sin(math.pi * g.x)
    zero = auxiliary_airy_estimate(0.1, np.zeros(g.n), g, K=20.0)
    assert zero.ratio == 0.0
    a = auxiliary_airy_estimate(0.1, w0, g, K=20.0)
    b = auxiliary_airy_estimate(0.1, 2 * w0, g, K=20.0)
    assert b.ratio == pytest.approx(a.ratio, rel=1e-12)
    with pytest.raises(ValueError):
        auxiliary_airy_estimate(0.1, w0, g, K=1.0, lam=1.0)
