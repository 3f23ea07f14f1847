import math

import numpy as np
import pytest

from btspec.grid import Grid1D
from btspec.linalg import BandedMatrix
from btspec.operators import OperatorSpec
from btspec.spectra import (ResolventGrid, locate_eigenvalue, pseudospectrum_grid, resolvent_norm,
                            survey_spectrum, two_grid_check, validate_truncation)

HARMONIC = OperatorSpec("ComplexHarmonic", Grid1D(-8, 8, 601), order=4)


def test_survey_harmonic_window():
    res = survey_spectrum(HARMONIC, (0, 6, -6, 0)).sorted("real")
    assert len(res) == 3
    np.testing.assert_allclose(res.eigenvalues, [1 - 1j, 3 - 3j, 5 - 5j], atol=1e-6)
    assert not res.flagged.any()


def test_survey_empty_left_window():
    res = survey_spectrum(OperatorSpec("BlochTorreyInterval", Grid1D(0, 1, 100), eps=0.05),
                          (-10, -1, -10, 10))
    assert len(res) == 0


def test_survey_respects_dense_cap():
    with pytest.raises(ValueError, match="locate_eigenvalue"):
        survey_spectrum(HARMONIC, cap=100)


def test_locate_examples():
    lap = BandedMatrix.from_diagonals({-1: -np.ones(99), 0: 2 * np.ones(100), 1: -np.ones(99)}, 100)
    lap = lap * (101 ** 2)
    assert abs(locate_eigenvalue(lap, 9.5).value - math.pi ** 2) < 1e-3
    pair = locate_eigenvalue(BandedMatrix.diag([1.0, 2.0, 3.0]), 2.0)
    assert pair.shift_is_eigenvalue and pair.residual == 0.0


def test_locate_first_line_mode():
    eps = 0.05
    s = OperatorSpec("BlochTorreyLine", Grid1D(-8, 8, 2399), eps=eps)
    target = 1j + eps * (0.5 + 0.5j)
    lam = locate_eigenvalue(s, target).value
    assert abs(lam - target) < 2 * eps ** 2


def test_resolvent_norm_examples():
    assert resolvent_norm(BandedMatrix.diag([1.0, 2.0]), 0.0) == pytest.approx(1.0)
    s = OperatorSpec("BlochTorreyLine", Grid1D(-8, 8, 801), eps=0.05)
    assert resolvent_norm(s, -2.0) <= 0.5 * 1.05
    assert resolvent_norm(BandedMatrix.diag([1.0, 2.0]), 2.0) == math.inf


def test_resolvent_norm_grows_toward_eigenvalue():
    s = OperatorSpec("BlochTorreyLine", Grid1D(-8, 8, 801), eps=0.1)
    kappa = locate_eigenvalue(s, 1j + 0.1 * (0.5 + 0.5j)).value
    start = kappa - 0.3
    norms = [resolvent_norm(s, kappa + (start - kappa) * t) for t in (1, 0.5, 0.25, 0.1, 0.01)]
    assert all(b > a for a, b in zip(norms, norms[1:]))


def test_pseudospectrum_grid_roundtrip():
    g = pseudospectrum_grid(HARMONIC, [0.5, 1.5], [-1.5, -0.5, 0.5], workers=2)
    assert g.norms.shape == (3, 2)
    assert np.all(g.norms > 0)
    again = ResolventGrid.from_json(g.to_json())
    np.testing.assert_array_equal(again.norms, g.norms)
    assert again.spec == HARMONIC
    lines = g.to_csv().splitlines()
    assert lines[0] == "re,im,norm" and len(lines) == 7
    # serial and threaded sweeps agree
    serial = pseudospectrum_grid(HARMONIC, [0.5, 1.5], [-1.5, -0.5, 0.5], workers=1)
    np.testing.assert_allclose(serial.norms, g.norms, rtol=1e-6)


def test_pseudospectrum_axes_must_ascend():
    with pytest.raises(ValueError):
        pseudospectrum_grid(HARMONIC, [1.0, 0.0], [0.0])


def test_truncation_examples():
    spec = OperatorSpec("ComplexHarmonic", Grid1D(-12, 12, 1199))
    rep = validate_truncation(spec, 1 - 1j, [8, 10, 12])
    assert max(rep.differences) < 1e-9
    line = OperatorSpec("BlochTorreyLine", Grid1D(-10, 10, 1999), eps=0.05)
    rep = validate_truncation(line, 1j + 0.025 * (1 + 1j), [6, 8, 10])
    assert max(rep.differences) < 1e-7
    with pytest.raises(ValueError):
        validate_truncation(spec, 1 - 1j, [8])
    with pytest.raises(ValueError):
        validate_truncation(OperatorSpec("BlochTorreyInterval", Grid1D(0, 1, 50), eps=0.1), 0.1, [1, 2])


def test_two_grid_check_order():
    spec = OperatorSpec("ComplexHarmonic", Grid1D(-8, 8, 199))
    chk = two_grid_check(spec, 1 - 1j, levels=3)
    assert chk.passed
    assert abs(chk.observed_order - 2) < 0.5
    assert abs(chk.extrapolated - (1 - 1j)) < abs(chk.values[-1] - (1 - 1j))
