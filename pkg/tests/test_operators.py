import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from btspec.grid import Grid1D, second_derivative_matrix, symmetric_grid
from btspec.linalg import BandedLU, dense_eigenvalues, match_eigenvalues
from btspec.operators import (OperatorSpec, SpecError, airy_first_zero, airy_threshold, build,
                              build_bloch_torrey, build_interval_plambda, build_limit_atilde,
                              build_rotated, build_scalar)
from btspec.spectra import locate_eigenvalue


def _quadratic_forms(m, count, seed):
    rng = np.random.default_rng(seed)
    n = m.shape[0]
    u = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    return np.array([np.vdot(v, m.matvec(v)).real / np.vdot(v, v).real for v in u])


# -- OperatorSpec ---------------------------------------------------------

def test_spec_json_roundtrip():
    s = OperatorSpec("QuarticM", Grid1D(-5, 5, 101), eps=0.1, lam=0.3 + 2j, order=4)
    t = OperatorSpec.from_json(s.to_json())
    assert t == s
    assert '"lambda"' in s.to_json()


def test_spec_rejects_unknown_and_missing_fields():
    g = Grid1D(0, 1, 9)
    with pytest.raises(SpecError):
        OperatorSpec.from_dict({"kind": "ComplexHarmonic", "grid": g.to_dict(), "colour": 1})
    with pytest.raises(SpecError):
        OperatorSpec("BlochTorreyLine", g)
    with pytest.raises(SpecError):
        OperatorSpec("ComplexHarmonic", g, eps=0.1)
    with pytest.raises(SpecError):
        OperatorSpec("Nonexistent", g)
    with pytest.raises(SpecError):
        OperatorSpec("ComplexHarmonic", g, order=3)


def test_spec_parameter_domains():
    g = Grid1D(-4, 4, 41)
    with pytest.raises(SpecError):
        OperatorSpec("QuarticM", g, eps=0.1, lam=2.0)
    with pytest.raises(SpecError):
        OperatorSpec("DilatedM", g, eps=0.1, lam=1j, theta=0.6j)
    with pytest.raises(SpecError):
        OperatorSpec("IntervalPLambda", Grid1D(0, 1, 9), eps=0.1, lam=1.0)
    with pytest.raises(SpecError):
        OperatorSpec("IntervalPLambda", Grid1D(0, 1, 9), eps=0.1, lam=0.01, order=4)
    with pytest.raises(SpecError):
        OperatorSpec("BlochTorreyLine", g, eps=0.0)


def test_builders_are_deterministic():
    s = OperatorSpec("BlochTorreyLine", Grid1D(-6, 6, 301), eps=0.05, order=4)
    a, b = build(s).to_dense(), build(s).to_dense()
    assert a.tobytes() == b.tobytes()


# -- Bloch-Torrey system --------------------------------------------------

def test_coupling_block_at_origin():
    g = Grid1D(-1, 1, 3)
    m = build_bloch_torrey(OperatorSpec("BlochTorreyLine", g, eps=1.0)).to_dense()
    kinetic = second_derivative_matrix(g).to_dense()[1, 1]
    block = m[3:6, 3:6] - kinetic * np.eye(3)
    np.testing.assert_array_equal(block, [[0, 0, 0], [0, 0, 1], [0, -1, 0]])


def test_interleaved_bandwidth():
    g = Grid1D(-3, 3, 50)
    m2 = build(OperatorSpec("BlochTorreyLine", g, eps=0.1))
    m4 = build(OperatorSpec("BlochTorreyLine", g, eps=0.1, order=4))
    assert max(m2.kl, m2.ku) <= 5
    # the one-sided closure of the order-4 stencil reaches three nodes out
    assert max(m4.kl, m4.ku) <= 9


ACCRETIVE = [
    ("BlochTorreyLine", dict(eps=0.05)),
    ("BlochTorreyInterval", dict(eps=0.1)),
    ("RotatedBlochTorrey", dict(eps=0.2, b0=3.0)),
    ("ComplexAiryPlus", dict(eps=0.1)),
    ("ComplexAiryMinus", dict(eps=0.1)),
    ("ComplexHarmonic", dict()),
]


@pytest.mark.parametrize("kind,params", ACCRETIVE)
@settings(max_examples=5, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1), n=st.integers(10, 120))
def test_discrete_accretivity(kind, params, seed, n):
    g = Grid1D(-4, 4, n)
    q = _quadratic_forms(build(OperatorSpec(kind, g, **params)), 100, seed)
    assert np.all(q >= -1e-12 * np.max(np.abs(q)))


def test_general_field_accretive_with_random_field():
    rng = np.random.default_rng(0)
    g = Grid1D(0, 1, 40)
    s = OperatorSpec("GeneralField", g, eps=0.1, bfield=rng.standard_normal((40, 3)), xi2=0.5, xi3=1.0)
    assert np.all(_quadratic_forms(build(s), 100, 1) >= 0)


@pytest.mark.parametrize("kind", ["BlochTorreyLine", "BlochTorreyInterval"])
def test_conjugation_symmetry(kind):
    g = Grid1D(-3, 3, 120) if kind.endswith("Line") else Grid1D(0, 1, 120)
    w = dense_eigenvalues(build(OperatorSpec(kind, g, eps=0.1))).eigenvalues
    for _, _, d in match_eigenvalues(w, w.conj()):
        assert d < 1e-10 * max(1.0, np.abs(w).max())


def test_constant_field_spectrum():
    eps, n = 0.1, 300
    g = Grid1D(0, 1, n)
    field = np.tile([0.0, 0.0, 1.0], (n, 1))
    w = dense_eigenvalues(build(OperatorSpec("GeneralField", g, eps=eps, bfield=field))).eigenvalues
    lap = 4 * np.sin(np.arange(1, 6) * math.pi * g.h / 2) ** 2 / g.h ** 2 * eps ** 2
    targets = np.concatenate([lap, lap + 1j, lap - 1j])
    for _, _, d in match_eigenvalues(w, targets):
        assert d < 1e-10


def test_rotated_matches_original():
    g = Grid1D(-4, 4, 199)
    a = dense_eigenvalues(build(OperatorSpec("BlochTorreyLine", g, eps=0.3))).eigenvalues
    b = dense_eigenvalues(build_rotated(OperatorSpec("RotatedBlochTorrey", g, eps=0.3))).eigenvalues
    for _, _, d in match_eigenvalues(a, b):
        assert d < 1e-8


def test_rotated_coupling_entries():
    g = Grid1D(-1, 1, 5)
    m = build_rotated(OperatorSpec("RotatedBlochTorrey", g, eps=1.0)).to_dense()
    c = 1 / math.sqrt(2)
    assert m[0, 2] == pytest.approx(c) and m[1, 2] == pytest.approx(c)
    assert m[2, 0] == pytest.approx(-c) and m[2, 1] == pytest.approx(-c)


# -- scalar kinds ---------------------------------------------------------

def test_complex_harmonic_lowest_three():
    s = OperatorSpec("ComplexHarmonic", Grid1D(-12, 12, 1601), order=4)
    for k in (1, 2, 3):
        target = (2 * k - 1) * (1 - 1j)
        assert abs(locate_eigenvalue(s, target).value - target) < 1e-6


def test_hatl_without_perturbation_is_harmonic():
    s = OperatorSpec("HatL", symmetric_grid(8, 0.01), eps=0.0, mu=0.0, order=4)
    assert abs(locate_eigenvalue(s, 1.4).value - math.sqrt(2)) < 1e-8
    assert abs(locate_eigenvalue(s, 4.2).value - 3 * math.sqrt(2)) < 1e-7


def test_singular_potential_named():
    g = symmetric_grid(4, 0.1)
    with pytest.raises(SpecError, match="node"):
        build_scalar(OperatorSpec("HatL", g, eps=0.5, mu=-2j))


def test_complex_airy_boundary_eigenvalue_scaling():
    nu1 = airy_first_zero()
    re = []
    for eps in (1e-2, 1e-3):
        g = Grid1D(0, 1, int(40 / eps ** (2 / 3)))
        target = eps ** (2 / 3) * nu1 * complex(0.5, math.sqrt(3) / 2)
        lam = locate_eigenvalue(OperatorSpec("ComplexAiryPlus", g, eps=eps), target).value
        assert lam.real > 0
        re.append(lam.real)
    slope = math.log(re[0] / re[1]) / math.log(10)
    assert abs(slope - 2 / 3) < 0.02


def test_airy_zero_and_threshold():
    assert airy_first_zero() == pytest.approx(2.338107410459767, abs=1e-13)
    assert airy_threshold(0.1) == pytest.approx(0.1 ** (2 / 3) * 2.338107410459767 / 2)


# -- interval operators ---------------------------------------------------

def test_plambda_symmetry_defect():
    s = OperatorSpec("IntervalPLambda", Grid1D(0, 1, 200), eps=0.05, lam=0.02)
    p = build_interval_plambda(s, symmetrize=False)
    assert np.abs(p.imag).max() < 1e-10 * np.abs(p).max()
    defect = np.linalg.norm(p - p.T) / np.linalg.norm(p)
    assert defect < 1e-10


def test_plambda_quadratic_form_identity():
    eps, lam = 0.05, 0.02
    g = Grid1D(0, 1, 150)
    p = build_interval_plambda(OperatorSpec("IntervalPLambda", g, eps=eps, lam=lam))
    d2 = second_derivative_matrix(g)
    dd = d2.to_dense()
    rng = np.random.default_rng(3)
    for _ in range(5):
        u = rng.standard_normal(g.n)
        total = eps ** 2 * u @ dd @ u
        for sgn in (1, -1):
            w = BandedLU((d2 * eps ** 2).add_diagonal(sgn * 1j * g.x - lam)).solve(u.astype(complex))
            # Re<(L - lam) w, w> = eps^2 |w'|^2 - lam |w|^2
            total += 0.5 * (eps ** 2 * np.vdot(w, dd @ w).real - lam * np.vdot(w, w).real)
        assert u @ p @ u == pytest.approx(total, rel=1e-8)


def test_limit_pencil_structure_and_bounds():
    for (a, b), floor in (((0, 1), math.pi ** 2), ((-1, 1), math.pi ** 2 / 4)):
        g = Grid1D(a, b, 400)
        A, Bw = build_limit_atilde(OperatorSpec("LimitAtilde", g))
        bd = Bw.to_dense()
        np.testing.assert_array_equal(bd, np.diag(1 + g.x ** 2))
        lowest = scipy.linalg.eigh(A.to_dense(), bd, eigvals_only=True)[0]
        assert lowest > floor
