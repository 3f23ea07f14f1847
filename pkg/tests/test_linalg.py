import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from btspec.grid import Grid1D, second_derivative_matrix
from btspec.linalg import (BandedLU, BandedMatrix, ConvergenceError, SingularMatrixError,
                           banded_lu, dense_eigenvalues, hessenberg, hessenberg_qr_eigenvalues,
                           match_eigenvalues, shift_invert_eigenvalue, smallest_singular_value)


def _random_banded(rng, n, kl, ku):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    a = np.triu(np.tril(a, ku), -kl) + 4 * (kl + ku + 1) * np.eye(n)
    return a


def test_banded_roundtrip_and_matvec():
    rng = np.random.default_rng(1)
    a = _random_banded(rng, 12, 2, 3)
    m = BandedMatrix.from_dense(a, 2, 3)
    np.testing.assert_array_equal(m.to_dense(), a)
    x = rng.standard_normal(12) + 1j * rng.standard_normal(12)
    np.testing.assert_allclose(m.matvec(x), a @ x, atol=1e-12)
    np.testing.assert_allclose(m.to_sparse() @ x, a @ x, atol=1e-12)
    np.testing.assert_allclose(m.H.to_dense(), a.conj().T)
    assert m.norm1() == pytest.approx(np.abs(a).sum(axis=0).max())


@pytest.mark.parametrize("trans", ["N", "T", "C"])
def test_banded_lu_solves(trans):
    rng = np.random.default_rng(2)
    a = _random_banded(rng, 30, 3, 1)
    b = rng.standard_normal(30) + 1j * rng.standard_normal(30)
    x = banded_lu(BandedMatrix.from_dense(a, 3, 1)).solve(b, trans=trans)
    op = {"N": a, "T": a.T, "C": a.conj().T}[trans]
    np.testing.assert_allclose(op @ x, b, atol=1e-10)


def test_identity_solve_returns_rhs():
    b = np.arange(5, dtype=complex)
    np.testing.assert_array_equal(BandedLU(BandedMatrix.identity(5)).solve(b), b)


def test_laplacian_inverse_on_sine():
    g = Grid1D(0, 1, 255)
    u = BandedLU(second_derivative_matrix(g)).solve(np.sin(math.pi * g.x))
    err = np.max(np.abs(u - np.sin(math.pi * g.x) / math.pi ** 2))
    assert err < 5 * g.h ** 2


def test_singular_matrix_signal():
    a = np.array([[1.0, 2.0, 0.0], [1.0, 2.0, 0.0], [0.0, 1.0, 3.0]])
    with pytest.raises(SingularMatrixError):
        banded_lu(BandedMatrix.from_dense(a))


def test_dense_eigenvalues_diagonal_and_companion():
    w = dense_eigenvalues(np.diag([1 + 2j, 3, -1j])).eigenvalues
    assert sorted(w, key=lambda z: (z.real, z.imag)) == pytest.approx([-1j, 1 + 2j, 3])
    comp = np.array([[0.0, -1.0], [1.0, 0.0]])
    for method in ("lapack", "qr"):
        w = np.sort_complex(dense_eigenvalues(comp, method=method).eigenvalues)
        np.testing.assert_allclose(w, [-1j, 1j], atol=1e-12)


def test_dense_residuals_and_cap():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((20, 20))
    res = dense_eigenvalues(a, residuals=True)
    assert np.all(res.residuals < 1e-12)
    with pytest.raises(ValueError):
        dense_eigenvalues(a, cap=10)


def test_native_qr_matches_lapack():
    rng = np.random.default_rng(4)
    a = rng.standard_normal((40, 40)) + 1j * rng.standard_normal((40, 40))
    ours = hessenberg_qr_eigenvalues(a)
    ref = dense_eigenvalues(a).eigenvalues
    for t, e, d in match_eigenvalues(ref, ours):
        assert d < 1e-9


def test_hessenberg_is_similar():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((15, 15))
    h = hessenberg(a)
    assert np.allclose(np.tril(h, -2), 0)
    for _, _, d in match_eigenvalues(np.linalg.eigvals(h), np.linalg.eigvals(a)):
        assert d < 1e-10


def test_shift_invert_diag():
    m = BandedMatrix.diag([1.0, 2.0, 10.0])
    pair = shift_invert_eigenvalue(m, 1.9, tol=1e-13)
    assert pair.value == pytest.approx(2.0, abs=1e-13)
    assert pair.residual < 1e-12


def test_shift_invert_laplacian():
    pair = shift_invert_eigenvalue(second_derivative_matrix(Grid1D(0, 1, 511)), 9.0)
    assert abs(pair.value - math.pi ** 2) < 1e-4


def test_shift_at_eigenvalue_reported():
    pair = shift_invert_eigenvalue(BandedMatrix.diag([1.0, 2.0]), 2.0)
    assert pair.shift_is_eigenvalue
    assert pair.value == 2.0 and pair.residual == 0.0


def test_shift_invert_nonconvergence_raises():
    # two eigenvalues equidistant from the shift: inverse iteration stalls
    m = BandedMatrix.from_dense(np.array([[0.0, 1.0], [-1.0, 0.0]]))
    with pytest.raises(ConvergenceError):
        shift_invert_eigenvalue(m, 5.0, tol=1e-15, max_iter=5)


def test_smallest_singular_value_examples():
    assert smallest_singular_value(np.diag([3, 1 + 0j, 5j])) == pytest.approx(1.0)
    rng = np.random.default_rng(6)
    q, _ = np.linalg.qr(rng.standard_normal((100, 100)) + 1j * rng.standard_normal((100, 100)))
    c = 0.7 - 2.1j
    assert smallest_singular_value(c * q) == pytest.approx(abs(c), rel=1e-8)
    z = np.eye(100)
    z[3] = 0.0
    assert smallest_singular_value(BandedMatrix.from_dense(z, 0, 0)) == 0.0


def test_smallest_singular_value_banded_matches_svd():
    rng = np.random.default_rng(7)
    a = _random_banded(rng, 120, 4, 4) - 8 * np.eye(120)
    ref = np.linalg.svd(a, compute_uv=False)[-1]
    assert smallest_singular_value(BandedMatrix.from_dense(a, 4, 4), tol=1e-12) == pytest.approx(ref, rel=1e-8)


def test_singular_value_grows_toward_eigenvalue():
    m = second_derivative_matrix(Grid1D(0, 1, 200))
    lam1 = shift_invert_eigenvalue(m, 9.0, tol=1e-12).value.real
    norms = [1 / smallest_singular_value(m.shifted(lam1 - d + 0.5j * d)) for d in (4, 2, 1, 0.5, 0.1)]
    assert all(b > a for a, b in zip(norms, norms[1:]))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
                min_size=1, max_size=6))
def test_match_eigenvalues_recovers_permutation(vals):
    rng = np.random.default_rng(len(vals))
    ev = np.array(vals)[rng.permutation(len(vals))]
    out = match_eigenvalues(ev, vals)
    assert all(d == 0.0 for _, _, d in out)
