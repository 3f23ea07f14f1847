"""Complex dense and banded linear algebra.

Banded matrices use LAPACK band storage: ``ab[ku + i - j, j] = A[i, j]``.
Factorizations go through ``?gbtrf``/``?gbtrs`` so one LU serves plain,
transposed and conjugate-transposed solves.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg
from scipy.linalg import lapack

log = logging.getLogger(__name__)

__all__ = [
    "LinalgError",
    "SingularMatrixError",
    "ConvergenceError",
    "BandedMatrix",
    "BandedLU",
    "DenseLU",
    "factorize",
    "EigenResult",
    "Eigenpair",
    "DENSE_CAP",
    "hessenberg",
    "hessenberg_qr_eigenvalues",
    "dense_eigenvalues",
    "banded_lu",
    "shift_invert_eigenvalue",
    "smallest_singular_value",
    "match_eigenvalues",
]

DENSE_CAP = 2000
SINGULAR_PIVOT = 1e-300


class LinalgError(Exception):
    """Base class for failures in this module."""


class SingularMatrixError(LinalgError):
    """LU factorization met a (numerically) zero pivot.

    ``pivot`` is the zero-based column index of the offending pivot.
    """

    def __init__(self, pivot: int, msg: str | None = None):
        super().__init__(msg or f"matrix is singular: zero pivot at index {pivot}")
        self.pivot = pivot


class ConvergenceError(LinalgError):
    """An iteration hit its limit.  ``best`` holds the last iterate, if any."""

    def __init__(self, msg: str, best=None, residual: float | None = None):
        super().__init__(msg)
        self.best = best
        self.residual = residual


# --------------------------------------------------------------------------
# banded storage


class BandedMatrix:
    """Square matrix with ``kl`` sub- and ``ku`` super-diagonals."""

    __slots__ = ("n", "kl", "ku", "ab")

    def __init__(self, ab: np.ndarray, kl: int, ku: int):
        ab = np.array(ab, copy=True)
        if ab.ndim != 2 or ab.shape[0] != kl + ku + 1:
            raise ValueError("band storage must have kl + ku + 1 rows")
        n = ab.shape[1]
        if n > 1 and (kl >= n or ku >= n):
            raise ValueError(f"bandwidths ({kl}, {ku}) must be smaller than n={n}")
        # zero the structurally unused corners
        for k in range(1, ku + 1):
            ab[ku - k, :k] = 0
        for k in range(1, kl + 1):
            ab[ku + k, n - k:] = 0
        ab.setflags(write=False)
        self.n, self.kl, self.ku, self.ab = n, int(kl), int(ku), ab

    @classmethod
    def from_diagonals(cls, diags: Mapping[int, np.ndarray], n: int, dtype=None) -> "BandedMatrix":
        """Build from ``{offset: values}``; offset ``k > 0`` is above the diagonal."""
        kl = max([0] + [-k for k in diags if k < 0])
        ku = max([0] + [k for k in diags if k > 0])
        if dtype is None:
            dtype = np.result_type(*[np.asarray(v).dtype for v in diags.values()], np.float64)
        ab = np.zeros((kl + ku + 1, n), dtype=dtype)
        for k, v in diags.items():
            v = np.broadcast_to(np.asarray(v), (n - abs(k),))
            if k >= 0:
                ab[ku - k, k:] = v
            else:
                ab[ku - k, : n + k] = v
        return cls(ab, kl, ku)

    @classmethod
    def from_dense(cls, a, kl: int | None = None, ku: int | None = None) -> "BandedMatrix":
        a = np.asarray(a)
        n = a.shape[0]
        if a.shape != (n, n):
            raise ValueError("matrix must be square")
        if kl is None or ku is None:
            rows, cols = np.nonzero(a)
            off = cols - rows
            kl = int(max(0, -off.min())) if off.size else 0
            ku = int(max(0, off.max())) if off.size else 0
        diags = {k: np.diagonal(a, k) for k in range(-kl, ku + 1)}
        return cls.from_diagonals(diags, n, dtype=a.dtype)

    @classmethod
    def identity(cls, n: int, dtype=float) -> "BandedMatrix":
        return cls(np.ones((1, n), dtype=dtype), 0, 0)

    @classmethod
    def diag(cls, values) -> "BandedMatrix":
        values = np.asarray(values)
        return cls(values[None, :], 0, 0)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @property
    def dtype(self):
        return self.ab.dtype

    def diagonal(self, k: int = 0) -> np.ndarray:
        if k > self.ku or -k > self.kl:
            return np.zeros(self.n - abs(k), dtype=self.dtype)
        row = self.ab[self.ku - k]
        return row[k:].copy() if k >= 0 else row[: self.n + k].copy()

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=self.dtype)
        for k in range(-self.kl, self.ku + 1):
            idx = np.arange(self.n - abs(k))
            if k >= 0:
                a[idx, idx + k] = self.diagonal(k)
            else:
                a[idx - k, idx] = self.diagonal(k)
        return a

    def to_sparse(self) -> scipy.sparse.csr_matrix:
        offs = list(range(-self.kl, self.ku + 1))
        return scipy.sparse.diags([self.diagonal(k) for k in offs], offs, shape=self.shape, format="csr")

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        out = np.zeros(x.shape, dtype=np.result_type(self.dtype, x.dtype))
        for k in range(-self.kl, self.ku + 1):
            d = self.diagonal(k)
            if k >= 0:
                out[: self.n - k] += (d * x[k:].T).T if x.ndim > 1 else d * x[k:]
            else:
                out[-k:] += (d * x[: self.n + k].T).T if x.ndim > 1 else d * x[: self.n + k]
        return out

    def __matmul__(self, x):
        return self.matvec(x)

    def _combine(self, other: "BandedMatrix", sign: float) -> "BandedMatrix":
        if other.n != self.n:
            raise ValueError("dimension mismatch")
        kl, ku = max(self.kl, other.kl), max(self.ku, other.ku)
        ab = np.zeros((kl + ku + 1, self.n), dtype=np.result_type(self.dtype, other.dtype))
        ab[ku - self.ku: ku + self.kl + 1] += self.ab
        ab[ku - other.ku: ku + other.kl + 1] += sign * other.ab
        return BandedMatrix(ab, kl, ku)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __mul__(self, c):
        return BandedMatrix(self.ab * c, self.kl, self.ku)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def shifted(self, sigma: complex) -> "BandedMatrix":
        """``A - sigma*I``."""
        ab = self.ab.astype(np.result_type(self.dtype, np.asarray(sigma).dtype))
        ab[self.ku] -= sigma
        return BandedMatrix(ab, self.kl, self.ku)

    def add_diagonal(self, values) -> "BandedMatrix":
        values = np.broadcast_to(np.asarray(values), (self.n,))
        ab = self.ab.astype(np.result_type(self.dtype, values.dtype))
        ab[self.ku] += values
        return BandedMatrix(ab, self.kl, self.ku)

    def conj(self) -> "BandedMatrix":
        return BandedMatrix(np.conj(self.ab), self.kl, self.ku)

    @property
    def T(self) -> "BandedMatrix":
        diags = {-k: self.diagonal(k) for k in range(-self.kl, self.ku + 1)}
        return BandedMatrix.from_diagonals(diags, self.n, dtype=self.dtype)

    @property
    def H(self) -> "BandedMatrix":
        return self.T.conj()

    def norm1(self) -> float:
        return float(np.abs(self.to_sparse()).sum(axis=0).max())

    def __eq__(self, other):
        return (isinstance(other, BandedMatrix) and self.kl == other.kl and self.ku == other.ku
                and np.array_equal(self.ab, other.ab))

    def __repr__(self):
        return f"BandedMatrix(n={self.n}, kl={self.kl}, ku={self.ku}, dtype={self.dtype})"


MatrixLike = Union[BandedMatrix, np.ndarray]


# --------------------------------------------------------------------------
# factorizations

_TRANS = {"N": 0, "T": 1, "C": 2}


class BandedLU:
    """Partial-pivoting LU of a banded matrix.

    The handle keeps no scratch state, so concurrent ``solve`` calls are safe.
    """

    def __init__(self, m: BandedMatrix):
        kl, ku, n = m.kl, m.ku, m.n
        work = np.zeros((2 * kl + ku + 1, n), dtype=np.complex128)
        work[kl:] = m.ab
        lu, piv, info = lapack.zgbtrf(work, kl, ku)
        if info < 0:
            raise LinalgError(f"zgbtrf: illegal argument {-info}")
        udiag = np.abs(lu[kl + ku])
        if info > 0 or np.any(udiag < SINGULAR_PIVOT):
            pivot = info - 1 if info > 0 else int(np.argmax(udiag < SINGULAR_PIVOT))
            raise SingularMatrixError(pivot)
        self.n, self.kl, self.ku = n, kl, ku
        self._lu, self._piv = lu, piv

    def solve(self, b, trans: str = "N") -> np.ndarray:
        """Solve ``A x = b`` (``trans='T'``: ``A^T``, ``'C'``: ``A^H``)."""
        b = np.asarray(b, dtype=np.complex128)
        vec = b.ndim == 1
        x, info = lapack.zgbtrs(self._lu, self.kl, self.ku, b[:, None] if vec else b,
                                self._piv, trans=_TRANS[trans])
        if info != 0:
            raise LinalgError(f"zgbtrs failed with info={info}")
        return x[:, 0] if vec else x

    def min_abs_pivot(self) -> float:
        return float(np.abs(self._lu[self.kl + self.ku]).min())


class DenseLU:
    """Dense counterpart of :class:`BandedLU`."""

    def __init__(self, a: np.ndarray):
        a = np.asarray(a, dtype=np.complex128)
        lu, piv, info = lapack.zgetrf(a)
        udiag = np.abs(np.diagonal(lu))
        if info > 0 or np.any(udiag < SINGULAR_PIVOT):
            pivot = info - 1 if info > 0 else int(np.argmax(udiag < SINGULAR_PIVOT))
            raise SingularMatrixError(pivot)
        self.n = a.shape[0]
        self._lu, self._piv = lu, piv

    def solve(self, b, trans: str = "N") -> np.ndarray:
        b = np.asarray(b, dtype=np.complex128)
        x, info = lapack.zgetrs(self._lu, self._piv, b, trans=_TRANS[trans])
        if info != 0:
            raise LinalgError(f"zgetrs failed with info={info}")
        return x


def factorize(m: MatrixLike):
    """LU handle for a banded or dense square matrix."""
    if isinstance(m, BandedMatrix):
        return BandedLU(m)
    return DenseLU(m)


def banded_lu(m: BandedMatrix) -> BandedLU:
    """Factor ``m``; raises :class:`SingularMatrixError` on a zero pivot."""
    if not isinstance(m, BandedMatrix):
        raise TypeError("banded_lu expects a BandedMatrix")
    return BandedLU(m)


def _shifted(m: MatrixLike, sigma: complex) -> MatrixLike:
    if isinstance(m, BandedMatrix):
        return m.shifted(sigma)
    return np.asarray(m) - sigma * np.eye(m.shape[0])


def _apply(m: MatrixLike, x: np.ndarray) -> np.ndarray:
    return m.matvec(x) if isinstance(m, BandedMatrix) else np.asarray(m) @ x


def _dense(m: MatrixLike) -> np.ndarray:
    return m.to_dense() if isinstance(m, BandedMatrix) else np.asarray(m)


# --------------------------------------------------------------------------
# eigenvalues


@dataclass
class EigenResult:
    """Eigenvalues with optional per-eigenvalue residual norms."""

    eigenvalues: np.ndarray
    residuals: np.ndarray | None = None
    method: str = "dense_qr"
    flag_threshold: float = 1e-6

    def __post_init__(self):
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=np.complex128)
        if self.residuals is not None:
            self.residuals = np.asarray(self.residuals, dtype=float)

    def __len__(self):
        return len(self.eigenvalues)

    @property
    def flagged(self) -> np.ndarray:
        """Mask of eigenvalues whose residual exceeds ``flag_threshold``."""
        if self.residuals is None:
            return np.zeros(len(self), dtype=bool)
        return self.residuals > self.flag_threshold

    def sorted(self, key: str = "real") -> "EigenResult":
        ev = self.eigenvalues
        order = np.lexsort((ev.imag, ev.real)) if key == "real" else np.argsort(np.abs(ev))
        res = None if self.residuals is None else self.residuals[order]
        return EigenResult(ev[order], res, self.method, self.flag_threshold)


@dataclass
class Eigenpair:
    """Result of a targeted eigenvalue search.

    ``shift_is_eigenvalue`` is set when the LU of ``A - shift`` was singular;
    ``value`` is then the shift itself and ``residual`` is zero.
    """

    value: complex
    residual: float
    iterations: int = 0
    shift_is_eigenvalue: bool = False
    vector: np.ndarray | None = field(default=None, repr=False)


def hessenberg(a: np.ndarray) -> np.ndarray:
    """Upper Hessenberg form by Householder reflections (similarity)."""
    H = np.array(a, dtype=np.complex128, copy=True)
    n = H.shape[0]
    for k in range(n - 2):
        x = H[k + 1:, k].copy()
        nx = np.linalg.norm(x)
        if nx == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x
        v[0] += phase * nx
        v /= np.linalg.norm(v)
        H[k + 1:, k:] -= 2.0 * np.outer(v, v.conj() @ H[k + 1:, k:])
        H[:, k + 1:] -= 2.0 * np.outer(H[:, k + 1:] @ v, v.conj())
        H[k + 2:, k] = 0.0
    return H


def _wilkinson_shift(a, b, c, d) -> complex:
    # eigenvalue of [[a, b], [c, d]] closest to d
    tr, det = a + d, a * d - b * c
    disc = np.sqrt(tr * tr / 4.0 - det)
    l1, l2 = tr / 2.0 + disc, tr / 2.0 - disc
    return l1 if abs(l1 - d) < abs(l2 - d) else l2


def hessenberg_qr_eigenvalues(a: np.ndarray, tol: float = 1e-14, max_iter: int | None = None) -> np.ndarray:
    """Eigenvalues by Hessenberg reduction and Wilkinson-shifted complex QR.

    Explicit single-shift QR steps with Givens rotations act on the active
    unreduced block only; a subdiagonal entry is deflated once it drops below
    ``tol`` times the neighbouring diagonal magnitudes.

    Raises
    ------
    ConvergenceError
        After ``max_iter`` (default ``30 n``) QR steps without full deflation.
    """
    H = hessenberg(a)
    n = H.shape[0]
    max_iter = 30 * n if max_iter is None else max_iter
    eig = np.zeros(n, dtype=np.complex128)
    hi, total, since_deflation = n - 1, 0, 0
    scale = max(np.abs(H).max(), np.finfo(float).tiny)
    while hi >= 0:
        if hi == 0:
            eig[0] = H[0, 0]
            break
        lo = hi
        while lo > 0:
            s = abs(H[lo - 1, lo - 1]) + abs(H[lo, lo])
            if abs(H[lo, lo - 1]) <= tol * (s if s > 0 else scale):
                H[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            eig[hi] = H[hi, hi]
            hi -= 1
            since_deflation = 0
            continue
        if total >= max_iter:
            raise ConvergenceError(f"QR did not converge within {max_iter} iterations",
                                   best=np.concatenate([np.diagonal(H)[: hi + 1], eig[hi + 1:]]))
        total += 1
        since_deflation += 1
        if since_deflation % 11 == 0:
            # exceptional shift to break cycles
            mu = H[hi, hi] + 0.75 * abs(H[hi, hi - 1]) * np.exp(0.5j * since_deflation)
        else:
            mu = _wilkinson_shift(H[hi - 1, hi - 1], H[hi - 1, hi], H[hi, hi - 1], H[hi, hi])
        _qr_step(H, lo, hi, mu)
    return eig


def _qr_step(H: np.ndarray, lo: int, hi: int, mu: complex) -> None:
    idx = np.arange(lo, hi + 1)
    H[idx, idx] -= mu
    rots = []
    for k in range(lo, hi):
        x, y = H[k, k], H[k + 1, k]
        r = np.hypot(abs(x), abs(y))
        if r == 0.0:
            c, s = 1.0, 0.0
        else:
            c, s = x / r, y / r
        # G = [[conj(c), conj(s)], [-s, c]] is unitary and maps (x, y) to (r, 0)
        rows = H[k:k + 2, k:hi + 1].copy()
        H[k, k:hi + 1] = np.conj(c) * rows[0] + np.conj(s) * rows[1]
        H[k + 1, k:hi + 1] = -s * rows[0] + c * rows[1]
        rots.append((c, s))
    for k, (c, s) in zip(range(lo, hi), rots):
        top = min(k + 2, hi)
        cols = H[lo:top + 1, k:k + 2].copy()
        H[lo:top + 1, k] = c * cols[:, 0] + s * cols[:, 1]
        H[lo:top + 1, k + 1] = -np.conj(s) * cols[:, 0] + np.conj(c) * cols[:, 1]
    H[idx, idx] += mu


def dense_eigenvalues(m: MatrixLike, tol: float = 1e-14, method: str = "lapack",
                      residuals: bool = False, cap: int = DENSE_CAP) -> EigenResult:
    """All eigenvalues of a (dense view of a) square matrix.

    Parameters
    ----------
    m : BandedMatrix or ndarray
    tol : float
        Deflation tolerance of the native QR; ignored by LAPACK.
    method : {"lapack", "qr"}
        ``"lapack"`` calls ``zgeev`` (Hessenberg reduction plus shifted QR);
        ``"qr"`` runs :func:`hessenberg_qr_eigenvalues`.
    residuals : bool
        Also return ``||A v - lambda v|| / ||v||`` per eigenpair (LAPACK only).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = _dense(m)
    n = a.shape[0]
    if n > cap:
        raise ValueError(f"dimension {n} exceeds the dense cap {cap}; use shift-invert")
    if method == "qr":
        if residuals:
            raise ValueError("residuals are only available with method='lapack'")
        return EigenResult(hessenberg_qr_eigenvalues(a, tol), None, "dense_qr")
    if method != "lapack":
        raise ValueError(f"unknown method {method!r}")
    if not np.all(np.isfinite(a)):
        raise LinalgError("matrix has non-finite entries")
    if residuals:
        w, v = scipy.linalg.eig(a)
        res = np.linalg.norm(a @ v - v * w, axis=0) / np.linalg.norm(v, axis=0)
        return EigenResult(w, res, "dense_qr")
    return EigenResult(scipy.linalg.eigvals(a), None, "dense_qr")


def _norm1(m: MatrixLike) -> float:
    if isinstance(m, BandedMatrix):
        return m.norm1()
    return float(np.abs(np.asarray(m)).sum(axis=0).max())


def _start_vector(n: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


def shift_invert_eigenvalue(m: MatrixLike, shift: complex, tol: float = 1e-10,
                            max_iter: int = 200, v0: np.ndarray | None = None) -> Eigenpair:
    """Eigenvalue of ``m`` nearest ``shift`` by inverse iteration.

    Each step solves with the LU of ``m - shift``; the eigenvalue estimate is
    the Rayleigh quotient of the normalized iterate and the stopping test is
    ``||m v - lambda v|| <= max(tol, 4 u ||m||_1)`` with ``u`` the unit
    roundoff, since no backward-stable method can beat that floor.

    Raises
    ------
    ConvergenceError
        After ``max_iter`` steps; carries the best eigenvalue and residual.
    """
    n = m.shape[0]
    try:
        lu = factorize(_shifted(m, shift))
    except SingularMatrixError:
        return Eigenpair(complex(shift), 0.0, 0, True)
    v = _start_vector(n) if v0 is None else np.asarray(v0, dtype=np.complex128) / np.linalg.norm(v0)
    stop = max(tol, 4 * np.finfo(float).eps * _norm1(m))
    best = (np.inf, complex(shift), v)
    for it in range(1, max_iter + 1):
        y = lu.solve(v)
        ny = np.linalg.norm(y)
        if not np.isfinite(ny) or ny == 0.0:
            raise ConvergenceError("inverse iteration produced a non-finite iterate")
        v = y / ny
        Av = _apply(m, v)
        lam = complex(np.vdot(v, Av))
        res = float(np.linalg.norm(Av - lam * v))
        if res < best[0]:
            best = (res, lam, v)
        if res <= stop:
            return Eigenpair(lam, res, it, False, v)
    raise ConvergenceError(f"inverse iteration did not reach tol={tol:g} in {max_iter} steps "
                           f"(best residual {best[0]:.3e})", best=best[1], residual=best[0])


def inverse_step_residual(m: MatrixLike, lam: complex, seed: int = 0) -> float:
    """Residual of the vector produced by one inverse-iteration step at ``lam``."""
    n = m.shape[0]
    sigma = complex(lam)
    try:
        lu = factorize(_shifted(m, sigma))
    except SingularMatrixError:
        return 0.0
    b = _start_vector(n, seed)
    y = lu.solve(b)
    # (A - sigma) y = b, so the residual of y/|y| at sigma is |b|/|y|
    return float(1.0 / np.linalg.norm(y))


_SMALL_SVD = 64


def smallest_singular_value(m: MatrixLike, tol: float = 1e-8) -> float:
    """Smallest singular value of a square matrix.

    Large matrices: Lanczos (ARPACK) on ``(A^H A)^{-1}``, applied through an
    LU solve followed by a conjugate-transpose solve.  Matrices of order at
    most 64 use a dense SVD.  A singular LU gives ``0.0``.
    """
    n = m.shape[0]
    if n <= _SMALL_SVD:
        s = np.linalg.svd(_dense(m).astype(np.complex128), compute_uv=False)
        return float(s[-1])
    try:
        lu = factorize(m)
    except SingularMatrixError:
        return 0.0

    def normal_inverse(v):
        return lu.solve(lu.solve(v, trans="C"))

    op = scipy.sparse.linalg.LinearOperator((n, n), matvec=normal_inverse, dtype=np.complex128)
    v0 = np.ones(n, dtype=np.complex128)
    try:
        w = scipy.sparse.linalg.eigsh(op, k=1, which="LM", tol=tol, v0=v0,
                                      return_eigenvectors=False, maxiter=20 * n)
    except scipy.sparse.linalg.ArpackNoConvergence as exc:
        raise ConvergenceError("Lanczos on the inverse normal operator did not converge") from exc
    top = float(np.real(w[0]))
    if not np.isfinite(top) or top <= 0:
        return 0.0
    return 1.0 / np.sqrt(top)


def match_eigenvalues(eigenvalues: Sequence[complex], targets: Sequence[complex]) -> list[tuple[complex, complex, float]]:
    """Greedy nearest matching of targets to eigenvalues.

    Over all (target, eigenvalue) pairs the globally closest pair is taken
    first, each eigenvalue and target is used once, and ties go to the
    eigenvalue with smaller ``|Im|``.  Returns ``(target, eigenvalue,
    distance)`` in target order.
    """
    ev = np.asarray(eigenvalues, dtype=np.complex128)
    tg = np.asarray(targets, dtype=np.complex128)
    if len(tg) > len(ev):
        raise ValueError("more targets than eigenvalues")
    dist = np.abs(tg[:, None] - ev[None, :])
    pairs = sorted(((dist[i, j], abs(ev[j].imag), i, j) for i in range(len(tg)) for j in range(len(ev))))
    used_t, used_e, out = set(), set(), {}
    for d, _, i, j in pairs:
        if i in used_t or j in used_e:
            continue
        used_t.add(i)
        used_e.add(j)
        out[i] = (complex(tg[i]), complex(ev[j]), float(d))
        if len(out) == len(tg):
            break
    return [out[i] for i in range(len(tg))]
