"""Discretized operators of the 1D Bloch-Torrey family.

Every builder takes an :class:`OperatorSpec` and returns a matrix acting on
values at the interior grid nodes.  Vector-valued (3-component) operators use
node-major interleaving, index ``3*i + c`` for component ``c`` at node ``i``,
which keeps them banded.

Scalar kinds and their continuous operators::

    ComplexAiryPlus/Minus   -eps^2 u'' +/- i x u
    ComplexHarmonic         -u'' - 2 i x^2 u
    QuarticM0               -u'' + [(w^2 - lam)^2 + 1/eps] u
    QuarticM                QuarticM0 + (2 w^2 + lam) / (w^2 - lam)^2
    DilatedM                -e^{-2 theta} u'' + V(e^{2 theta} w^2)
    HatL                    -u'' + 2 s^2 + 2 e^{3i pi/4} mu + eps e^{i pi/4} mu^2
                            - 2 i mu eps s^2 + e^{3i pi/4} eps s^4
                            + eps e^{i pi/4} Phi(eps, e^{i pi/8} s, mu)

For the quartic kinds ``eps`` is the rescaled small parameter (the one whose
inverse appears in the potential), i.e. ``eps_original ** (4/3)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from enum import Enum
from functools import lru_cache
from typing import Any

import numpy as np

from .grid import Grid1D, first_difference_matrix, second_derivative_matrix
from .linalg import BandedLU, BandedMatrix

__all__ = [
    "OperatorKind",
    "OperatorSpec",
    "SpecError",
    "build",
    "build_bloch_torrey",
    "build_rotated",
    "build_scalar",
    "build_interval_plambda",
    "build_limit_atilde",
    "airy_first_zero",
    "airy_threshold",
    "field_coupling_blocks",
    "hatl_phi",
]

SQRT2 = math.sqrt(2.0)


class SpecError(ValueError):
    """Invalid or inconsistent operator specification."""


class OperatorKind(str, Enum):
    BLOCH_TORREY_LINE = "BlochTorreyLine"
    BLOCH_TORREY_INTERVAL = "BlochTorreyInterval"
    ROTATED_BLOCH_TORREY = "RotatedBlochTorrey"
    GENERAL_FIELD = "GeneralField"
    COMPLEX_AIRY_PLUS = "ComplexAiryPlus"
    COMPLEX_AIRY_MINUS = "ComplexAiryMinus"
    COMPLEX_HARMONIC = "ComplexHarmonic"
    QUARTIC_M0 = "QuarticM0"
    QUARTIC_M = "QuarticM"
    DILATED_M = "DilatedM"
    HAT_L = "HatL"
    INTERVAL_P_LAMBDA = "IntervalPLambda"
    LIMIT_ATILDE = "LimitAtilde"


K = OperatorKind
_PARAMS = ("eps", "b0", "bfield", "xi2", "xi3", "lam", "mu", "theta")

# (required, optional) parameters per kind; order and grid are always allowed
_ALLOWED: dict[OperatorKind, tuple[set, set]] = {
    K.BLOCH_TORREY_LINE: ({"eps"}, {"b0"}),
    K.BLOCH_TORREY_INTERVAL: ({"eps"}, {"b0"}),
    K.ROTATED_BLOCH_TORREY: ({"eps"}, {"b0"}),
    K.GENERAL_FIELD: ({"eps", "bfield"}, {"xi2", "xi3"}),
    K.COMPLEX_AIRY_PLUS: ({"eps"}, set()),
    K.COMPLEX_AIRY_MINUS: ({"eps"}, set()),
    K.COMPLEX_HARMONIC: (set(), set()),
    K.QUARTIC_M0: ({"lam", "eps"}, set()),
    K.QUARTIC_M: ({"lam", "eps"}, set()),
    K.DILATED_M: ({"lam", "eps", "theta"}, set()),
    K.HAT_L: ({"eps", "mu"}, set()),
    K.INTERVAL_P_LAMBDA: ({"eps", "lam"}, set()),
    K.LIMIT_ATILDE: (set(), set()),
}

_COMPLEX = {"lam", "mu", "theta"}
_JSON_NAMES = {"lam": "lambda"}


@dataclass(frozen=True)
class OperatorSpec:
    """Declarative description of one discretized operator.

    Parameters not used by ``kind`` must be left as ``None``; the constructor
    rejects extras and missing required values.  ``b0`` defaults to 1 for the
    Bloch-Torrey kinds (field ``b(x) = (b0, 0, x)``).  ``bfield`` holds the
    field samples at the interior nodes, shape ``(n, 3)``.
    """

    kind: OperatorKind
    grid: Grid1D
    eps: float | None = None
    b0: float | None = None
    bfield: tuple | None = None
    xi2: float | None = None
    xi3: float | None = None
    lam: complex | None = None
    mu: complex | None = None
    theta: complex | None = None
    order: int = 2

    def __post_init__(self):
        try:
            kind = OperatorKind(self.kind)
        except ValueError:
            raise SpecError(f"unknown operator kind {self.kind!r}") from None
        object.__setattr__(self, "kind", kind)
        if not isinstance(self.grid, Grid1D):
            raise SpecError("grid must be a Grid1D")
        if self.order not in (2, 4):
            raise SpecError(f"order must be 2 or 4, got {self.order}")
        required, optional = _ALLOWED[kind]
        given = {p for p in _PARAMS if getattr(self, p) is not None}
        extra = given - required - optional
        if extra:
            raise SpecError(f"{kind.value} does not take {sorted(extra)}")
        missing = required - given
        if missing:
            raise SpecError(f"{kind.value} requires {sorted(missing)}")
        for p in given - {"bfield"}:
            v = getattr(self, p)
            v = complex(v) if p in _COMPLEX else float(v)
            if not np.isfinite(v):
                raise SpecError(f"{p} must be finite")
            object.__setattr__(self, p, v)
        if self.eps is not None and (self.eps < 0 or (self.eps == 0 and kind != K.HAT_L)):
            raise SpecError("eps must be positive (HatL also accepts 0)")
        if self.bfield is not None:
            b = np.asarray(self.bfield, dtype=float)
            if b.shape != (self.grid.n, 3):
                raise SpecError(f"bfield must have shape ({self.grid.n}, 3), got {b.shape}")
            object.__setattr__(self, "bfield", tuple(map(tuple, b)))
        if kind in (K.INTERVAL_P_LAMBDA, K.LIMIT_ATILDE) and self.order != 2:
            raise SpecError(f"{kind.value} is only available with order 2")
        if kind == K.DILATED_M and abs(self.theta.imag) >= 3 * math.pi / 16:
            raise SpecError("DilatedM needs |Im theta| < 3*pi/16")
        if kind in (K.QUARTIC_M, K.DILATED_M) and self.lam.imag == 0 and self.lam.real >= 0:
            raise SpecError("the quartic operator needs lambda outside [0, inf)")
        if kind == K.INTERVAL_P_LAMBDA:
            if self.lam.imag != 0:
                raise SpecError("IntervalPLambda needs a real Lambda")
            if self.lam.real >= airy_threshold(self.eps):
                raise SpecError(f"Lambda={self.lam.real:g} is not below the Airy threshold "
                                f"{airy_threshold(self.eps):g}")

    # convenience ---------------------------------------------------------
    def replace(self, **changes) -> "OperatorSpec":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(changes)
        return OperatorSpec(**d)

    @property
    def components(self) -> int:
        return 3 if self.kind in (K.BLOCH_TORREY_LINE, K.BLOCH_TORREY_INTERVAL,
                                  K.ROTATED_BLOCH_TORREY, K.GENERAL_FIELD) else 1

    @property
    def dimension(self) -> int:
        return self.components * self.grid.n

    # serialization --------------------------------------------------------
    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"kind": self.kind.value, "grid": self.grid.to_dict(), "order": self.order}
        for p in _PARAMS:
            v = getattr(self, p)
            if v is None:
                continue
            if p in _COMPLEX:
                v = [v.real, v.imag]
            elif p == "bfield":
                v = [list(row) for row in v]
            d[_JSON_NAMES.get(p, p)] = v
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "OperatorSpec":
        names = {_JSON_NAMES.get(p, p): p for p in _PARAMS}
        unknown = set(d) - set(names) - {"kind", "grid", "order"}
        if unknown:
            raise SpecError(f"unknown fields: {sorted(unknown)}")
        if "kind" not in d or "grid" not in d:
            raise SpecError("spec needs 'kind' and 'grid'")
        kw: dict[str, Any] = {"kind": d["kind"], "grid": Grid1D.from_dict(d["grid"]),
                              "order": d.get("order", 2)}
        for jname, p in names.items():
            if jname not in d:
                continue
            v = d[jname]
            if p in _COMPLEX:
                v = complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v)
            kw[p] = v
        return cls(**kw)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "OperatorSpec":
        return cls.from_dict(json.loads(text))


# --------------------------------------------------------------------------
# Airy threshold


def _airy_maclaurin(x: float, terms: int = 60) -> float:
    c1 = 1.0 / (3.0 ** (2.0 / 3.0) * math.gamma(2.0 / 3.0))
    c2 = 1.0 / (3.0 ** (1.0 / 3.0) * math.gamma(1.0 / 3.0))
    x3 = x ** 3
    f = t = 1.0
    g = s = x
    for k in range(terms):
        t *= x3 / ((3 * k + 2) * (3 * k + 3))
        s *= x3 / ((3 * k + 3) * (3 * k + 4))
        f += t
        g += s
    return c1 * f - c2 * g


@lru_cache(maxsize=None)
def airy_first_zero() -> float:
    """Modulus of the first zero of Ai, by bisection on its Maclaurin series."""
    lo, hi = -3.0, -2.0
    flo = _airy_maclaurin(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = _airy_maclaurin(mid)
        if fm == 0.0:
            return -mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    return -0.5 * (lo + hi)


def airy_threshold(eps: float) -> float:
    """``eps**(2/3) |nu_1| / 2``: real parts below this keep ``L_pm - Lambda`` invertible."""
    return eps ** (2.0 / 3.0) * airy_first_zero() / 2.0


# --------------------------------------------------------------------------
# assembly helpers


def _interleave(D2: BandedMatrix, kinetic, blocks: np.ndarray) -> BandedMatrix:
    """``kinetic[c] * D2`` on each component plus node-local 3x3 ``blocks``."""
    n = D2.n
    N = 3 * n
    kin = np.broadcast_to(np.asarray(kinetic), (3,))
    diags: dict[int, np.ndarray] = {}
    dtype = np.result_type(D2.dtype, kin.dtype, blocks.dtype)
    for k in range(-D2.kl, D2.ku + 1):
        d = D2.diagonal(k)
        diags[3 * k] = (np.repeat(d, 3) * np.tile(kin, d.size)).astype(dtype)
    for off in range(-2, 3):
        vals = np.zeros(N - abs(off), dtype=dtype)
        for p in range(3):
            q = p + off
            if not 0 <= q < 3:
                continue
            if off >= 0:
                vals[p::3] = blocks[: len(vals[p::3]), p, q]
            else:
                vals[q::3] = blocks[: len(vals[q::3]), p, q]
        diags[off] = diags.get(off, 0) + vals
    return BandedMatrix.from_diagonals(diags, N, dtype=dtype)


def _cross_matrix(b: np.ndarray) -> np.ndarray:
    """Per-node matrices of ``u -> b x u``; ``b`` has shape (n, 3)."""
    m = np.zeros((b.shape[0], 3, 3))
    m[:, 0, 1], m[:, 0, 2] = -b[:, 2], b[:, 1]
    m[:, 1, 0], m[:, 1, 2] = b[:, 2], -b[:, 0]
    m[:, 2, 0], m[:, 2, 1] = -b[:, 1], b[:, 0]
    return m


def field_coupling_blocks(spec: OperatorSpec) -> np.ndarray:
    """Node-local coupling blocks of a Bloch-Torrey or general-field spec."""
    x = spec.grid.x
    if spec.kind in (K.BLOCH_TORREY_LINE, K.BLOCH_TORREY_INTERVAL):
        b0 = 1.0 if spec.b0 is None else spec.b0
        b = np.column_stack([np.full_like(x, b0), np.zeros_like(x), x])
        return -_cross_matrix(b)
    if spec.kind == K.GENERAL_FIELD:
        xi2 = spec.xi2 or 0.0
        xi3 = spec.xi3 or 0.0
        m = _cross_matrix(np.asarray(spec.bfield))
        m += spec.eps ** 2 * (xi2 ** 2 + xi3 ** 2) * np.eye(3)
        return m
    raise SpecError(f"{spec.kind.value} has no field coupling")


def _check_potential(V: np.ndarray, x: np.ndarray, kind: OperatorKind) -> np.ndarray:
    bad = ~np.isfinite(V)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise SpecError(f"{kind.value}: potential is singular at node {i + 1} (x={x[i]:.6g})")
    return V


# --------------------------------------------------------------------------
# builders


def build_bloch_torrey(spec: OperatorSpec) -> BandedMatrix:
    """``-eps^2 D2 (x) I_3 + M(x)`` for the line, interval and general-field kinds.

    For the line and interval kinds ``M(x) = -[b(x) x]`` with
    ``b = (b0, 0, x)``; for ``GeneralField`` ``M = [b x] + eps^2 |xi|^2 I``.
    """
    if spec.kind not in (K.BLOCH_TORREY_LINE, K.BLOCH_TORREY_INTERVAL, K.GENERAL_FIELD):
        raise SpecError(f"build_bloch_torrey cannot build {spec.kind.value}")
    D2 = second_derivative_matrix(spec.grid, spec.order)
    return _interleave(D2, spec.eps ** 2, field_coupling_blocks(spec))


def build_rotated(spec: OperatorSpec) -> BandedMatrix:
    """The system in the eigenbasis ``(v, conj(v), e_3)`` of the transverse field.

    Diagonal blocks ``-eps^2 D2 + i x``, ``-eps^2 D2 - i x``, ``-eps^2 D2``;
    the third component couples with ``+b0/sqrt(2)`` (column) and
    ``-b0/sqrt(2)`` (row).
    """
    if spec.kind != K.ROTATED_BLOCH_TORREY:
        raise SpecError(f"build_rotated cannot build {spec.kind.value}")
    x = spec.grid.x
    c = (1.0 if spec.b0 is None else spec.b0) / SQRT2
    blocks = np.zeros((x.size, 3, 3), dtype=np.complex128)
    blocks[:, 0, 0] = 1j * x
    blocks[:, 1, 1] = -1j * x
    blocks[:, 0, 2] = blocks[:, 1, 2] = c
    blocks[:, 2, 0] = blocks[:, 2, 1] = -c
    D2 = second_derivative_matrix(spec.grid, spec.order)
    return _interleave(D2, spec.eps ** 2, blocks)


def hatl_phi(eps: float, w: np.ndarray, mu: complex) -> np.ndarray:
    """``(i + 2 eps w^2 + eps mu) / (-i + eps w^2 - eps mu)^2``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return (1j + 2 * eps * w ** 2 + eps * mu) / (-1j + eps * w ** 2 - eps * mu) ** 2


def _scalar_parts(spec: OperatorSpec) -> tuple[complex, np.ndarray]:
    x = spec.grid.x
    k = spec.kind
    with np.errstate(divide="ignore", invalid="ignore"):
        if k == K.COMPLEX_AIRY_PLUS:
            return spec.eps ** 2, 1j * x
        if k == K.COMPLEX_AIRY_MINUS:
            return spec.eps ** 2, -1j * x
        if k == K.COMPLEX_HARMONIC:
            return 1.0, -2j * x ** 2
        if k in (K.QUARTIC_M0, K.QUARTIC_M):
            p = x ** 2 - spec.lam
            V = p ** 2 + 1.0 / spec.eps
            if k == K.QUARTIC_M:
                V = V + (2 * x ** 2 + spec.lam) / p ** 2
            return 1.0, V
        if k == K.DILATED_M:
            e2 = np.exp(2 * spec.theta)
            p = e2 * x ** 2 - spec.lam
            V = p ** 2 + 1.0 / spec.eps + (2 * e2 * x ** 2 + spec.lam) / p ** 2
            return np.exp(-2 * spec.theta), V
        if k == K.HAT_L:
            eps, mu = spec.eps, spec.mu
            e1, e3 = np.exp(1j * math.pi / 4), np.exp(3j * math.pi / 4)
            V = (2 * x ** 2 + 2 * e3 * mu + eps * e1 * mu ** 2 - 2j * mu * eps * x ** 2
                 + e3 * eps * x ** 4)
            if eps != 0:
                V = V + eps * e1 * hatl_phi(eps, np.exp(1j * math.pi / 8) * x, mu)
            return 1.0, V
    raise SpecError(f"build_scalar cannot build {k.value}")


def build_scalar(spec: OperatorSpec) -> BandedMatrix:
    """``kinetic * D2 + diag(V)`` for the scalar kinds listed in the module docstring."""
    kinetic, V = _scalar_parts(spec)
    V = _check_potential(np.asarray(V, dtype=np.complex128), spec.grid.x, spec.kind)
    D2 = second_derivative_matrix(spec.grid, spec.order)
    return (D2 * kinetic).add_diagonal(V)


def _airy_pair(eps: float, grid: Grid1D) -> tuple[BandedMatrix, BandedMatrix]:
    D2 = second_derivative_matrix(grid, 2) * eps ** 2
    x = grid.x
    return D2.add_diagonal(1j * x), D2.add_diagonal(-1j * x)


def build_interval_plambda(spec: OperatorSpec, symmetrize: bool = True) -> np.ndarray:
    """Dense ``-eps^2 D2 + (R_- + R_+)/2`` with ``R_pm = (L_pm - Lambda)^{-1}``.

    Both resolvents are computed column by column from one banded LU each
    (all unit vectors are solved in a single call).  For real ``Lambda`` the
    sum is real symmetric up to roundoff; with ``symmetrize=True`` the real
    part is averaged with its transpose and returned as a real array, with
    ``symmetrize=False`` the raw complex matrix is returned.

    Raises
    ------
    SingularMatrixError
        When ``Lambda`` is (numerically) an eigenvalue of a discrete Airy operator.
    """
    if spec.kind != K.INTERVAL_P_LAMBDA:
        raise SpecError(f"build_interval_plambda cannot build {spec.kind.value}")
    lam = spec.lam.real
    Lp, Lm = _airy_pair(spec.eps, spec.grid)
    n = spec.grid.n
    eye = np.eye(n, dtype=np.complex128)
    Rp = BandedLU(Lp.shifted(lam)).solve(eye)
    Rm = BandedLU(Lm.shifted(lam)).solve(eye)
    P = (second_derivative_matrix(spec.grid, 2) * spec.eps ** 2).to_dense() + 0.5 * (Rp + Rm)
    if not symmetrize:
        return P
    Pr = P.real
    return 0.5 * (Pr + Pr.T)


def build_limit_atilde(spec: OperatorSpec) -> tuple[BandedMatrix, BandedMatrix]:
    """Pencil ``(A, Bw)`` whose lowest generalized eigenvalue discretizes rho_0.

    ``A = G^T G + H^T H`` with ``G: w -> (x w)'`` and ``H: w -> w'`` as forward
    differences onto cell midpoints; ``Bw = diag(1 + x^2)``.  Both sides
    would carry the same factor ``h`` in the discrete L2 pairing, so it is
    omitted.
    """
    if spec.kind != K.LIMIT_ATILDE:
        raise SpecError(f"build_limit_atilde cannot build {spec.kind.value}")
    g = spec.grid
    G = first_difference_matrix(g, g.x_full)
    H = first_difference_matrix(g)
    A = BandedMatrix.from_dense(G.T @ G + H.T @ H, 1, 1)
    Bw = BandedMatrix.diag(1.0 + g.x ** 2)
    return A, Bw


def build(spec: OperatorSpec):
    """Dispatch to the builder for ``spec.kind``."""
    k = spec.kind
    if k in (K.BLOCH_TORREY_LINE, K.BLOCH_TORREY_INTERVAL, K.GENERAL_FIELD):
        return build_bloch_torrey(spec)
    if k == K.ROTATED_BLOCH_TORREY:
        return build_rotated(spec)
    if k == K.INTERVAL_P_LAMBDA:
        return build_interval_plambda(spec)
    if k == K.LIMIT_ATILDE:
        return build_limit_atilde(spec)
    return build_scalar(spec)
