"""Eigenvalue surveys, targeted eigenvalue location and resolvent-norm grids.

Resolvent norms are operator 2-norms of ``(A - lambda)^{-1}``.  The
discrete L2 norm is the Euclidean norm scaled by ``sqrt(h)``, which cancels
in any operator norm, so no explicit weighting appears.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .grid import Grid1D, richardson_extrapolate
from .linalg import (DENSE_CAP, BandedMatrix, EigenResult, Eigenpair, dense_eigenvalues,
                     inverse_step_residual, shift_invert_eigenvalue, smallest_singular_value)
from .operators import OperatorKind, OperatorSpec, build

__all__ = [
    "ResolventGrid",
    "TruncationReport",
    "TwoGridCheck",
    "survey_spectrum",
    "locate_eigenvalue",
    "resolvent_norm",
    "pseudospectrum_grid",
    "validate_truncation",
    "two_grid_check",
    "default_workers",
]

Operand = Union[OperatorSpec, BandedMatrix, np.ndarray]

# kinds posed on the whole line (truncated to a symmetric interval)
LINE_KINDS = {
    OperatorKind.BLOCH_TORREY_LINE, OperatorKind.ROTATED_BLOCH_TORREY,
    OperatorKind.COMPLEX_HARMONIC, OperatorKind.QUARTIC_M0, OperatorKind.QUARTIC_M,
    OperatorKind.DILATED_M, OperatorKind.HAT_L,
}


def default_workers() -> int:
    import os
    env = os.environ.get("BTSPEC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _matrix(op: Operand):
    if isinstance(op, OperatorSpec):
        m = build(op)
        if isinstance(m, tuple):
            raise ValueError(f"{op.kind.value} is a pencil, not a single operator")
        return m
    return op


def _dim(m) -> int:
    return m.shape[0]


def survey_spectrum(op: Operand, window: tuple[float, float, float, float] | None = None,
                    residuals: bool = True, cap: int = DENSE_CAP) -> EigenResult:
    """All eigenvalues inside ``window = (re_min, re_max, im_min, im_max)``.

    Eigenvalues come from a dense QR solve.  Each kept eigenvalue gets the
    residual of one inverse-iteration step at that value; entries above the
    flag threshold stay in the result and are marked by ``flagged``.

    Raises
    ------
    ValueError
        When the matrix exceeds the dense cap; use :func:`locate_eigenvalue`.
    """
    m = _matrix(op)
    if _dim(m) > cap:
        raise ValueError(f"matrix of order {_dim(m)} exceeds the dense cap {cap}; "
                         "use locate_eigenvalue for targeted eigenvalues")
    w = dense_eigenvalues(m, cap=cap).eigenvalues
    if window is not None:
        r0, r1, i0, i1 = window
        keep = (w.real >= r0) & (w.real <= r1) & (w.imag >= i0) & (w.imag <= i1)
        w = w[keep]
    res = None
    if residuals:
        res = np.array([inverse_step_residual(m, lam) for lam in w])
    return EigenResult(w, res, "dense_qr")


def locate_eigenvalue(op: Operand, target: complex, tol: float = 1e-10,
                      max_iter: int = 200) -> Eigenpair:
    """Eigenvalue nearest ``target`` by shift-invert inverse iteration."""
    return shift_invert_eigenvalue(_matrix(op), target, tol=tol, max_iter=max_iter)


def resolvent_norm(op: Operand, lam: complex, tol: float = 1e-6) -> float:
    """``||(A - lam)^{-1}||``; ``inf`` when ``lam`` is numerically an eigenvalue."""
    m = _matrix(op)
    if isinstance(m, BandedMatrix):
        shifted = m.shifted(lam)
    else:
        shifted = np.asarray(m, dtype=np.complex128) - lam * np.eye(_dim(m))
    s = smallest_singular_value(shifted, tol=tol)
    return math.inf if s == 0.0 else 1.0 / s


@dataclass
class ResolventGrid:
    """Resolvent norms on the tensor grid ``re_axis x im_axis``.

    ``norms[j, i]`` belongs to ``re_axis[i] + 1j * im_axis[j]``; ``inf``
    marks points where the factorization was singular.
    """

    re_axis: np.ndarray
    im_axis: np.ndarray
    norms: np.ndarray
    spec: OperatorSpec | None = None

    def points(self):
        for j, y in enumerate(self.im_axis):
            for i, x in enumerate(self.re_axis):
                yield x, y, self.norms[j, i]

    def argmax(self) -> complex:
        j, i = np.unravel_index(np.argmax(np.where(np.isfinite(self.norms), self.norms, np.inf)),
                                self.norms.shape)
        return complex(self.re_axis[i], self.im_axis[j])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["re", "im", "norm"])
        for x, y, v in self.points():
            w.writerow([f"{x:.17g}", f"{y:.17g}", f"{v:.17g}"])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({
            "spec": None if self.spec is None else self.spec.to_dict(),
            "re_axis": list(map(float, self.re_axis)),
            "im_axis": list(map(float, self.im_axis)),
            "norms": [[float(v) if np.isfinite(v) else None for v in row] for row in self.norms],
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ResolventGrid":
        d = json.loads(text)
        norms = np.array([[np.inf if v is None else v for v in row] for row in d["norms"]], dtype=float)
        spec = None if d.get("spec") is None else OperatorSpec.from_dict(d["spec"])
        return cls(np.array(d["re_axis"]), np.array(d["im_axis"]), norms, spec)


def pseudospectrum_grid(op: Operand, re_axis: Sequence[float], im_axis: Sequence[float],
                        tol: float = 1e-6, workers: int | None = None) -> ResolventGrid:
    """Resolvent norm at every node of a rectangular grid, evaluated in parallel."""
    re_axis = np.asarray(re_axis, dtype=float)
    im_axis = np.asarray(im_axis, dtype=float)
    for name, ax in (("re_axis", re_axis), ("im_axis", im_axis)):
        if ax.ndim != 1 or ax.size == 0 or np.any(np.diff(ax) <= 0):
            raise ValueError(f"{name} must be non-empty and strictly ascending")
    m = _matrix(op)
    pts = [(j, i) for j in range(im_axis.size) for i in range(re_axis.size)]

    def task(ji):
        j, i = ji
        return resolvent_norm(m, complex(re_axis[i], im_axis[j]), tol)

    workers = workers or default_workers()
    if workers == 1:
        vals = list(map(task, pts))
    else:
        with ThreadPoolExecutor(workers) as ex:
            vals = list(ex.map(task, pts))
    norms = np.array(vals).reshape(im_axis.size, re_axis.size)
    return ResolventGrid(re_axis, im_axis, norms, op if isinstance(op, OperatorSpec) else None)


@dataclass
class TruncationReport:
    L_values: list[float]
    eigenvalues: list[complex]
    differences: list[float]
    tol: float
    converged_value: complex
    adequate_L: float


def _with_radius(spec: OperatorSpec, L: float) -> OperatorSpec:
    # keep h exactly; the radius is rounded to a whole number of cells
    h = spec.grid.h
    n = max(3, int(round(2 * L / h)) - 1)
    half = 0.5 * (n + 1) * h
    return spec.replace(grid=Grid1D(-half, half, n))


def validate_truncation(spec: OperatorSpec, target: complex, L_values: Sequence[float],
                        tol: float = 1e-7, eig_tol: float = 1e-11) -> TruncationReport:
    """Check that the eigenvalue near ``target`` does not move with the truncation radius.

    The spacing of ``spec.grid`` is kept fixed while the symmetric interval
    ``[-L, L]`` varies (each ``L`` is rounded to a whole number of cells).  Passes when every pair of
    successive eigenvalues differs by less than ``tol``; the smallest ``L``
    from which all later values agree is reported.

    Raises
    ------
    ValueError
        Fewer than two radii, a kind not posed on the line, or no convergence.
    """
    if spec.kind not in LINE_KINDS:
        raise ValueError(f"{spec.kind.value} is not posed on the whole line")
    Ls = sorted(float(L) for L in L_values)
    if len(Ls) < 2:
        raise ValueError("truncation check needs at least two radii")
    vals = [locate_eigenvalue(_with_radius(spec, L), target, tol=eig_tol).value for L in Ls]
    diffs = [abs(b - a) for a, b in zip(vals, vals[1:])]
    if diffs[-1] >= tol:
        raise ValueError(f"eigenvalue near {target} not converged in L: differences {diffs}")
    k = len(diffs)
    while k > 0 and diffs[k - 1] < tol:
        k -= 1
    return TruncationReport(Ls, vals, diffs, tol, vals[-1], Ls[k])


@dataclass
class TwoGridCheck:
    values: list[complex]
    spacings: list[float]
    extrapolated: complex
    difference: float
    observed_order: float | None
    passed: bool


def two_grid_check(spec: OperatorSpec, target: complex, rel_tol: float = 1e-3,
                   levels: int = 2, tol: float = 1e-11) -> TwoGridCheck:
    """Discretization gate for one eigenvalue.

    The eigenvalue near ``target`` is tracked through ``levels`` grids, each
    halving the spacing.  It passes when the last change is below
    ``rel_tol * max(1, |value|)``; with three or more levels the observed
    convergence order must also lie within 0.5 of the stencil order.
    Spurious eigenvalues tied to the truncation boundary drift under
    refinement and fail.
    """
    if levels < 2:
        raise ValueError("two_grid_check needs at least two levels")
    vals, hs = [], []
    s, guess = spec, target
    for _ in range(levels):
        guess = locate_eigenvalue(s, guess, tol=tol).value
        vals.append(guess)
        hs.append(s.grid.h)
        s = s.replace(grid=s.grid.refined())
    ext = richardson_extrapolate(list(zip(hs, vals)), spec.order)
    diff = abs(vals[-1] - vals[-2])
    passed = diff < rel_tol * max(1.0, abs(vals[-1]))
    order = None
    if levels >= 3:
        d1 = abs(vals[-2] - vals[-3])
        order = math.log(d1 / diff, hs[-2] / hs[-1]) if diff > 0 and d1 > 0 else math.inf
        passed = passed and (abs(order - spec.order) <= 0.5 or diff < 1e-12)
    return TwoGridCheck(vals, hs, ext, diff, order, bool(passed))
