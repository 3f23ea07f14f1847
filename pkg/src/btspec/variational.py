"""Lowest real eigenvalue of the interval problem and its small-eps limit.

``rho0(a, b)`` is the minimum of ``(||(x w)'||^2 + ||w'||^2) / ||(1 + x^2)^{1/2} w||^2``
over ``w`` vanishing at both ends.  On an interval the lowest real
eigenvalue ``Lambda_1`` of the Dirichlet system behaves like ``rho0 eps^2``.
It is found as the zero of ``nu(Lambda)``, the lowest eigenvalue of the
symmetric matrix ``P_Lambda - Lambda``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .grid import Grid1D, first_difference_matrix, richardson_extrapolate, second_derivative_matrix
from .linalg import BandedLU, ConvergenceError
from .operators import OperatorSpec, airy_threshold, build_interval_plambda, build_limit_atilde
from .spectra import default_workers, locate_eigenvalue

__all__ = [
    "VariationalResult",
    "NuCurve",
    "ScalingReport",
    "AiryEstimate",
    "compute_rho0",
    "higher_eigenvalues",
    "euler_lagrange_residual",
    "nu_value",
    "nu_curve",
    "direct_interval_eigenvalue",
    "verify_scaling_law",
    "auxiliary_airy_estimate",
]


def _rows_csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in r])
    return buf.getvalue()


# --------------------------------------------------------------------------
# rho0


@dataclass
class VariationalResult:
    interval: tuple[float, float]
    rho0: float
    rho0_history: list[tuple[int, float]]
    extrapolants: list[float]
    minimizer: np.ndarray = field(repr=False)
    grid: Grid1D = field(repr=False)
    el_residual: float = 0.0

    @property
    def extrapolant_spread(self) -> float:
        e = self.extrapolants
        return max(e) - min(e) if len(e) > 1 else 0.0

    def to_csv(self) -> str:
        return _rows_csv(["n", "rho0_n"], [(n, float(v)) for n, v in self.rho0_history])

    def to_json(self) -> str:
        return json.dumps({
            "interval": list(self.interval), "rho0": self.rho0,
            "rho0_history": [[n, v] for n, v in self.rho0_history],
            "extrapolants": self.extrapolants, "el_residual": self.el_residual,
            "grid": self.grid.to_dict(), "minimizer": list(map(float, self.minimizer)),
        }, sort_keys=True)


def _lowest_pencil_pair(A, Bw, tol: float = 1e-13, max_iter: int = 500) -> tuple[float, np.ndarray]:
    """Inverse iteration for the lowest eigenpair of ``A w = rho Bw w`` in the Bw inner product."""
    n = A.n
    lu = BandedLU(A)
    bd = Bw.diagonal(0).real
    Ad = A.to_sparse()
    v = np.ones(n)
    rho = math.inf
    floor = 8 * np.finfo(float).eps * A.norm1() / bd.min()
    for _ in range(max_iter):
        y = lu.solve(bd * v).real
        v = y / math.sqrt(y @ (bd * y))
        new = float(v @ (Ad @ v))
        res = np.linalg.norm(Ad @ v - new * bd * v) / np.linalg.norm(bd * v)
        if res <= max(tol * new, floor):
            return new, v
        rho = new
    raise ConvergenceError("inverse iteration for the lowest generalized eigenvalue did not converge",
                           best=rho)


def euler_lagrange_residual(grid: Grid1D, w: np.ndarray, rho: float) -> float:
    """Relative discrete L2 norm of ``-(1+x^2) w'' - 2 x w' - rho (1+x^2) w``.

    Central differences with Dirichlet zeros; relative to ``rho ||(1+x^2) w||``.
    """
    x, h = grid.x, grid.h
    p = np.concatenate([[0.0], w, [0.0]])
    d2 = (p[2:] - 2 * p[1:-1] + p[:-2]) / h ** 2
    d1 = (p[2:] - p[:-2]) / (2 * h)
    r = -(1 + x ** 2) * d2 - 2 * x * d1 - rho * (1 + x ** 2) * w
    return float(np.linalg.norm(r) / (rho * np.linalg.norm((1 + x ** 2) * w)))


def compute_rho0(a: float = 0.0, b: float = 1.0,
                 n_values: Sequence[int] = (511, 1023, 2047)) -> VariationalResult:
    """``rho0`` on ``(a, b)`` with Richardson extrapolation over ``n_values``.

    The minimizer is taken from the finest grid, normalized so that
    ``||(1 + x^2)^{1/2} w|| = 1`` and positive.
    """
    if not a < b:
        raise ValueError("need a < b")
    if len(n_values) < 2:
        raise ValueError("need at least two grids for extrapolation")
    hist, pts = [], []
    w = g = None
    for n in sorted(n_values):
        g = Grid1D(a, b, n)
        A, Bw = build_limit_atilde(OperatorSpec("LimitAtilde", g))
        rho, w = _lowest_pencil_pair(A, Bw)
        hist.append((n, rho))
        pts.append((g.h, rho))
    ext = [richardson_extrapolate(pts[i:i + 2], 2).real for i in range(len(pts) - 1)]
    # discrete normalization h * sum (1 + x^2) w^2 = 1
    w = w / math.sqrt(g.h * np.sum((1 + g.x ** 2) * w ** 2))
    if w[np.argmax(np.abs(w))] < 0:
        w = -w
    el = euler_lagrange_residual(g, w, hist[-1][1])
    return VariationalResult((float(a), float(b)), float(ext[-1]), hist, [float(e) for e in ext],
                             w, g, el)


def higher_eigenvalues(a: float, b: float, n: int, count: int = 5) -> np.ndarray:
    """Lowest ``count`` generalized eigenvalues of the discrete limit pencil (exploratory)."""
    g = Grid1D(a, b, n)
    A, Bw = build_limit_atilde(OperatorSpec("LimitAtilde", g))
    s = 1.0 / np.sqrt(Bw.diagonal(0).real)
    d = A.diagonal(0).real * s * s
    e = A.diagonal(1).real * s[:-1] * s[1:]
    return scipy.linalg.eigh_tridiagonal(d, e, eigvals_only=True, select="i",
                                         select_range=(0, count - 1))


# --------------------------------------------------------------------------
# nu(Lambda)


def nu_value(eps: float, grid: Grid1D, lam: float) -> float:
    """Lowest eigenvalue of the symmetrized ``P_Lambda - Lambda``."""
    P = build_interval_plambda(OperatorSpec("IntervalPLambda", grid, eps=eps, lam=lam))
    P[np.diag_indices_from(P)] -= lam
    return float(scipy.linalg.eigh(P, eigvals_only=True, subset_by_index=[0, 0])[0])


@dataclass
class NuCurve:
    eps: float
    grid: Grid1D
    lambdas: list[float]
    nus: list[float]
    crossing: float | None
    crossing_slope: float | None = None

    def to_csv(self) -> str:
        return _rows_csv(["lambda", "nu"], zip(map(float, self.lambdas), map(float, self.nus)))

    def to_json(self) -> str:
        return json.dumps({"eps": self.eps, "grid": self.grid.to_dict(),
                           "lambdas": list(map(float, self.lambdas)), "nus": list(map(float, self.nus)),
                           "crossing": self.crossing, "crossing_slope": self.crossing_slope},
                          sort_keys=True)


def nu_curve(eps: float, a: float, b: float, lambda_samples: Sequence[float], n: int = 800,
             xtol: float = 1e-12, workers: int | None = None) -> NuCurve:
    """Sample ``nu`` and bisect its first sign change from positive to negative.

    Raises
    ------
    ValueError
        If a sample is not in ``(0, eps^{2/3} |nu_1| / 2)``.
    """
    thr = airy_threshold(eps)
    lams = sorted(float(v) for v in lambda_samples)
    for v in lams:
        if not 0 < v < thr:
            raise ValueError(f"Lambda={v} outside (0, {thr:.6g})")
    g = Grid1D(a, b, n)
    workers = workers or default_workers()
    f = lambda lam: nu_value(eps, g, lam)  # noqa: E731
    if workers > 1 and len(lams) > 1:
        with ThreadPoolExecutor(workers) as ex:
            nus = list(ex.map(f, lams))
    else:
        nus = [f(v) for v in lams]
    crossing = slope = None
    for i in range(len(lams) - 1):
        if nus[i] > 0 >= nus[i + 1]:
            lo, hi = lams[i], lams[i + 1]
            while hi - lo > xtol:
                mid = 0.5 * (lo + hi)
                fm = f(mid)
                if fm > 0:
                    lo = mid
                else:
                    hi = mid
            crossing = 0.5 * (lo + hi)
            slope = (nus[i + 1] - nus[i]) / (lams[i + 1] - lams[i])
            break
    return NuCurve(eps, g, lams, nus, crossing, slope)


def direct_interval_eigenvalue(eps: float, grid: Grid1D, target: float, tol: float = 1e-12) -> complex:
    """Eigenvalue of the full Dirichlet system on ``grid`` nearest ``target``."""
    spec = OperatorSpec("BlochTorreyInterval", grid, eps=eps)
    return locate_eigenvalue(spec, target, tol=tol).value


@dataclass
class ScalingReport:
    a: float
    b: float
    rho0: float
    rows: list[dict]
    r_plus: float
    r_minus: float
    within_bounds: bool
    error_decreasing: bool

    def to_csv(self) -> str:
        return _rows_csv(["eps", "lambda1", "ratio", "rel_err", "direct", "direct_gap"],
                         [(r["eps"], r["lambda1"], r["ratio"], r["rel_err"], r["direct"], r["direct_gap"])
                          for r in self.rows])

    def to_json(self) -> str:
        return json.dumps({k: v for k, v in self.__dict__.items()}, sort_keys=True, default=float)


def scaling_samples(eps: float, a: float, b: float, rho0: float, count: int = 32) -> np.ndarray:
    """Uniform Lambda samples from the Dirichlet floor up to ``2 rho0 eps^2`` (capped below the threshold)."""
    lo = math.pi ** 2 * eps ** 2 / (b - a) ** 2
    hi = min(2 * rho0 * eps ** 2, 0.99 * airy_threshold(eps))
    return np.linspace(lo, hi, count)


def verify_scaling_law(eps_values: Sequence[float], a: float = 0.0, b: float = 1.0,
                       rho0: float | None = None, n: int = 800, samples: int = 32,
                       factor: float = 2.0, workers: int | None = None) -> ScalingReport:
    """``Lambda_1(eps) / eps^2`` against ``rho0`` for decreasing ``eps``.

    For each ``eps`` the crossing of ``nu`` is located and cross-checked
    against the full system on the same grid.  The constants of the upper
    bound ``rho0 (1 + r_+ eps^{2/3})`` and the lower bound
    ``rho0 (1 - r_- eps^2)`` are fitted at the largest ``eps``; later
    values must respect them within ``factor``.

    Raises
    ------
    RuntimeError
        If ``nu`` has no sign change for some ``eps``.
    """
    eps_values = sorted((float(e) for e in eps_values), reverse=True)
    if rho0 is None:
        rho0 = compute_rho0(a, b).rho0
    rows = []
    for e in eps_values:
        curve = nu_curve(e, a, b, scaling_samples(e, a, b, rho0, samples), n=n, workers=workers)
        if curve.crossing is None:
            raise RuntimeError(f"nu has no sign change for eps={e}")
        lam1 = curve.crossing
        direct = direct_interval_eigenvalue(e, curve.grid, lam1)
        ratio = lam1 / e ** 2
        rows.append({"eps": e, "lambda1": lam1, "ratio": ratio, "rel_err": ratio / rho0 - 1.0,
                     "direct": direct.real, "direct_imag": direct.imag,
                     "direct_gap": abs(direct - lam1), "nu_slope": curve.crossing_slope,
                     "above_floor": lam1 > math.pi ** 2 * e ** 2 / (b - a) ** 2})
    first = rows[0]
    r_plus = max((first["ratio"] - rho0) / (rho0 * first["eps"] ** (2 / 3)), 0.0)
    r_minus = max((rho0 - first["ratio"]) / (rho0 * first["eps"] ** 2), 0.0)
    ok = True
    for r in rows:
        up = rho0 * (1 + factor * r_plus * r["eps"] ** (2 / 3))
        down = rho0 * (1 - factor * r_minus * r["eps"] ** 2)
        ok = ok and down <= r["ratio"] <= up
    errs = [abs(r["rel_err"]) for r in rows]
    decreasing = all(y < x for x, y in zip(errs, errs[1:]))
    return ScalingReport(a, b, rho0, rows, r_plus, r_minus, ok, decreasing)


# --------------------------------------------------------------------------
# Airy resolvent applied to x w0


@dataclass
class AiryEstimate:
    eps: float
    lam: float
    ratio_plus: float
    ratio_minus: float

    @property
    def ratio(self) -> float:
        return max(self.ratio_plus, self.ratio_minus)


def _l2(h: float, v: np.ndarray) -> float:
    return math.sqrt(h) * float(np.linalg.norm(v))


def auxiliary_airy_estimate(eps: float, w0: np.ndarray, grid: Grid1D, K: float | None = None,
                            lam: float | None = None) -> AiryEstimate:
    """``(||w~|| + eps^{2/3} ||w~'||) / (eps^{4/3} ||w0||_{H^2})`` for both signs.

    ``w_pm = (L_pm - Lambda)^{-1}(x w0)`` and ``w~_pm = w_pm +/- i w0``.
    ``Lambda`` defaults to ``K eps^2 / 2`` with ``K`` defaulting to twice the
    Rayleigh quotient of ``w0``; it must not exceed ``K eps^2``.
    """
    w0 = np.asarray(w0, dtype=float)
    if w0.shape != (grid.n,):
        raise ValueError("w0 must be sampled at the interior nodes of grid")
    x, h = grid.x, grid.h
    G = first_difference_matrix(grid, grid.x_full)
    H = first_difference_matrix(grid)
    norm_b = float(np.sum((1 + x ** 2) * w0 ** 2))
    if K is None:
        K = 2 * (float(np.sum((G @ w0) ** 2 + (H @ w0) ** 2)) / norm_b if norm_b > 0 else 1.0)
    lam = 0.5 * K * eps ** 2 if lam is None else float(lam)
    if lam > K * eps ** 2:
        raise ValueError("Lambda must not exceed K eps^2")
    D2 = second_derivative_matrix(grid, 2)
    h2 = math.sqrt(_l2(h, w0) ** 2 + _l2(h, H @ w0) ** 2 + _l2(h, D2 @ w0) ** 2)
    ratios = []
    for sgn in (1, -1):
        L = (D2 * eps ** 2).add_diagonal(sgn * 1j * x - lam)
        wt = BandedLU(L).solve((x * w0).astype(np.complex128)) + sgn * 1j * w0
        num = _l2(h, wt) + eps ** (2 / 3) * _l2(h, H @ wt)
        ratios.append(num / (eps ** (4 / 3) * h2) if h2 > 0 else 0.0)
    return AiryEstimate(eps, lam, ratios[0], ratios[1])
