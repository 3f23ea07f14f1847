"""Asymptotic eigenvalue predictions and bound-verification experiments.

Notation: ``kappa0(n, eps) = i + (2n-1)/2 (1+i) eps`` predicts the n-th
eigenvalue of the line system near ``i``; ``mu_k0`` and ``mu_k1`` are the
first two coefficients of the expansion ``Lambda = i + eps mu_k0 + eps^2 mu_k1``.

``mu_k1`` is available in two forms:

``nominal``
    ``int([w^2 - mu_k0]^2 - 1) f^2 / (2i int f^2)``; gives ``3/16 + i/2``
    for ``k = 1``.
``rederived``
    ``-int([w^2 - mu_k0]^2 - i) f^2 / (2i int f^2)``; the next-order
    solvability condition when the singular potential term is expanded at
    ``w = 0`` with ``Phi(0) = -i``.  Gives ``5/16`` for ``k = 1``, which is
    what the computed eigenvalues converge to (see the tests).

Here ``f = f_k0`` solves ``(-d^2 - 2i w^2 + 2i mu_k0) f = 0``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse.linalg

from .grid import Grid1D, default_truncation_radius, symmetric_grid
from .linalg import BandedLU, SingularMatrixError, shift_invert_eigenvalue
from .operators import OperatorSpec, build, build_scalar
from .spectra import default_workers, locate_eigenvalue, resolvent_norm

__all__ = [
    "mu_k0",
    "kappa0",
    "mu_k1",
    "AsymptoticPrediction",
    "line_spec",
    "verify_eigenvalue_asymptotics",
    "AsymptoticsReport",
    "in_resolvent_domain",
    "resolvent_bound_rhs",
    "verify_resolvent_bound",
    "ResolventBoundReport",
    "verify_strip_estimate",
    "StripReport",
    "strip_samples",
    "frozen_constant_check",
    "fit_slope",
    "sample_generator",
]

E_IPI4 = complex(math.cos(math.pi / 4), math.sin(math.pi / 4))
FORMS = ("nominal", "rederived")


def mu_k0(k: int) -> complex:
    """``(2k-1)/sqrt(2) e^{i pi/4}``, which equals ``(2k-1)(1+i)/2``."""
    if int(k) != k or k < 1:
        raise ValueError(f"mode index must be a positive integer, got {k}")
    return (2 * k - 1) * (1 + 1j) / 2


def kappa0(n: int, eps: float) -> complex:
    return 1j + eps * mu_k0(n)


def _form_constants(form: str) -> tuple[float, complex]:
    if form == "nominal":
        return 1.0, -1.0
    if form == "rederived":
        return -1.0, -1j
    raise ValueError(f"form must be one of {FORMS}, got {form!r}")


def _closed_form_k1(form: str) -> complex:
    # Gaussian moments of exp(-alpha w^2 / 2), alpha = 1 - i:
    # <w^2> = <1>/(2 alpha), <w^4> = 3 <1>/(4 alpha^2)
    alpha = 1 - 1j
    m0 = mu_k0(1)
    quad = 3 / (4 * alpha ** 2) - 2 * m0 / (2 * alpha) + m0 ** 2
    sign, c = _form_constants(form)
    return sign * (quad + c) / 2j


def harmonic_eigenfunction(k: int, L: float = 12.0, n: int = 3200, order: int = 4,
                           max_residual: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and eigenfunction of the discrete complex harmonic oscillator for mode ``k``.

    Raises
    ------
    ValueError
        If the discrete eigenpair residual exceeds ``max_residual``.
    """
    g = Grid1D(-L, L, n)
    h_op = build_scalar(OperatorSpec("ComplexHarmonic", g, order=order))
    pair = shift_invert_eigenvalue(h_op, -2j * mu_k0(k), tol=1e-12)
    if pair.shift_is_eigenvalue or pair.residual > max_residual:
        raise ValueError(f"eigenfunction residual {pair.residual:.3e} exceeds {max_residual:g}")
    return g.x, pair.vector


def mu_k1(k: int, method: str = "quadrature", pairing: str = "bilinear",
          form: str = "nominal", L: float = 12.0, n: int = 3200, order: int = 4) -> complex:
    """Second expansion coefficient of the k-th eigenvalue.

    Parameters
    ----------
    method : {"quadrature", "closed_form_k1"}
        Trapezoid quadrature with the discrete eigenfunction, or Gaussian
        moments (``k = 1`` only).
    pairing : {"bilinear", "sesquilinear"}
        ``f**2`` (correct) or ``|f|**2`` (kept as a negative control).
    form : {"nominal", "rederived"}
        See the module docstring.
    """
    sign, c = _form_constants(form)
    if method == "closed_form_k1":
        if k != 1:
            raise ValueError("the closed form is only available for k = 1")
        if pairing != "bilinear":
            raise ValueError("the closed form uses the bilinear pairing")
        return _closed_form_k1(form)
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    w, f = harmonic_eigenfunction(k, L, n, order)
    if pairing == "bilinear":
        dens = f * f
    elif pairing == "sesquilinear":
        dens = np.abs(f) ** 2
    else:
        raise ValueError(f"unknown pairing {pairing!r}")
    m0 = mu_k0(k)
    # the Dirichlet ends contribute zero, so the trapezoid rule is h * sum
    num = np.sum(((w ** 2 - m0) ** 2 + c) * dens)
    den = np.sum(dens)
    return complex(sign * num / (2j * den))


@dataclass(frozen=True)
class AsymptoticPrediction:
    k: int
    mu0: complex
    mu1: complex

    @classmethod
    def for_mode(cls, k: int, form: str = "nominal", method: str | None = None) -> "AsymptoticPrediction":
        method = method or ("closed_form_k1" if k == 1 else "quadrature")
        return cls(k, mu_k0(k), mu_k1(k, method=method, form=form))

    def kappa0(self, eps: float) -> complex:
        return 1j + eps * self.mu0

    def kappa_refined(self, eps: float) -> complex:
        return 1j + eps * self.mu0 + eps ** 2 * self.mu1


# --------------------------------------------------------------------------
# helpers shared by the experiments


def fit_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    lx, ly = np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float))
    if lx.size < 2:
        return math.nan
    return float(np.polyfit(lx, ly, 1)[0])


def frozen_constant_check(max_ratios: Sequence[float], factor: float = 2.0) -> tuple[float, bool]:
    """Freeze ``C`` at the first entry; pass if no later entry exceeds ``factor * C``."""
    if not max_ratios:
        raise ValueError("need at least one ratio")
    C = float(max_ratios[0])
    return C, all(r <= factor * C for r in max_ratios[1:])


def sample_generator(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream for draw number ``index`` of a run seeded by ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index)])))


def _map(fn: Callable, items: list, workers: int | None):
    workers = workers or default_workers()
    if workers == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(workers) as ex:
        return list(ex.map(fn, items))


def _c(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def _csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([f"{r[c]:.17g}" if isinstance(r[c], float) else r[c] for c in columns])
    return buf.getvalue()


# --------------------------------------------------------------------------
# eigenvalue asymptotics


def line_spec(eps: float, h_factor: float = 0.03, L: float | None = None, order: int = 4,
              target: complex = 1j) -> OperatorSpec:
    """Line-system discretization used by the asymptotics experiments.

    The eigenfunctions near ``i`` have width ``sqrt(eps)``, so the spacing is
    ``h_factor * sqrt(eps)``; the radius defaults to the truncation rule.
    """
    L = default_truncation_radius(eps, target) if L is None else L
    return OperatorSpec("BlochTorreyLine", symmetric_grid(L, h_factor * math.sqrt(eps)),
                        eps=eps, order=order)


@dataclass
class AsymptoticsReport:
    rows: list[dict]
    slopes: dict[int, float]
    refined_slopes: dict[int, float]
    refined_slopes_rederived: dict[int, float]
    mu1: dict[int, complex]
    mu1_rederived: dict[int, complex]

    def passes(self, window=(1.7, 2.3), refined_window=(2.6, 3.4)) -> bool:
        ok = all(window[0] <= s <= window[1] for s in self.slopes.values())
        if 1 in self.refined_slopes:
            ok = ok and refined_window[0] <= self.refined_slopes[1] <= refined_window[1]
        return ok

    def to_json(self) -> str:
        rows = [{k: (_c(v) if isinstance(v, complex) else v) for k, v in r.items()} for r in self.rows]
        return json.dumps({
            "rows": rows,
            "slopes": {str(k): v for k, v in self.slopes.items()},
            "refined_slopes": {str(k): v for k, v in self.refined_slopes.items()},
            "refined_slopes_rederived": {str(k): v for k, v in self.refined_slopes_rederived.items()},
            "mu1": {str(k): _c(v) for k, v in self.mu1.items()},
            "mu1_rederived": {str(k): _c(v) for k, v in self.mu1_rederived.items()},
        }, sort_keys=True, indent=1)

    def to_csv(self) -> str:
        rows = [dict(r, slope=self.slopes[r["n"]], refined_slope=self.refined_slopes[r["n"]],
                     refined_slope_rederived=self.refined_slopes_rederived[r["n"]])
                for r in self.rows]
        return _csv(rows, ["eps", "n", "err", "slope", "refined_err", "refined_slope",
                           "refined_err_rederived", "refined_slope_rederived"])


def verify_eigenvalue_asymptotics(eps_values: Sequence[float], N: int,
                                  mu1: complex | None = None, h_factor: float = 0.03,
                                  order: int = 4, tol: float = 1e-11,
                                  workers: int | None = None) -> AsymptoticsReport:
    """Locate ``kappa_n(eps)`` for ``n <= N`` and fit error slopes.

    ``mu1`` overrides the nominal coefficient for ``n = 1``; for ``n >= 2``
    the nominal coefficient is computed by quadrature.  Errors against
    the re-derived coefficient are reported alongside.

    Raises
    ------
    RuntimeError
        Naming ``(n, eps)`` when a location fails.
    """
    eps_values = [float(e) for e in eps_values]
    if N < 1:
        return AsymptoticsReport([], {}, {}, {}, {}, {})
    mus, mus_alt = {}, {}
    for k in range(1, N + 1):
        method = "closed_form_k1" if k == 1 else "quadrature"
        mus[k] = mu_k1(k, method=method) if (k != 1 or mu1 is None) else complex(mu1)
        mus_alt[k] = mu_k1(k, method=method, form="rederived")

    jobs = [(k, e) for k in range(1, N + 1) for e in eps_values]

    def locate(job):
        k, e = job
        try:
            return locate_eigenvalue(line_spec(e, h_factor, order=order), kappa0(k, e), tol=tol).value
        except Exception as exc:  # noqa: BLE001 - re-raised with context
            raise RuntimeError(f"eigenvalue location failed for n={k}, eps={e}: {exc}") from exc

    values = _map(locate, jobs, workers)
    rows = []
    for (k, e), kap in zip(jobs, values):
        base = 1j + e * mu_k0(k)
        rows.append({
            "eps": e, "n": k, "kappa": kap, "kappa0": base,
            "err": abs(kap - base),
            "refined_err": abs(kap - base - e ** 2 * mus[k]),
            "refined_err_rederived": abs(kap - base - e ** 2 * mus_alt[k]),
        })
    slopes, rs, rs_alt = {}, {}, {}
    for k in range(1, N + 1):
        sub = [r for r in rows if r["n"] == k]
        es = [r["eps"] for r in sub]
        slopes[k] = fit_slope(es, [r["err"] for r in sub])
        rs[k] = fit_slope(es, [r["refined_err"] for r in sub])
        rs_alt[k] = fit_slope(es, [r["refined_err_rederived"] for r in sub])
    return AsymptoticsReport(rows, slopes, rs, rs_alt, mus, mus_alt)


# --------------------------------------------------------------------------
# resolvent bound on the region away from the predicted eigenvalues


def n_rho(rho: float) -> int:
    """Number of excluded modes, the integer part of ``(2 rho + 1) / 2``."""
    return int(math.floor((2 * rho + 1) / 2))


def in_resolvent_domain(lam: complex, eps: float, rho: float, rhat: float) -> bool:
    """Membership in the region where the resolvent bound is asserted."""
    lam = complex(lam)
    if lam.imag == 0 or lam.real > rho * eps:
        return False
    r = rhat * eps ** 2
    for k in range(1, n_rho(rho) + 1):
        c = kappa0(k, eps)
        if abs(lam - c) < r or abs(lam - c.conjugate()) < r:
            return False
    return True


def resolvent_bound_rhs(lam: complex, eps: float, rhat: float) -> float:
    """``1 + eps^{2/3}/|Im lam|^2 + 1/(rhat eps^{5/3})``."""
    return 1.0 + eps ** (2 / 3) / complex(lam).imag ** 2 + 1.0 / (rhat * eps ** (5 / 3))


@dataclass
class ResolventBoundReport:
    eps: float
    rho: float
    rhat: float
    samples: list[dict]
    max_ratio: float
    accretive_ok: bool
    rejected: int

    def to_json(self) -> str:
        d = asdict(self)
        d["samples"] = [{k: (_c(v) if isinstance(v, complex) else v) for k, v in s.items()}
                        for s in self.samples]
        return json.dumps(d, sort_keys=True, indent=1)

    def to_csv(self) -> str:
        rows = [dict(s, re=s["lam"].real, im=s["lam"].imag) for s in self.samples]
        return _csv(rows, ["index", "re", "im", "norm", "rhs", "ratio"])


def verify_resolvent_bound(eps: float, rho: float = 1.0, rhat: float = 10.0, samples: int = 200,
                           seed: int = 0, re_range: tuple[float, float] | None = None,
                           im_range: tuple[float, float] = (-1.5, 1.5), L: float = 8.0,
                           n: int = 2000, tol: float = 1e-6,
                           workers: int | None = None) -> ResolventBoundReport:
    """Sample the resolvent of the line system against its predicted bound.

    Points are drawn uniformly from ``re_range x im_range`` (the real range
    defaults to ``[-0.5, rho * eps]``) and rejected when outside the domain
    of the bound; at most ``100 * samples`` draws are made.  For samples
    with negative real part the accretive bound ``1/|Re lam|`` is also
    checked with 5% slack.
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    if not 1.0 < rhat < 1.0 / (math.sqrt(2) * eps):
        raise ValueError(f"rhat must lie in (1, 1/(sqrt(2) eps)) = (1, {1 / (math.sqrt(2) * eps):.4g})")
    lo, hi = re_range if re_range is not None else (-0.5, rho * eps)
    hi = min(hi, rho * eps)
    rng = sample_generator(seed, 0)
    pts: list[complex] = []
    draws = 0
    while len(pts) < samples:
        if draws >= 100 * samples:
            raise RuntimeError(f"domain filter rejected too many draws ({draws})")
        draws += 1
        lam = complex(rng.uniform(lo, hi), rng.uniform(*im_range))
        if in_resolvent_domain(lam, eps, rho, rhat):
            pts.append(lam)
    m = build(OperatorSpec("BlochTorreyLine", Grid1D(-L, L, n), eps=eps))
    norms = _map(lambda lam: resolvent_norm(m, lam, tol), pts, workers)
    rows, acc_ok = [], True
    for i, (lam, nv) in enumerate(zip(pts, norms)):
        rhs = resolvent_bound_rhs(lam, eps, rhat)
        row = {"index": i, "lam": lam, "norm": nv, "rhs": rhs, "ratio": nv / rhs}
        if lam.real < 0:
            row["accretive_ok"] = bool(nv <= 1.05 / abs(lam.real))
            acc_ok = acc_ok and row["accretive_ok"]
        rows.append(row)
    return ResolventBoundReport(eps, rho, rhat, rows, max(r["ratio"] for r in rows), acc_ok,
                                draws - samples)


# --------------------------------------------------------------------------
# strip estimate in the rescaled variables


@dataclass
class StripReport:
    eps: float
    delta: float
    samples: list[dict]
    max_ratio_sum: float
    max_ratio_sum_random: float
    max_ratio_resolvent: float
    accretive_ok: bool

    def to_json(self) -> str:
        d = asdict(self)
        d["samples"] = [{k: (_c(v) if isinstance(v, complex) else v) for k, v in s.items()}
                        for s in self.samples]
        return json.dumps(d, sort_keys=True, indent=1)

    def to_csv(self) -> str:
        rows = [dict(s, re=s["lam"].real, im=s["lam"].imag) for s in self.samples]
        return _csv(rows, ["index", "re", "im", "ratio_sum", "ratio_sum_random", "ratio_resolvent"])


def strip_spec(eps: float, h: float = 0.05) -> OperatorSpec:
    """Rotated system in the rescaled variables.

    Unit kinetic coefficient, potentials ``+/- i x`` and coupling
    ``eps_c^{-1/2}/sqrt(2)`` with ``eps_c = eps^{4/3}``.  The window
    ``[-X, X]`` with ``X = 2 eps_c^{-1/2} + 12`` covers the turning points of
    every sampled spectral parameter.
    """
    s = eps ** (-2 / 3)
    return OperatorSpec("RotatedBlochTorrey", symmetric_grid(2 * s + 12, h), eps=1.0, b0=s)


def strip_rhs(lam: complex, eps_c: float) -> tuple[float, float]:
    """Right-hand sides of the ``u1 + u2`` estimate and of the full resolvent estimate."""
    lam = complex(lam)
    li = abs(lam.imag)
    fac = 1.0 + (1.0 + math.sqrt(eps_c) * math.sqrt(max(lam.real, 0.0))) / li
    return math.sqrt(eps_c) * fac, (1.0 + 1.0 / li) * fac


def _sum_component_norm(lu: BandedLU, N: int, tol: float) -> float:
    """Norm of ``f -> u1 + u2`` with ``u = (B - lam)^{-1} f``, by Lanczos on ``S S^H``."""
    n = N // 3

    def mv(y):
        z = np.zeros(N, dtype=np.complex128)
        z[0::3] = y
        z[1::3] = y
        w = lu.solve(lu.solve(z, trans="C"))
        return w[0::3] + w[1::3]

    op = scipy.sparse.linalg.LinearOperator((n, n), matvec=mv, dtype=np.complex128)
    top = scipy.sparse.linalg.eigsh(op, k=1, which="LM", tol=tol, v0=np.ones(n, np.complex128),
                                    return_eigenvectors=False)[0]
    return float(np.sqrt(max(top.real, 0.0)))


def strip_samples(eps: float, delta: float, samples: int, seed: int,
                  re_range: tuple[float, float] | None = None) -> list[complex]:
    """Latin-hypercube design over ``Re lam`` and ``|Im lam|`` with random signs of ``Im lam``."""
    eps_c = eps ** (4 / 3)
    im_max = math.sqrt(1 - 2 * delta ** 4) * eps_c ** -0.5
    lo, hi = re_range if re_range is not None else (-2.0, eps_c ** -0.5)
    rng = sample_generator(seed, 0)
    pr, pi = rng.permutation(samples), rng.permutation(samples)
    u = rng.random((samples, 2))
    signs = rng.choice((-1.0, 1.0), samples)
    # 1 - u keeps |Im lam| strictly positive
    re = lo + (hi - lo) * (pr + u[:, 0]) / samples
    im = im_max * (pi + 1.0 - u[:, 1]) / samples
    return [complex(a, b * sg) for a, b, sg in zip(re, im, signs)]


def verify_strip_estimate(eps: float, delta: float = 0.3, samples: int = 100, seed: int = 0,
                          re_range: tuple[float, float] | None = None, h: float = 0.05,
                          points: Sequence[complex] | None = None, tol: float = 1e-6,
                          workers: int | None = None) -> StripReport:
    """Sample the strip ``0 < |Im lam| <= (1 - 2 delta^4)^{1/2} eps_c^{-1/2}``.

    ``eps`` is the original small parameter and ``eps_c = eps^{4/3}``.
    Spectral parameters come from :func:`strip_samples` (``Re lam`` in
    ``[-2, eps_c^{-1/2}]`` by default) or from ``points``.  Per sample:

    * ``ratio_sum``: ``sup_f ||u1 + u2|| / ||f||`` over its bound,
    * ``ratio_sum_random``: the same for one random unit ``f``,
    * ``ratio_resolvent``: ``||(B - lam)^{-1}||`` over its bound,

    with constants omitted from the bounds.  Samples with ``Re lam < 0``
    are also checked against ``||u|| <= ||f|| / |Re lam|`` with 5% slack.
    A drawn sample whose solve is singular is moved to a fresh point of
    its stratum.
    """
    if not 0 < delta <= 0.5:
        raise ValueError("delta must lie in (0, 1/2]")
    eps_c = eps ** (4 / 3)
    im_max = math.sqrt(1 - 2 * delta ** 4) * eps_c ** -0.5
    if points is not None:
        pts = [complex(p) for p in points]
        for p in pts:
            if not 0 < abs(p.imag) <= im_max:
                raise ValueError(f"sample {p} violates 0 < |Im lam| <= {im_max:.6g}")
    else:
        if samples < 1:
            raise ValueError("samples must be positive")
        pts = strip_samples(eps, delta, samples, seed, re_range)
    m = build(strip_spec(eps, h))
    N = m.shape[0]
    cell = (0.0 if points is not None else
            ((re_range[1] - re_range[0]) if re_range else (eps_c ** -0.5 + 2.0)) / samples)

    def one(i):
        lam = pts[i]
        for attempt in range(101):
            try:
                lu = BandedLU(m.shifted(lam))
                break
            except SingularMatrixError:
                if points is not None or attempt == 100:
                    raise
                lam = pts[i] + cell * (sample_generator(seed, 1 + i + samples * attempt).random() - 0.5)
        frng = sample_generator(seed + 1, i)
        f = frng.standard_normal(N) + 1j * frng.standard_normal(N)
        f /= np.linalg.norm(f)
        u = lu.solve(f)
        rhs_sum, rhs_res = strip_rhs(lam, eps_c)
        sup_sum = _sum_component_norm(lu, N, tol)
        rn = resolvent_norm(m, lam, tol)
        row = {"index": i, "lam": lam, "sum_norm": sup_sum, "resolvent": rn,
               "ratio_sum": sup_sum / rhs_sum,
               "ratio_sum_random": float(np.linalg.norm(u[0::3] + u[1::3])) / rhs_sum,
               "ratio_resolvent": rn / rhs_res}
        if lam.real < 0:
            row["accretive_ok"] = bool(np.linalg.norm(u) <= 1.05 / abs(lam.real))
        return row

    rows = _map(one, list(range(len(pts))), workers)
    return StripReport(eps, delta, rows, max(r["ratio_sum"] for r in rows),
                       max(r["ratio_sum_random"] for r in rows),
                       max(r["ratio_resolvent"] for r in rows),
                       all(r.get("accretive_ok", True) for r in rows))
