"""Eigenvalues of the line system through the quartic operator ``M_lam``.

In the rescaled variables (``eps_c = eps^{4/3}``, ``lam = eps^{-2/3} Lambda``)
and after Fourier transform, the system reduces to a scalar equation for
``u_s = u_1 + u_2``.  The substitution ``u_s = (w^2 - lam)^{1/2} v`` turns
it into ``M_lam v = 0``, so ``Lambda`` is an eigenvalue of the system exactly
when 0 is an eigenvalue of ``M_lam``.  This module locates such ``lam`` by
secant iteration and rebuilds the Fourier-side components from ``v``.
The square root is the principal branch (cut along the negative reals).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import Grid1D, symmetric_grid
from .linalg import ConvergenceError, shift_invert_eigenvalue
from .operators import OperatorSpec, build_scalar

__all__ = [
    "ReductionProbe",
    "probe_mlambda",
    "find_lambda_root",
    "reconstruct_components",
    "system_residual",
    "energy_identity_defect",
    "default_omega_grid",
    "RootNotFound",
]


class RootNotFound(RuntimeError):
    """Secant iteration failed to reach a zero of the probe."""


@dataclass
class ReductionProbe:
    lam: complex
    eps_check: float
    grid: Grid1D
    smallest_eig: complex
    residual: float
    vector: np.ndarray | None = field(default=None, repr=False)


def default_omega_grid(lam: complex, h: float = 0.004) -> Grid1D:
    """Symmetric frequency grid wide enough for the wells of ``(w^2 - lam)^2``."""
    return symmetric_grid(max(8.0, 2.0 * math.sqrt(abs(lam)) + 4.0), h)


def _check_lambda(lam: complex) -> complex:
    lam = complex(lam)
    if lam.imag == 0 and lam.real >= 0:
        raise ValueError(f"lambda={lam} lies on [0, inf), where the reduction is undefined")
    return lam


def probe_mlambda(lam: complex, eps_check: float, grid: Grid1D | None = None,
                  order: int = 2, tol: float = 1e-10, max_iter: int = 2000) -> ReductionProbe:
    """Eigenvalue of ``M_lam`` nearest 0, with its residual and eigenvector.

    Far from a root the two lowest eigenvalues can have a ratio close to 1,
    so inverse iteration at shift 0 gets a generous iteration cap.
    """
    lam = _check_lambda(lam)
    grid = grid or default_omega_grid(lam)
    m = build_scalar(OperatorSpec("QuarticM", grid, lam=lam, eps=eps_check, order=order))
    pair = shift_invert_eigenvalue(m, 0.0, tol=tol, max_iter=max_iter)
    return ReductionProbe(lam, eps_check, grid, pair.value, pair.residual, pair.vector)


def find_lambda_root(start: complex, eps_check: float, tol: float = 1e-8,
                     grid: Grid1D | None = None, max_iter: int = 50,
                     radius: float | None = None, order: int = 2) -> complex:
    """Secant iteration on ``lam -> (eigenvalue of M_lam nearest 0)``.

    The grid is fixed at the start point so every probe sees the same
    discretization.  Iterates must stay within ``radius`` of ``start``
    (default ``max(1, |start|) / 4``).

    Raises
    ------
    RootNotFound
        After ``max_iter`` iterations, on leaving the disc, or when an
        iterate reaches ``[0, inf)``.
    """
    z0 = _check_lambda(start)
    grid = grid or default_omega_grid(z0)
    radius = 0.25 * max(1.0, abs(z0)) if radius is None else radius

    def probe(z):
        return probe_mlambda(z, eps_check, grid, order).smallest_eig

    f0 = probe(z0)
    if abs(f0) < tol:
        return z0
    z1 = z0 + 1e-3 * max(1.0, abs(z0)) * (1 + 1j) / math.sqrt(2)
    f1 = probe(z1)
    for _ in range(max_iter):
        if abs(f1) < tol:
            return z1
        if f1 == f0:
            break
        z2 = z1 - f1 * (z1 - z0) / (f1 - f0)
        if abs(z2 - complex(start)) > radius:
            raise RootNotFound(f"secant left the disc |lam - {start}| <= {radius:g} at {z2}")
        if z2.imag == 0 and z2.real >= 0:
            raise RootNotFound(f"secant reached the positive real axis at {z2}")
        z0, f0 = z1, f1
        try:
            z1, f1 = z2, probe(z2)
        except ConvergenceError as exc:
            raise RootNotFound(f"probe failed at {z2}: {exc}") from exc
    raise RootNotFound(f"no root within {max_iter} secant iterations from {start} "
                       f"(last |eig| = {abs(f1):.3e})")


def _derivative(u: np.ndarray, h: float) -> np.ndarray:
    # central differences with the Dirichlet zeros at both ends
    p = np.concatenate([[0], u, [0]])
    return (p[2:] - p[:-2]) / (2 * h)


def reconstruct_components(lam: complex, v: np.ndarray, grid: Grid1D,
                           eps_check: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fourier-side ``(u_s, u_d, u_3)`` from a kernel function ``v`` of ``M_lam``.

    ``u_s = (w^2 - lam)^{1/2} v``, ``u_d = u_s' / (w^2 - lam)`` and
    ``u_3 = eps_check^{-1/2} u_s / (sqrt(2) (w^2 - lam))``.
    """
    lam = _check_lambda(lam)
    w = grid.x
    p = w ** 2 - lam
    us = np.sqrt(p) * np.asarray(v, dtype=np.complex128)
    ud = _derivative(us, grid.h) / p
    u3 = us / (math.sqrt(2 * eps_check) * p)
    return us, ud, u3


def system_residual(lam: complex, comps, grid: Grid1D, eps_check: float) -> float:
    """Relative discrete L2 residual of the first-order Fourier system with zero data."""
    us, ud, u3 = comps
    w, h = grid.x, grid.h
    p = w ** 2 - complex(lam)
    c = 1.0 / math.sqrt(2 * eps_check)
    u1, u2 = (us + ud) / 2, (us - ud) / 2
    ra = p * u1 - _derivative(u1, h) + c * u3
    rb = p * u2 + _derivative(u2, h) + c * u3
    rc = p * u3 - c * (u1 + u2)
    num = math.sqrt(sum(np.vdot(r, r).real for r in (ra, rb, rc)))
    den = math.sqrt(sum(np.vdot(p * u, p * u).real for u in (u1, u2, u3)))
    return num / den if den > 0 else 0.0


def energy_identity_defect(lam: complex, us: np.ndarray, grid: Grid1D, eps_check: float) -> float:
    """Relative defect of ``||u_s'/p||^2 + eps_c^{-1} ||u_s/p||^2 = ||u_s||^2``, ``p = w^2 - lam``."""
    p = grid.x ** 2 - complex(lam)
    dus = _derivative(us, grid.h)
    lhs = np.linalg.norm(dus / p) ** 2 + np.linalg.norm(us / p) ** 2 / eps_check
    rhs = np.linalg.norm(us) ** 2
    return float(abs(lhs - rhs) / rhs) if rhs > 0 else 0.0
