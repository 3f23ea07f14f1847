"""Uniform Dirichlet grids, finite-difference stencils and Richardson extrapolation.

Only interior nodes are stored; the two boundary values are zero and are
eliminated from every stencil, so all operator matrices stay square.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .linalg import BandedMatrix

__all__ = [
    "Grid1D",
    "second_derivative_matrix",
    "first_difference_matrix",
    "richardson_extrapolate",
    "default_truncation_radius",
    "symmetric_grid",
]

# one-sided third-order closure for u'' at the node next to a Dirichlet end,
# coefficients of (u0, u1, u2, u3, u4) with u0 the boundary value
_CLOSURE_4 = np.array([11.0, -20.0, 6.0, 4.0, -1.0]) / 12.0
_CENTRAL_4 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on ``(a, b)`` with ``n`` interior nodes.

    The spacing is ``h = (b - a) / (n + 1)`` and the nodes are
    ``a + i*h`` for ``i = 1..n``.
    """

    a: float
    b: float
    n: int

    def __post_init__(self):
        a, b = float(self.a), float(self.b)
        if not (np.isfinite(a) and np.isfinite(b)) or not a < b:
            raise ValueError(f"grid needs a < b, got a={self.a}, b={self.b}")
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"grid needs at least 3 interior nodes, got n={self.n}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        return (self.b - self.a) / (self.n + 1)

    @property
    def x(self) -> np.ndarray:
        """Interior nodes."""
        return self.a + self.h * np.arange(1, self.n + 1)

    @property
    def x_full(self) -> np.ndarray:
        """Nodes including both boundary points."""
        return self.a + self.h * np.arange(0, self.n + 2)

    @property
    def length(self) -> float:
        return self.b - self.a

    def refined(self) -> "Grid1D":
        """Grid with half the spacing on the same interval."""
        return Grid1D(self.a, self.b, 2 * self.n + 1)

    def with_interval(self, a: float, b: float) -> "Grid1D":
        """Same spacing target on a different interval (node count rounded)."""
        n = max(3, int(round((b - a) / self.h)) - 1)
        return Grid1D(a, b, n)

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "n": self.n}

    @classmethod
    def from_dict(cls, d: dict) -> "Grid1D":
        extra = set(d) - {"a", "b", "n"}
        if extra:
            raise ValueError(f"unknown grid fields: {sorted(extra)}")
        return cls(d["a"], d["b"], d["n"])


def symmetric_grid(L: float, h: float) -> Grid1D:
    """Grid on ``[-L, L]`` whose spacing does not exceed ``h``.

    The node count is chosen odd so that ``x = 0`` is a node.
    """
    n = int(np.ceil(2 * L / h)) - 1
    if n % 2 == 0:
        n += 1
    return Grid1D(-L, L, max(n, 3))


def default_truncation_radius(eps: float, target: complex = 0.0) -> float:
    """Truncation radius for problems posed on the whole line."""
    return max(8.0, 6.0 * eps ** (2.0 / 3.0) * abs(target) ** 0.5 + 8.0)


def second_derivative_matrix(grid: Grid1D, order: int = 2) -> BandedMatrix:
    """Matrix of ``-d^2/dx^2`` with homogeneous Dirichlet conditions.

    Parameters
    ----------
    grid : Grid1D
    order : {2, 4}
        2 gives the symmetric three-point stencil.  4 uses the five-point
        interior stencil with a third-order one-sided closure at the first
        and last interior node (upper/lower bandwidth 3).

    Returns
    -------
    BandedMatrix
        Real banded matrix; positive definite for ``order=2``.
    """
    n, h2 = grid.n, grid.h ** 2
    if order == 2:
        off = -np.ones(n - 1) / h2
        return BandedMatrix.from_diagonals({-1: off, 0: 2.0 * np.ones(n) / h2, 1: off}, n)
    if order != 4:
        raise ValueError(f"order must be 2 or 4, got {order}")
    if n < 5:
        raise ValueError("order 4 needs at least 5 interior nodes")

    diags = {k: np.zeros(n - abs(k)) for k in range(-3, 4)}
    for k, c in zip(range(-2, 3), _CENTRAL_4):
        diags[k][:] = -c / h2
    # first row: nodes 1..4 with the boundary coefficient dropped
    for j, c in enumerate(_CLOSURE_4[1:]):
        diags[j][0] = -c / h2
    # last row, mirrored
    for j, c in enumerate(_CLOSURE_4[1:]):
        diags[-j][n - 1 - j] = -c / h2
    return BandedMatrix.from_diagonals(diags, n)


def first_difference_matrix(grid: Grid1D, weights: np.ndarray | None = None) -> np.ndarray:
    """Forward differences onto the ``n + 1`` cell midpoints.

    Returns the ``(n+1) x n`` matrix of ``w -> (c w)'`` where ``c`` holds
    ``weights`` sampled at all ``n + 2`` nodes (default ones), with zero
    boundary values for ``w``.
    """
    n, h = grid.n, grid.h
    c = np.ones(n + 2) if weights is None else np.asarray(weights, dtype=float)
    if c.shape != (n + 2,):
        raise ValueError("weights must be sampled on the n + 2 full nodes")
    G = np.zeros((n + 1, n))
    idx = np.arange(n)
    G[idx, idx] = c[1:-1] / h
    G[idx + 1, idx] = -c[1:-1] / h
    return G


def richardson_extrapolate(values: Iterable[tuple[float, complex]], order: int = 2) -> complex:
    """Eliminate the leading ``O(h**order)`` error from a refinement sequence.

    Pairs are combined consecutively; the extrapolant of the last two
    entries is returned.
    """
    pts: Sequence[tuple[float, complex]] = list(values)
    if len(pts) < 2:
        raise ValueError("Richardson extrapolation needs at least two entries")
    if order < 1:
        raise ValueError("order must be positive")
    hs = [float(h) for h, _ in pts]
    if len(set(hs)) != len(hs):
        raise ValueError("Richardson extrapolation needs distinct spacings")
    (h1, v1), (h2, v2) = pts[-2], pts[-1]
    r = (h1 / h2) ** order
    return (r * v2 - v1) / (r - 1.0)


def richardson_table(values: Sequence[tuple[float, complex]], order: int = 2) -> list[complex]:
    """All consecutive pairwise extrapolants of a refinement sequence."""
    return [richardson_extrapolate(values[i:i + 2], order) for i in range(len(values) - 1)]
