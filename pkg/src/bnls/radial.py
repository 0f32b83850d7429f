"""Radial grids with their quadrature weights and discrete Laplacian operators.

The grid is cell-centred with a half cell at the outer radius::

    r_i = (i + 1/2) h,  i = 0 .. M-1,   h = R / (M - 1/2)

so the first node sits at h/2 (no division by r = 0) and the last node sits
exactly on r = R.  Quadrature weights are the exact N-volumes of the cells,
which makes the weights sum to |B_R| up to roundoff.

The Laplacian is a finite-volume flux difference ``L = V^-1 D`` with ``D``
symmetric, zero flux through r = 0 (radial regularity) and zero flux through
r = R (clamped slope).  Clamped fields additionally pin ``u[-1] = 0``.  The
bilaplacian is the composition ``L @ L`` restricted to clamped fields, so that
``<L L u, v>_V = <L u, L v>_V`` holds exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cholesky_banded, cho_solve_banded

from .errors import GridMismatch, InvalidDimension, InvalidResolution, NonPositiveLambda

MAX_DIM = 7
MIN_NODES = 64


def sphere_area(N: int) -> float:
    """Surface measure of the unit sphere S^{N-1}; 1 for the half-line."""
    if N == 1:
        return 1.0
    return 2.0 * math.pi ** (N / 2) / math.gamma(N / 2)


def ball_volume(N: int, R: float) -> float:
    return sphere_area(N) * R**N / N


@dataclass(frozen=True, eq=False)
class RadialGrid:
    N: int
    R: float
    M: int
    r: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    h: float

    def __post_init__(self):
        self.r.flags.writeable = False
        self.weights.flags.writeable = False

    @property
    def volume(self) -> float:
        return float(self.weights.sum())

    def same_as(self, other: "RadialGrid") -> bool:
        return self is other or (
            self.N == other.N and self.M == other.M and self.R == other.R
        )

    def field(self, values) -> "RadialField":
        return RadialField(self, np.asarray(values, dtype=float))

    def sample(self, fn) -> "RadialField":
        return RadialField(self, np.asarray(fn(self.r), dtype=float))

    @cached_property
    def ops(self) -> "OperatorBundle":
        return OperatorBundle.build(self)

    def __repr__(self):
        return f"RadialGrid(N={self.N}, R={self.R!r}, M={self.M})"


def build_grid(N: int, R: float, M: int) -> RadialGrid:
    if not isinstance(N, (int, np.integer)) or not 1 <= N <= MAX_DIM:
        raise InvalidDimension(f"dimension N={N!r} outside 1..{MAX_DIM}")
    if not isinstance(M, (int, np.integer)) or M < MIN_NODES:
        raise InvalidResolution(f"node count M={M!r} below {MIN_NODES}")
    if not (np.isfinite(R) and R > 0):
        raise InvalidResolution(f"outer radius R={R!r} must be positive")
    R = float(R)
    h = R / (M - 0.5)
    r = (np.arange(M) + 0.5) * h
    r[-1] = R
    edges = np.arange(M + 1) * h
    edges[-1] = R
    omega = sphere_area(N)
    weights = omega / N * np.diff(edges**N)
    return RadialGrid(int(N), R, int(M), r, weights, h)


class RadialField:
    """A real radial function sampled on the nodes of a grid."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: RadialGrid, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.M,):
            raise GridMismatch(f"expected {grid.M} values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        self.grid = grid
        self.values = values

    def _check(self, other: "RadialField"):
        if not self.grid.same_as(other.grid):
            raise GridMismatch(f"{self.grid!r} vs {other.grid!r}")

    def __add__(self, other):
        self._check(other)
        return RadialField(self.grid, self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return RadialField(self.grid, self.values - other.values)

    def __mul__(self, c):
        return RadialField(self.grid, self.values * float(c))

    __rmul__ = __mul__

    def __neg__(self):
        return RadialField(self.grid, -self.values)

    def clamped(self) -> "RadialField":
        v = self.values.copy()
        v[-1] = 0.0
        return RadialField(self.grid, v)

    def __repr__(self):
        return f"RadialField({self.grid!r}, max|u|={np.abs(self.values).max():.4g})"


@dataclass(frozen=True, eq=False)
class OperatorBundle:
    """Sparse discrete operators for one grid.

    ``lap`` acts on full node vectors.  ``bilap`` acts on full node vectors but
    only the clamped part of the input matters; its last row and column are
    zero.  ``K`` is the symmetric stiffness ``V @ bilap`` on the free nodes
    (all but the last), stored in upper banded form for Cholesky solves.
    """

    grid: RadialGrid
    D: sp.csr_matrix
    lap: sp.csr_matrix
    bilap: sp.csr_matrix
    stiff_banded: np.ndarray
    boundary_condition: str = "clamped-at-R, regularity-at-0"
    _solvers: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, grid: RadialGrid) -> "OperatorBundle":
        M, h = grid.M, grid.h
        faces = np.arange(1, M) * h
        coef = sphere_area(grid.N) * faces ** (grid.N - 1) / h
        main = np.zeros(M)
        main[:-1] -= coef
        main[1:] -= coef
        D = sp.diags([coef, main, coef], [-1, 0, 1], format="csr")
        Vinv = sp.diags(1.0 / grid.weights)
        lap = (Vinv @ D).tocsr()
        free = sp.diags(np.r_[np.ones(M - 1), 0.0])
        bilap = (free @ lap @ lap @ free).tocsr()
        K = (D @ Vinv @ D).tocsr()[: M - 1, : M - 1]
        K = 0.5 * (K + K.T)
        ab = np.zeros((3, M - 1))
        for k in range(3):
            ab[2 - k, k:] = K.diagonal(k)
        return cls(grid, D, lap, bilap, ab)

    def stiffness(self, shift: float = 0.0) -> np.ndarray:
        """Upper-banded ``K + shift * V`` on the free nodes."""
        ab = self.stiff_banded.copy()
        ab[2] += shift * self.grid.weights[:-1]
        return ab

    def shifted_solver(self, shift: float) -> "BandedSolver":
        """Solver for ``(Delta^2 + shift) u = f`` on clamped fields (memoised per shift)."""
        key = float(shift)
        if key not in self._solvers:
            self._solvers[key] = BandedSolver(self, key)
        return self._solvers[key]


class BandedSolver:
    """Cholesky factorisation of ``K + shift V`` (positive definite for shift > -alpha_1)."""

    def __init__(self, ops: OperatorBundle, shift: float):
        self.ops = ops
        self.shift = shift
        self._chol = cholesky_banded(ops.stiffness(shift), lower=False)

    def solve(self, f: np.ndarray) -> np.ndarray:
        """Return clamped ``u`` with ``(Delta^2 + shift) u = f`` at free nodes."""
        w = self.ops.grid.weights
        out = np.zeros(np.shape(f))
        rhs = (w[:-1, None] * f[:-1]) if np.ndim(f) == 2 else w[:-1] * f[:-1]
        out[:-1] = cho_solve_banded((self._chol, False), rhs)
        return out

    def solve_weighted(self, b: np.ndarray) -> np.ndarray:
        """Solve ``(K + shift V) x = b`` with ``b`` already a weighted (dual) vector."""
        out = np.zeros(np.shape(b))
        out[:-1] = cho_solve_banded((self._chol, False), b[:-1])
        return out


def _vals(u) -> np.ndarray:
    return u.values if isinstance(u, RadialField) else np.asarray(u, dtype=float)


def _same_grid(*fields: RadialField) -> RadialGrid:
    g = fields[0].grid
    for f in fields[1:]:
        if not g.same_as(f.grid):
            raise GridMismatch(f"{g!r} vs {f.grid!r}")
    return g


def apply_laplacian(u: RadialField) -> RadialField:
    return RadialField(u.grid, u.grid.ops.lap @ u.values)


def apply_bilaplacian(u: RadialField) -> RadialField:
    """``Delta(Delta u)`` for the clamped part of ``u``; zero on the boundary node."""
    return RadialField(u.grid, u.grid.ops.bilap @ u.values)


def integrate(u: RadialField) -> float:
    return float(u.grid.weights @ u.values)


def inner_l2(u: RadialField, v: RadialField) -> float:
    g = _same_grid(u, v)
    return float(g.weights @ (u.values * v.values))


def inner_h(u: RadialField, v: RadialField, lam: float) -> float:
    """``int Delta u Delta v + lam int u v`` on clamped fields."""
    if not lam > 0:
        raise NonPositiveLambda(f"lambda={lam!r} must be positive")
    g = _same_grid(u, v)
    lap = g.ops.lap
    uc, vc = u.values.copy(), v.values.copy()
    uc[-1] = vc[-1] = 0.0
    return float(g.weights @ ((lap @ uc) * (lap @ vc)) + lam * g.weights @ (uc * vc))


def norm_h(u: RadialField, lam: float) -> float:
    """Squared norm ``inner_h(u, u, lam)``."""
    return inner_h(u, u, lam)


def integrate_power(u: RadialField, p: int) -> float:
    if p not in (2, 3, 4):
        raise ValueError(f"power p={p!r} not in {{2, 3, 4}}")
    return float(u.grid.weights @ np.abs(u.values) ** p)


def roundoff_floor(grid: RadialGrid, u) -> float:
    """``eps * || |Delta^2| |u| ||``: the L2 size of roundoff in ``Delta^2 u`` for stored ``u``.

    Accepts one node vector or a stack of them (largest value returned).
    """
    absB = abs(grid.ops.bilap)
    U = np.atleast_2d(np.abs(_vals(u)))
    vals = [math.sqrt(grid.weights @ (absB @ row) ** 2) for row in U]
    return float(np.finfo(float).eps * max(vals))


def bilap_energy(u: RadialField) -> float:
    """``int |Delta u|^2`` for the clamped part of ``u``."""
    uc = u.values.copy()
    uc[-1] = 0.0
    g = u.grid
    return float(g.weights @ (g.ops.lap @ uc) ** 2)
