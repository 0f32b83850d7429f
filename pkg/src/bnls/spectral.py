"""Clamped biharmonic spectra on balls and the weighted Sobolev constants of the system.

All eigenproblems are posed on the free nodes in the symmetric form
``K x = alpha V x`` (``V`` the quadrature weights), so the discrete operator is
exactly self-adjoint.  Krylov solves use shift-invert through a banded
Cholesky factor; every eigenvalue is then re-evaluated from the energy form
``int |Delta psi|^2 / int psi^2``, which is a sum of squares and therefore keeps
full relative precision even where ``K`` itself is badly conditioned.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_solve_banded, cholesky_banded, eigh, eigvals_banded
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, LinearOperator, eigsh

from .energy import ModelParams
from .errors import InvalidCap, SolverBreakdown, WeightDegenerate
from .radial import RadialField, RadialGrid, roundoff_floor

log = logging.getLogger(__name__)

CLUSTER_RTOL = 1e-8
DENSE_LIMIT = 1024


def _stiffness_csr(grid: RadialGrid, shift: float = 0.0) -> sp.csr_matrix:
    ab = grid.ops.stiffness(shift)
    n = grid.M - 1
    diags = [ab[2], ab[1, 1:], ab[0, 2:]]
    return sp.diags(
        [diags[2], diags[1], diags[0], diags[1], diags[2]], [-2, -1, 0, 1, 2], shape=(n, n), format="csc"
    )


def _chol_operator(grid: RadialGrid, shift: float = 0.0) -> LinearOperator:
    n = grid.M - 1
    try:
        c = cholesky_banded(grid.ops.stiffness(shift), lower=False)
    except np.linalg.LinAlgError as exc:
        raise SolverBreakdown(f"stiffness with shift {shift} is not positive definite") from exc
    return LinearOperator((n, n), matvec=lambda x: cho_solve_banded((c, False), x), dtype=float)


def _full(grid: RadialGrid, x: np.ndarray) -> np.ndarray:
    out = np.zeros(grid.M)
    out[:-1] = x
    return out


def _energy_quotient(grid: RadialGrid, psi: np.ndarray, shift: float = 0.0, weight=None) -> float:
    """``(int |Delta psi|^2 + shift int psi^2) / int weight psi^2`` (weight 1 by default)."""
    w = grid.weights
    num = w @ (grid.ops.lap @ psi) ** 2 + shift * (w @ psi**2)
    den = w @ (psi**2 if weight is None else weight * psi**2)
    return float(num / den)


def _residual_floor(grid: RadialGrid, psi: np.ndarray) -> float:
    """Conservative size of the roundoff in ``Delta^2 psi`` for ``psi`` stored in double precision."""
    return 4 * roundoff_floor(grid, psi)


def _polish(grid: RadialGrid, psi: np.ndarray, alpha: float, sweeps: int = 2) -> np.ndarray:
    """Inverse iteration with a shift just below ``alpha``; damps high-frequency roundoff."""
    w = grid.weights[:-1]
    try:
        solver = _chol_operator(grid, -alpha * (1 - 1e-3))
    except SolverBreakdown:
        return psi
    x = psi[:-1]
    for _ in range(sweeps):
        x = solver.matvec(w * x)
        x /= math.sqrt(w @ x**2)
    return _full(grid, x)


def _normalise(grid: RadialGrid, psi: np.ndarray) -> np.ndarray:
    psi = psi / math.sqrt(grid.weights @ psi**2)
    j = int(np.argmax(np.abs(psi[: max(1, grid.M // 8)]))) if psi[0] == 0 else 0
    return -psi if psi[j] < 0 else psi


@dataclass
class SpectrumReport:
    R: float
    shift: float
    alphas: np.ndarray
    ell: np.ndarray
    fields: list = field(repr=False)
    residuals: np.ndarray = field(repr=False)
    residual_floors: np.ndarray = field(repr=False)
    multiplicities: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "R": self.R,
            "lambda": self.shift,
            "alphas": [float(a) for a in self.alphas],
            "ell": [float(x) for x in self.ell],
            "residuals": [float(x) for x in self.residuals],
            "residual_floors": [float(x) for x in self.residual_floors],
            "multiplicities": self.multiplicities,
        }


def _cluster(values: np.ndarray) -> list:
    out = []
    for a in values:
        if out and abs(a - out[-1][0]) <= CLUSTER_RTOL * abs(a):
            out[-1][1] += 1
        else:
            out.append([float(a), 1])
    return out


def _dense_pairs(grid: RadialGrid, k: int):
    K = _stiffness_csr(grid).toarray()
    s = 1.0 / np.sqrt(grid.weights[:-1])
    vals, vecs = eigh(s[:, None] * K * s[None, :], subset_by_index=[0, k - 1])
    return vals, s[:, None] * vecs


def _krylov_pairs(grid: RadialGrid, k: int):
    n = grid.M - 1
    Vm = sp.diags(grid.weights[:-1], format="csc")
    return eigsh(
        _stiffness_csr(grid),
        k=k,
        M=Vm,
        sigma=0.0,
        which="LM",
        OPinv=_chol_operator(grid),
        v0=np.ones(n),
        tol=0,
    )


def clamped_spectrum(grid: RadialGrid, k_max: int, shift: float = 0.0) -> SpectrumReport:
    """The ``k_max`` smallest eigenpairs of the clamped radial bilaplacian on ``B_R``.

    ``shift`` is the linear coefficient ``lam``; it only enters ``ell_k = lam + alpha_k``.
    """
    n = grid.M - 1
    if not 1 <= k_max < n - 1:
        raise ValueError(f"k_max={k_max!r} must lie in 1..{n - 2}")
    try:
        vals, vecs = _krylov_pairs(grid, k_max)
    except (ArpackError, ArpackNoConvergence) as exc:
        if grid.M > DENSE_LIMIT:
            raise SolverBreakdown(f"shift-invert Lanczos failed: {exc}") from exc
        log.info("Lanczos failed (%s); dense fallback", exc)
        vals, vecs = _dense_pairs(grid, k_max)
    order = np.argsort(vals)
    fields, alphas, res, floors = [], [], [], []
    for i in order:
        psi = _normalise(grid, _polish(grid, _full(grid, vecs[:, i]), vals[i]))
        a = _energy_quotient(grid, psi)
        r = grid.ops.bilap @ psi - a * psi
        r[-1] = 0.0
        fields.append(RadialField(grid, psi))
        alphas.append(a)
        res.append(math.sqrt(grid.weights @ r**2))
        floors.append(_residual_floor(grid, psi))
    alphas = np.array(alphas)
    if np.any(alphas <= 0) or not np.all(np.isfinite(alphas)):
        raise SolverBreakdown("non-positive clamped eigenvalue")
    idx = np.argsort(alphas)
    alphas = alphas[idx]
    return SpectrumReport(
        R=grid.R,
        shift=float(shift),
        alphas=alphas,
        ell=shift + alphas,
        fields=[fields[i] for i in idx],
        residuals=np.array(res)[idx],
        residual_floors=np.array(floors)[idx],
        multiplicities=_cluster(alphas),
    )


def rayleigh_first(grid: RadialGrid, lam: float) -> tuple[float, float]:
    """``(ell1_hat, ell_{1,lam})`` with ``ell1_hat = min int|Delta u|^2 / int u^2``."""
    if not lam >= 0:
        raise ValueError(f"lambda={lam!r} must be non-negative")
    a = float(clamped_spectrum(grid, 1).alphas[0])
    return a, a + lam


def category_count(grid: RadialGrid, lam: float, cap: float, max_k: int = 400) -> int:
    """``#{k : 0 < lam + alpha_k <= cap}`` on the ball, with refined eigenvalues."""
    if not cap > lam:
        raise InvalidCap(f"cap={cap!r} must exceed lambda={lam!r}")
    target = cap - lam
    s = 1.0 / np.sqrt(grid.weights[:-1])
    ab = grid.ops.stiffness(0.0)
    scaled = ab.copy()
    for k in range(3):
        scaled[2 - k, k:] *= s[k:] * s[: len(s) - k]
    # inertia estimate from the scaled banded matrix, padded against roundoff near the cap
    rough = eigvals_banded(scaled, lower=False, select="v", select_range=(-np.inf, target * 1.01))
    k = len(rough) + 2
    if k >= min(max_k, grid.M - 3):
        log.warning("category count %d exceeds refinement limit; returning banded estimate", len(rough))
        return int(np.count_nonzero(rough <= target))
    eig = clamped_spectrum(grid, k)
    while eig.alphas[-1] <= target and k + 4 < grid.M - 3:
        k += 4
        eig = clamped_spectrum(grid, k)
    return int(np.count_nonzero(eig.alphas <= target))


# -- weighted Sobolev constants --------------------------------------------


@dataclass
class SobolevResult:
    value: float
    field: RadialField = field(repr=False)
    residual: float = 0.0
    residual_floor: float = 0.0


def _weight(U: RadialField) -> np.ndarray:
    u = U.values.copy()
    u[-1] = 0.0
    w = u**2
    if U.grid.weights @ w**2 <= 1e-30 * max(1.0, float(np.max(w)) ** 2):
        raise WeightDegenerate("weight U^2 vanishes numerically")
    return w


def _pair_shift(j: int, p: ModelParams) -> float:
    if j not in (1, 2):
        raise ValueError(f"component index j={j!r} must be 1 or 2")
    return p.lam2 if j == 1 else p.lam1


def sobolev_eigenpair(j: int, p: ModelParams, U: RadialField) -> SobolevResult:
    """Smallest ``s`` with ``(Delta^2 + lam_k) phi = s U_j^2 phi``, ``k != j``."""
    grid = U.grid
    shift = _pair_shift(j, p)
    W = _weight(U)
    wf = grid.weights[:-1] * W[:-1]
    A = sp.diags(wf, format="csc")
    try:
        theta, vec = eigsh(
            A,
            k=1,
            M=_stiffness_csr(grid, shift),
            Minv=_chol_operator(grid, shift),
            which="LA",
            v0=np.sqrt(wf) + 1e-3,
            tol=0,
        )
    except (ArpackError, ArpackNoConvergence) as exc:
        raise SolverBreakdown(f"weighted eigenproblem failed: {exc}") from exc
    if not theta[0] > 0:
        raise SolverBreakdown("weighted eigenproblem has no positive mode")
    phi = _normalise(grid, _full(grid, vec[:, 0]))
    s = _energy_quotient(grid, phi, shift, W)
    r = grid.ops.bilap @ phi + shift * phi - s * W * phi
    r[-1] = 0.0
    scale = math.sqrt(grid.weights @ (W * phi) ** 2)
    return SobolevResult(
        value=s,
        field=RadialField(grid, phi),
        residual=math.sqrt(grid.weights @ r**2) / scale,
        residual_floor=_residual_floor(grid, phi) / scale,
    )


def sobolev_constant(j: int, p: ModelParams, U_other: RadialField) -> float:
    """``S_j^2 = inf ||phi||_k^2 / int U_j^2 phi^2`` (``U_other`` is the weight field ``U_j``)."""
    return sobolev_eigenpair(j, p, U_other).value


def sobolev_constant_descent(
    j: int, p: ModelParams, U: RadialField, tol: float = 1e-12, max_iter: int = 2000, seed: int = 0
) -> float:
    """Same constant by preconditioned locally optimal Rayleigh-quotient descent.

    Search space ``{x, P g, previous step}`` with ``P = (Delta^2 + lam_k)^-1``;
    the 3x3 Rayleigh-Ritz problem picks the best combination each step.
    """
    grid = U.grid
    shift = _pair_shift(j, p)
    W = _weight(U)
    w = grid.weights
    solver = grid.ops.shifted_solver(shift)
    bilap = grid.ops.bilap

    def Aop(x):
        y = bilap @ x + shift * x
        y[-1] = 0.0
        return w * y

    def Bop(x):
        return w * W * x

    rng = np.random.default_rng(seed)
    x = U.values * (1 + 0.1 * rng.standard_normal(grid.M))
    x = np.abs(x)
    x[-1] = 0.0
    prev = None
    s = _energy_quotient(grid, x, shift, W)
    for _ in range(max_iter):
        g = Aop(x) - s * Bop(x)
        d = solver.solve(g / w)
        basis = [x, d] if prev is None else [x, d, prev]
        Q, _r = np.linalg.qr(np.column_stack(basis) * np.sqrt(w)[:, None])
        Q = Q / np.sqrt(w)[:, None]
        Am = Q.T @ np.column_stack([Aop(q) for q in Q.T])
        Bm = Q.T @ np.column_stack([Bop(q) for q in Q.T])
        Am, Bm = 0.5 * (Am + Am.T), 0.5 * (Bm + Bm.T)
        try:
            vals, vecs = eigh(Am, Bm)
        except np.linalg.LinAlgError:
            vals, vecs = eigh(Bm, Am)
            vals, vecs = 1 / vals[::-1], vecs[:, ::-1]
        y = Q @ vecs[:, 0]
        y[-1] = 0.0
        prev = y - (w @ (y * x)) / (w @ (x * x)) * x
        x = y / math.sqrt(w @ y**2)
        s_new = _energy_quotient(grid, x, shift, W)
        if abs(s_new - s) <= tol * abs(s_new):
            return s_new
        s = s_new
    raise SolverBreakdown("Rayleigh-quotient descent did not settle")


@dataclass
class SobolevConstants:
    S1sq: float
    S2sq: float
    Lambda: float
    Lambda_prime: float
    phi1: RadialField = field(repr=False)
    phi2: RadialField = field(repr=False)
    residuals: tuple = (0.0, 0.0)
    U1: RadialField | None = field(default=None, repr=False)
    U2: RadialField | None = field(default=None, repr=False)

    def to_json(self) -> dict:
        return {
            "S1sq": self.S1sq,
            "S2sq": self.S2sq,
            "Lambda": self.Lambda,
            "Lambda_prime": self.Lambda_prime,
            "residuals": list(self.residuals),
        }


def thresholds(p: ModelParams, U1: RadialField, U2: RadialField) -> SobolevConstants:
    r1 = sobolev_eigenpair(1, p, U1)
    r2 = sobolev_eigenpair(2, p, U2)
    return SobolevConstants(
        S1sq=r1.value,
        S2sq=r2.value,
        Lambda=min(r1.value, r2.value),
        Lambda_prime=max(r1.value, r2.value),
        phi1=r1.field,
        phi2=r2.field,
        residuals=(r1.residual, r2.residual),
        U1=U1,
        U2=U2,
    )
