"""Energy functionals of the coupled biharmonic system and the Nehari projection.

With ``||u||^2 = ||u1||_1^2 + ||u2||_2^2`` and ``||w||_j^2 = int |Delta w|^2 + lam_j int w^2``::

    I_j = 1/2 ||u_j||_j^2 - 1/4 mu_j int u_j^4
    F   = 1/4 int (mu1 u1^4 + mu2 u2^4)
    G   = 1/2 int u1^2 u2^2
    J   = I_1 + I_2 - beta G = 1/2 ||u||^2 - F - beta G
    Psi = (J'(u) | u) = ||u||^2 - 4F - 4 beta G

Everything is evaluated with the grid quadrature, so the discrete identities on
the Nehari set (``J = ||u||^2/4 = F + beta G``) hold to roundoff.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import GridMismatch, InvalidParameters, NonAdmissibleDirection, ZeroState
from .radial import MAX_DIM, RadialField, RadialGrid

# F + beta G below this fraction of F + |beta| G counts as zero (cancellation).
ADMISSIBLE_RTOL = 1e-12


@dataclass(frozen=True)
class ModelParams:
    lam1: float = 1.0
    lam2: float = 1.0
    mu1: float = 1.0
    mu2: float = 1.0
    beta: float = 0.0
    N: int = 2
    sigma: int = 1

    def __post_init__(self):
        for name in ("lam1", "lam2", "mu1", "mu2"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise InvalidParameters(f"{name}={val!r} must be positive")
        if not math.isfinite(self.beta):
            raise InvalidParameters(f"beta={self.beta!r} must be finite")
        if not 1 <= int(self.N) <= MAX_DIM:
            raise InvalidParameters(f"N={self.N!r} outside 1..{MAX_DIM}")
        if self.sigma != 1:
            raise InvalidParameters("only the cubic nonlinearity sigma=1 is supported")

    @property
    def lam(self) -> tuple[float, float]:
        return (self.lam1, self.lam2)

    @property
    def mu(self) -> tuple[float, float]:
        return (self.mu1, self.mu2)

    def with_beta(self, beta: float) -> "ModelParams":
        return ModelParams(self.lam1, self.lam2, self.mu1, self.mu2, beta, self.N)


class StatePair:
    """Two radial components ``(u1, u2)`` on one grid."""

    __slots__ = ("u1", "u2")

    def __init__(self, u1: RadialField, u2: RadialField):
        if not u1.grid.same_as(u2.grid):
            raise GridMismatch("state components live on different grids")
        self.u1 = u1
        self.u2 = u2

    @property
    def grid(self) -> RadialGrid:
        return self.u1.grid

    @classmethod
    def from_array(cls, grid: RadialGrid, arr) -> "StatePair":
        arr = np.asarray(arr, dtype=float)
        return cls(RadialField(grid, arr[0]), RadialField(grid, arr[1]))

    @classmethod
    def zeros(cls, grid: RadialGrid) -> "StatePair":
        return cls.from_array(grid, np.zeros((2, grid.M)))

    def stack(self) -> np.ndarray:
        return np.vstack([self.u1.values, self.u2.values])

    def __mul__(self, c):
        return StatePair(self.u1 * c, self.u2 * c)

    __rmul__ = __mul__

    def __add__(self, other):
        return StatePair(self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other):
        return StatePair(self.u1 - other.u1, self.u2 - other.u2)

    def __neg__(self):
        return StatePair(-self.u1, -self.u2)

    def __iter__(self):
        yield self.u1
        yield self.u2


@dataclass(frozen=True)
class EnergyReport:
    I1: float
    I2: float
    F: float
    G: float
    J: float
    Psi: float
    norm2_total: float
    norm2_1: float
    norm2_2: float

    def to_json(self) -> dict:
        return asdict(self)


def _check_params(grid: RadialGrid, p: ModelParams):
    if grid.N != p.N:
        raise GridMismatch(f"grid dimension {grid.N} != model dimension {p.N}")


# -- array kernels shared with the solvers ---------------------------------


def _clamp(U: np.ndarray) -> np.ndarray:
    U = np.array(U, dtype=float)
    U[..., -1] = 0.0
    return U


def _pieces(grid: RadialGrid, U: np.ndarray, p: ModelParams) -> dict:
    w, lap = grid.weights, grid.ops.lap
    U = _clamp(U)
    LU = (lap @ U.T).T
    quad = w @ (LU**2).T + np.array(p.lam) * (w @ (U**2).T)
    q4 = w @ (U**4).T
    cross = w @ (U[0] ** 2 * U[1] ** 2)
    return {"norm2": quad, "l4": q4, "cross": float(cross)}


def energies_array(grid: RadialGrid, U: np.ndarray, p: ModelParams) -> EnergyReport:
    pc = _pieces(grid, U, p)
    n1, n2 = (float(x) for x in pc["norm2"])
    a1, a2 = (float(x) for x in pc["l4"])
    F = 0.25 * (p.mu1 * a1 + p.mu2 * a2)
    G = 0.5 * pc["cross"]
    I1 = 0.5 * n1 - 0.25 * p.mu1 * a1
    I2 = 0.5 * n2 - 0.25 * p.mu2 * a2
    return EnergyReport(
        I1=I1,
        I2=I2,
        F=F,
        G=G,
        J=I1 + I2 - p.beta * G,
        Psi=n1 + n2 - 4 * F - 4 * p.beta * G,
        norm2_total=n1 + n2,
        norm2_1=n1,
        norm2_2=n2,
    )


def gradient_array(grid: RadialGrid, U: np.ndarray, p: ModelParams) -> np.ndarray:
    U = _clamp(U)
    B = grid.ops.bilap
    lam = np.array(p.lam)[:, None]
    mu = np.array(p.mu)[:, None]
    G = (B @ U.T).T + lam * U - mu * U**3 - p.beta * U[::-1] ** 2 * U
    G[:, -1] = 0.0
    return G


def psi_gradient_array(grid: RadialGrid, U: np.ndarray, p: ModelParams) -> np.ndarray:
    """L2 representative of Psi'(u)."""
    U = _clamp(U)
    B = grid.ops.bilap
    lam = np.array(p.lam)[:, None]
    mu = np.array(p.mu)[:, None]
    G = 2 * ((B @ U.T).T + lam * U) - 4 * mu * U**3 - 4 * p.beta * U[::-1] ** 2 * U
    G[:, -1] = 0.0
    return G


def precondition(grid: RadialGrid, G: np.ndarray, p: ModelParams) -> np.ndarray:
    """Apply ``(Delta^2 + lam_j)^-1`` componentwise: L2 gradient -> Riesz gradient."""
    ops = grid.ops
    return np.vstack([ops.shifted_solver(p.lam[j]).solve(G[j]) for j in range(2)])


def dual_inner(grid: RadialGrid, A: np.ndarray, B_: np.ndarray, p: ModelParams) -> float:
    """Pairing of two L2 gradients in the dual norm of ``||.||``."""
    return float(np.sum(grid.weights * A * precondition(grid, B_, p)))


def nehari_scale(grid: RadialGrid, U: np.ndarray, p: ModelParams) -> float:
    pc = _pieces(grid, U, p)
    norm2 = float(pc["norm2"].sum())
    if norm2 <= 0.0:
        raise ZeroState("cannot project the zero state")
    F = 0.25 * (p.mu1 * pc["l4"][0] + p.mu2 * pc["l4"][1])
    G = 0.5 * pc["cross"]
    denom = F + p.beta * G
    if denom <= ADMISSIBLE_RTOL * (F + abs(p.beta) * G):
        raise NonAdmissibleDirection(
            f"F + beta*G = {denom:.3e} <= 0 (beta={p.beta}); "
            "the fibering ray does not reach the Nehari manifold"
        )
    return math.sqrt(norm2 / (4.0 * denom))


def constrained_gradient(grid: RadialGrid, U: np.ndarray, p: ModelParams):
    """Return ``(omega, dual norm of J' - omega Psi', L2 gradient)``.

    ``omega`` is the multiplier that makes ``J' - omega Psi'`` orthogonal to
    ``Psi'`` in the dual metric; it tends to 0 at constrained critical points.
    """
    g = gradient_array(grid, U, p)
    gp = psi_gradient_array(grid, U, p)
    pg = precondition(grid, gp, p)
    w = grid.weights
    omega = float(np.sum(w * g * pg) / np.sum(w * gp * pg))
    gn = g - omega * gp
    norm = math.sqrt(max(dual_inner(grid, gn, gn, p), 0.0))
    return omega, norm, g


def residual_norms(grid: RadialGrid, U: np.ndarray, p: ModelParams) -> tuple[float, float]:
    g = gradient_array(grid, U, p)
    w = grid.weights
    return float(math.sqrt(w @ g[0] ** 2)), float(math.sqrt(w @ g[1] ** 2))


# -- public field-level API -------------------------------------------------


def eval_energies(u: StatePair, p: ModelParams) -> EnergyReport:
    _check_params(u.grid, p)
    return energies_array(u.grid, u.stack(), p)


def gradient(u: StatePair, p: ModelParams) -> StatePair:
    """L2 representative of J'(u): ``(J'(u) | h) = int grad . h`` for clamped h."""
    _check_params(u.grid, p)
    return StatePair.from_array(u.grid, gradient_array(u.grid, u.stack(), p))


def directional_derivative(u: StatePair, h: StatePair, p: ModelParams) -> float:
    g = gradient(u, p)
    w = u.grid.weights
    hh = _clamp(h.stack())
    return float(w @ (g.u1.values * hh[0]) + w @ (g.u2.values * hh[1]))


def psi_prime_pairing(u: StatePair, p: ModelParams) -> float:
    """``(Psi'(u) | u) = 2||u||^2 - 16 (F + beta G)``."""
    rep = eval_energies(u, p)
    return 2 * rep.norm2_total - 16 * (rep.F + p.beta * rep.G)


def nehari_project(v: StatePair, p: ModelParams) -> tuple[float, StatePair]:
    _check_params(v.grid, p)
    V = _clamp(v.stack())
    t = nehari_scale(v.grid, V, p)
    return t, StatePair.from_array(v.grid, t * V)


def nehari_identities(u: StatePair, p: ModelParams) -> dict:
    """Relative defects of the identities that hold on the Nehari manifold."""
    rep = eval_energies(u, p)
    n2 = rep.norm2_total
    return {
        "psi": abs(rep.Psi) / n2,
        "J_quarter_norm": abs(rep.J - 0.25 * n2) / abs(rep.J),
        "J_F_beta_G": abs(rep.J - (rep.F + p.beta * rep.G)) / abs(rep.J),
        "psi_prime": abs(psi_prime_pairing(u, p) + 2 * n2) / n2,
    }
