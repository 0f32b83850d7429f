"""Radial ground states of ``Delta^2 u + lam u = mu u^3``.

The ground state minimises the scale-invariant reduced functional
``(||v||_lam^2)^2 / (4 mu int v^4)``; equivalently ``J`` on the scalar Nehari
set.  We run preconditioned gradient descent on that set: each step goes
along ``-(Delta^2 + lam)^-1 J'(u)`` and is rescaled back onto the Nehari set,
with Armijo backtracking on the reduced functional.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import least_squares

from .energy import (
    EnergyReport,
    ModelParams,
    StatePair,
    constrained_gradient,
    energies_array,
)
from .errors import (
    BelowNoiseFloor,
    CollapseToZero,
    DomainTooSmall,
    NonConvergence,
    NonPositiveLambda,
    WindowTooNarrow,
)
from .parallel import pmap
from .radial import RadialField, RadialGrid, build_grid, roundoff_floor

log = logging.getLogger(__name__)

ARMIJO_C = 1e-4
# energy changes below this relative size are roundoff; the residual decides then
ROUNDOFF_SLACK = 1e-12


BASE_TOL = 1e-8
# the attained residual bottoms out near 0.2x the roundoff estimate; accept up to 0.3x
FLOOR_FACTOR = 0.3


def residual_scale(lam: float, mu: float, N: int) -> float:
    """Factor by which the L2 residual grows under ``u -> sqrt(lam/mu) u(lam^{1/4} r)``."""
    return math.sqrt(lam / mu) * lam ** (1 - N / 8)


@dataclass
class SolveOptions:
    """``tol=None`` means ``BASE_TOL`` at (lam, mu) = (1, 1), carried along the scaling family.

    A tolerance below ``FLOOR_FACTOR`` times the grid's roundoff floor is raised to
    that level; results record this as ``floor_limited``.
    """

    tol: float | None = None
    max_iter: int = 5000
    seed: int | None = None
    patience: int = 40


@dataclass
class SolveResult:
    state: object
    energy: EnergyReport
    residual: float
    iterations: int
    converged: bool
    omega: float
    tag: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def J(self) -> float:
        return self.energy.J

    def summary(self) -> dict:
        return {
            "tag": self.tag,
            "converged": self.converged,
            "iterations": self.iterations,
            "residual": self.residual,
            "omega": self.omega,
            "energy": self.energy.to_json(),
            **{k: v for k, v in self.diagnostics.items() if np.isscalar(v) or isinstance(v, (str, list))},
        }


class _Scalar:
    """Array kernels for one (lam, mu, grid)."""

    def __init__(self, lam: float, mu: float, grid: RadialGrid):
        self.lam, self.mu, self.grid = lam, mu, grid
        self.w = grid.weights
        self.lap = grid.ops.lap
        self.bilap = grid.ops.bilap
        self.solver = grid.ops.shifted_solver(lam)

    def parts(self, u):
        Lu = self.lap @ u
        return self.w @ Lu**2 + self.lam * (self.w @ u**2), self.mu * (self.w @ u**4)

    def project(self, u):
        a, b = self.parts(u)
        if b <= 0 or a <= 0:
            raise CollapseToZero("iterate lost its quartic mass")
        return u * math.sqrt(a / b)

    def reduced(self, u) -> float:
        a, b = self.parts(u)
        return 0.25 * a * a / b

    def residual(self, u):
        r = self.bilap @ u + self.lam * u - self.mu * u**3
        r[-1] = 0.0
        return math.sqrt(self.w @ r**2), r


def initial_guess(grid: RadialGrid, lam: float, seed: int | None = None) -> np.ndarray:
    """Gaussian bump ``exp(-sqrt(lam) r^2)``; a seed adds a random width and a smooth perturbation."""
    r = grid.r
    if seed is None:
        u = np.exp(-math.sqrt(lam) * r**2)
    else:
        rng = np.random.default_rng(seed)
        width = rng.uniform(0.6, 1.6)
        x = lam**0.25 * r / width
        bumps = sum(
            rng.normal(0.0, 0.3) * np.exp(-((x - rng.uniform(0, 3)) ** 2)) for _ in range(3)
        )
        u = np.exp(-(x**2)) + bumps
    u[-1] = 0.0
    return u


def solve_scalar_ground_state(
    lam: float, mu: float, grid: RadialGrid, opts: SolveOptions | None = None, u0=None
) -> SolveResult:
    if not lam > 0:
        raise NonPositiveLambda(f"lambda={lam!r} must be positive")
    if not mu > 0:
        raise NonPositiveLambda(f"mu={mu!r} must be positive")
    opts = opts or SolveOptions()
    tol_req = opts.tol if opts.tol is not None else BASE_TOL * max(1.0, residual_scale(lam, mu, grid.N))
    k = _Scalar(lam, mu, grid)

    u = initial_guess(grid, lam, opts.seed) if u0 is None else np.array(u0, dtype=float)
    u[-1] = 0.0
    u = k.project(u)
    f = k.reduced(u)
    res, r = k.residual(u)
    tol = max(tol_req, FLOOR_FACTOR * roundoff_floor(grid, u))
    best = (res, u.copy())
    stall = 0
    tau = 1.0
    it = 0
    for it in range(1, opts.max_iter + 1):
        if res < 0.5 * tol:
            break
        d = k.solver.solve(r)
        slope = float(k.w @ (r * d))
        while True:
            v = k.project(u - tau * d)
            fv = k.reduced(v)
            if fv <= f - ARMIJO_C * tau * slope + ROUNDOFF_SLACK * abs(f):
                break
            tau *= 0.5
            if tau < 1e-12:
                break
        u, f = v, fv
        tau = min(1.0, 2.0 * tau)
        if f < 1e-12 or not np.all(np.isfinite(u)):
            raise CollapseToZero(f"reduced functional drifted to {f:.3e}")
        res, r = k.residual(u)
        tol = max(tol_req, FLOOR_FACTOR * roundoff_floor(grid, u))
        if res < best[0]:
            best = (res, u.copy())
            stall = 0
        elif best[0] < 100 * tol:
            stall += 1
            if stall >= opts.patience:
                break

    res, u = best
    tol = max(tol_req, FLOOR_FACTOR * roundoff_floor(grid, u))
    if u[0] < 0:
        u = -u
    result = _scalar_result(grid, lam, mu, u, res, it, res < tol)
    result.diagnostics["reduced_functional"] = k.reduced(u)
    result.diagnostics["tol"] = tol
    result.diagnostics["tol_requested"] = tol_req
    result.diagnostics["floor_limited"] = bool(tol > tol_req)
    if not result.converged:
        raise NonConvergence(
            f"scalar solve stopped at residual {res:.3e} > tol {tol:.1e} after {it} iterations",
            result,
        )
    return result


def _scalar_result(grid, lam, mu, u, res, iters, converged, tag="scalar-ground") -> SolveResult:
    p = ModelParams(lam1=lam, lam2=lam, mu1=mu, mu2=mu, beta=0.0, N=grid.N)
    U = np.vstack([u, np.zeros_like(u)])
    omega, gnorm, _ = constrained_gradient(grid, U, p)
    return SolveResult(
        state=RadialField(grid, u),
        energy=energies_array(grid, U, p),
        residual=float(res),
        iterations=int(iters),
        converged=bool(converged),
        omega=omega,
        tag=tag,
        diagnostics={"constrained_gradient_norm": gnorm, "lam": lam, "mu": mu},
    )


def scalar_residual(U: RadialField, lam: float, mu: float) -> float:
    return _Scalar(lam, mu, U.grid).residual(U.values.copy())[0]


def scalar_nehari_defect(U: RadialField, lam: float, mu: float) -> float:
    """Relative defect ``(||U||_lam^2 - mu int U^4) / ||U||_lam^2``."""
    a, b = _Scalar(lam, mu, U.grid).parts(U.values)
    return float((a - b) / a)


def multistart(
    lam: float, mu: float, grid: RadialGrid, seeds=range(5), opts: SolveOptions | None = None
) -> tuple[list[SolveResult], float]:
    """Solve from several random seeds; returns results and the relative energy spread."""
    base = opts or SolveOptions()

    def run(seed):
        o = SolveOptions(tol=base.tol, max_iter=base.max_iter, seed=seed, patience=base.patience)
        return solve_scalar_ground_state(lam, mu, grid, o)

    results = pmap(run, seeds)
    J = np.array([r.J for r in results])
    spread = float((J.max() - J.min()) / abs(J.mean()))
    if spread > 1e-6:
        log.warning("multistart energies disagree: relative spread %.2e", spread)
    return results, spread


# -- scaling family ----------------------------------------------------------


def similar_grid(grid: RadialGrid, lam: float) -> RadialGrid:
    """Grid on which ``U(lam^{1/4} r)`` lands exactly on the source nodes."""
    return build_grid(grid.N, grid.R / lam**0.25, grid.M)


def rescale_ground_state(
    U: RadialField, lam: float, mu: float, target: RadialGrid | None = None
) -> RadialField:
    """``sqrt(lam/mu) U(lam^{1/4} r)`` from the (1, 1) ground state ``U``.

    On the similar grid the map is node-to-node and exact; on any other grid
    the profile is interpolated with an even cubic spline.
    """
    src = U.grid
    scale = lam**0.25
    amp = math.sqrt(lam / mu)
    if target is None:
        target = similar_grid(src, lam)
    if target.N != src.N:
        raise DomainTooSmall("target grid has a different dimension")
    if target.M == src.M and math.isclose(target.R * scale, src.R, rel_tol=1e-14):
        return RadialField(target, amp * U.values)
    if scale * target.R > src.R * (1 + 1e-12):
        raise DomainTooSmall(
            f"lam^(1/4) * R_target = {scale * target.R:.4g} exceeds source radius {src.R:.4g}"
        )
    x = np.r_[-src.r[::-1], src.r]
    y = np.r_[U.values[::-1], U.values]
    spline = CubicSpline(x, y)
    out = amp * spline(scale * target.r)
    out[-1] = 0.0
    return RadialField(target, out)


def energy_scaling_factor(lam: float, mu: float, N: int) -> float:
    """``I_{lam,mu}(U_{lam,mu}) / I_{1,1}(U)``."""
    return lam ** ((8 - N) / 4) / mu


# -- tail and sign structure -------------------------------------------------


@dataclass
class TailFit:
    r_a: float
    r_b: float
    a: float
    k: float
    delta: float
    C1: float
    C2: float
    residual: float
    zero_spacing: float
    zeros: np.ndarray = field(repr=False)
    extrema_estimate: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "window": [self.r_a, self.r_b],
            "a": self.a,
            "k": self.k,
            "delta": self.delta,
            "C1": self.C1,
            "C2": self.C2,
            "residual": self.residual,
            "zero_spacing": self.zero_spacing,
        }


def _zero_crossings(r: np.ndarray, u: np.ndarray, floor: float) -> np.ndarray:
    keep = np.abs(u) > floor
    rr, uu = r[keep], u[keep]
    idx = np.nonzero(np.sign(uu[:-1]) * np.sign(uu[1:]) < 0)[0]
    return rr[idx] - uu[idx] * (rr[idx + 1] - rr[idx]) / (uu[idx + 1] - uu[idx])


def noise_floor(U: RadialField) -> float:
    return 1e-12 * float(np.abs(U.values).max())


def tail_fit(U: RadialField, N: int | None = None, r_a: float | None = None, r_b: float | None = None) -> TailFit:
    """Fit ``r^delta e^{-a r} (C1 cos kr + C2 sin kr)`` to the oscillatory tail.

    Zero crossings give ``k``; a log-linear fit through the extrema gives first
    estimates of ``a`` and ``delta``, which seed a weighted least-squares fit
    of the full bundle over the window.
    """
    g = U.grid
    N = g.N if N is None else N
    r, u = g.r[:-1], U.values[:-1]
    floor = noise_floor(U)
    zeros = _zero_crossings(r, u, 1e3 * floor)
    if len(zeros) < 3:
        raise WindowTooNarrow(f"only {len(zeros)} zero crossings above the noise floor")
    spacing0 = float(np.mean(np.diff(zeros)))
    if r_a is None:
        r_a = float(zeros[1])
    if r_b is None:
        above = r[np.abs(u) > 1e3 * floor]
        r_b = float(min(above.max(), g.R - spacing0))
    win = zeros[(zeros >= r_a - 1e-12) & (zeros <= r_b)]
    if len(win) < 3 or r_b - r_a < 2 * spacing0:
        raise WindowTooNarrow(f"window [{r_a:.3g}, {r_b:.3g}] holds {len(win)} zero crossings")

    n = np.arange(len(win))
    spacing = float(np.polyfit(n, win, 1)[0])
    k0 = math.pi / spacing

    ex_r, ex_v = [], []
    for z0, z1 in zip(win[:-1], win[1:]):
        m = np.nonzero((r > z0) & (r < z1))[0]
        j = m[np.argmax(np.abs(u[m]))]
        ex_r.append(r[j])
        ex_v.append(abs(u[j]))
    ex_r, ex_v = np.array(ex_r), np.array(ex_v)
    if np.min(ex_v) < 1e3 * floor:
        raise BelowNoiseFloor("tail extrema fall below the noise floor")
    if len(ex_r) >= 3:
        c0, d0, a_neg = np.linalg.lstsq(
            np.c_[np.ones_like(ex_r), np.log(ex_r), ex_r], np.log(ex_v), rcond=None
        )[0]
        a0 = -a_neg
    else:
        d0 = -(N - 1) / 2
        a0 = float(np.polyfit(ex_r, np.log(ex_v) - d0 * np.log(ex_r), 1)[0]) * -1
    extrema_estimate = {"a": float(a0), "delta": float(d0)}

    m = (r >= r_a) & (r <= r_b)
    rr, uu = r[m], u[m]
    env0 = rr ** float(d0) * np.exp(-a0 * rr)

    def model(q, x):
        a, kk, d, c1, c2 = q
        return x**d * np.exp(-a * x) * (c1 * np.cos(kk * x) + c2 * np.sin(kk * x))

    # amplitudes from a linear solve at the initial guess
    basis = np.c_[env0 * np.cos(k0 * rr), env0 * np.sin(k0 * rr)]
    c_init = np.linalg.lstsq(basis / env0[:, None], uu / env0, rcond=None)[0]
    fit = least_squares(
        lambda q: (model(q, rr) - uu) / env0,
        [a0, k0, d0, *c_init],
        x_scale="jac",
    )
    a, kk, d, c1, c2 = fit.x
    return TailFit(
        r_a=float(r_a),
        r_b=float(r_b),
        a=float(a),
        k=float(kk),
        delta=float(d),
        C1=float(c1),
        C2=float(c2),
        residual=float(np.sqrt(np.mean(fit.fun**2))),
        zero_spacing=spacing,
        zeros=win,
        extrema_estimate=extrema_estimate,
    )


def sign_structure(U: RadialField) -> tuple[int, float | None]:
    """Number of sign changes on (0, R) above the noise floor, and the first zero."""
    zeros = _zero_crossings(U.grid.r[:-1], U.values[:-1], noise_floor(U))
    return len(zeros), (float(zeros[0]) if len(zeros) else None)


def sign_change_locations(U: RadialField) -> np.ndarray:
    return _zero_crossings(U.grid.r[:-1], U.values[:-1], noise_floor(U))


def embed(U: RadialField, which: int = 1) -> StatePair:
    z = RadialField(U.grid, np.zeros(U.grid.M))
    return StatePair(U, z) if which == 1 else StatePair(z, U)
