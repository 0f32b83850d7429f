"""Critical points of the coupled functional on the Nehari manifold.

* ``solve_global_min``: preconditioned projected gradient descent; each step
  goes along ``-(Delta^2 + lam_j)^-1 J'(u)`` and is pulled back onto the
  Nehari set along its fibering ray.
* ``solve_mountain_pass``: a string of beads on the Nehari set joining the two
  semi-trivial states, relaxed by the same projected steps and re-spaced by
  arclength; the highest bead then climbs along the string tangent until it
  is a constrained critical point.

``classify_semitrivial`` applies the second-variation test on the
off-component block, which reduces to comparing ``beta`` with a weighted
Sobolev constant.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .energy import (
    ModelParams,
    StatePair,
    constrained_gradient,
    energies_array,
    gradient_array,
    nehari_scale,
    precondition,
    residual_norms,
)
from .errors import (
    DegenerateThreshold,
    DomainTooSmall,
    FellToSemitrivial,
    GridMismatch,
    InvalidParameters,
    NonConvergence,
    PathCollapse,
)
from .fibering import admissibility
from .parallel import pmap
from .radial import RadialField, RadialGrid, inner_h, roundoff_floor
from .scalar import (
    ARMIJO_C,
    BASE_TOL,
    FLOOR_FACTOR,
    ROUNDOFF_SLACK,
    SolveOptions,
    SolveResult,
    embed,
    rescale_ground_state,
    residual_scale,
    solve_scalar_ground_state,
)
from .spectral import SobolevConstants

log = logging.getLogger(__name__)

COLLAPSE_FRACTION = 1e-10
DEGENERATE_GAP = 1e-8


@dataclass
class SystemOptions:
    tol: float | None = None
    max_iter: int = 5000
    seed: int = 0
    patience: int = 40
    perturbation: float = 1e-2
    allow_semitrivial: bool = False
    beads: int = 17
    reparam_every: int = 10
    string_sweeps: int = 200
    step: float = 0.5
    gtol: float = 1e-6
    climb_iter: int = 2000


# -- semi-trivial states -----------------------------------------------------

_scalar_cache: dict = {}


def _scalar_state(grid: RadialGrid, lam: float, mu: float) -> SolveResult:
    key = (grid.N, grid.R, grid.M, float(lam), float(mu))
    if key not in _scalar_cache:
        u0 = None
        if (lam, mu) != (1.0, 1.0):
            base = _scalar_state(grid, 1.0, 1.0).state
            try:
                u0 = rescale_ground_state(base, lam, mu, grid).values.copy()
            except DomainTooSmall:
                u0 = None
        _scalar_cache[key] = solve_scalar_ground_state(lam, mu, grid, SolveOptions(), u0=u0)
    return _scalar_cache[key]


def _check(grid: RadialGrid, p: ModelParams):
    if grid.N != p.N:
        raise GridMismatch(f"grid dimension {grid.N} != model dimension {p.N}")


def semitrivial_states(p: ModelParams, grid: RadialGrid) -> tuple[StatePair, StatePair]:
    """``(U1, 0)`` and ``(0, U2)`` with ``U_j`` the scalar ground state for ``(lam_j, mu_j)``."""
    _check(grid, p)
    U1 = _scalar_state(grid, p.lam1, p.mu1).state
    U2 = _scalar_state(grid, p.lam2, p.mu2).state
    return embed(U1, 1), embed(U2, 2)


def residual_check(u: StatePair, p: ModelParams) -> tuple[float, float]:
    """L2 norms of the two strong-form residuals."""
    _check(u.grid, p)
    return residual_norms(u.grid, u.stack(), p)


def _tol(opts: SystemOptions, p: ModelParams) -> float:
    if opts.tol is not None:
        return opts.tol
    scale = max(residual_scale(p.lam1, p.mu1, p.N), residual_scale(p.lam2, p.mu2, p.N))
    return BASE_TOL * max(1.0, scale)


def l4_fractions(grid: RadialGrid, U: np.ndarray) -> np.ndarray:
    m = grid.weights @ (U**4).T
    return m / m.sum()


def _result(grid, p, U, iters, converged, tag, **diag) -> SolveResult:
    omega, gnorm, _ = constrained_gradient(grid, U, p)
    r1, r2 = residual_norms(grid, U, p)
    frac = l4_fractions(grid, U)
    return SolveResult(
        state=StatePair.from_array(grid, U),
        energy=energies_array(grid, U, p),
        residual=max(r1, r2),
        iterations=int(iters),
        converged=bool(converged),
        omega=omega,
        tag=tag,
        diagnostics={
            "residuals": [r1, r2],
            "constrained_gradient_norm": gnorm,
            "l4_fraction": [float(frac[0]), float(frac[1])],
            **diag,
        },
    )


# -- classification ----------------------------------------------------------


@dataclass
class Classification:
    which: int
    tag: str
    verdict: str
    witness: RadialField | None = field(repr=False)
    form_value: float
    hessian_min: float
    threshold: float
    beta: float

    def to_json(self) -> dict:
        return {
            "state": self.tag,
            "verdict": self.verdict,
            "threshold": self.threshold,
            "beta": self.beta,
            "hessian_min": self.hessian_min,
            "form_value_at_witness": self.form_value,
        }


def classify_semitrivial(which: int, p: ModelParams, constants: SobolevConstants) -> Classification:
    """Strict local minimum iff ``beta < S_j^2``; saddle iff ``beta > S_j^2``.

    The off-component block of ``J''(u_j)`` is ``h -> ||h||_k^2 - beta int U_j^2 h^2``;
    relative to the weight ``U_j^2`` its smallest eigenvalue is ``S_j^2 - beta``.
    """
    if which not in (1, 2):
        raise ValueError(f"which={which!r} must be 1 or 2")
    S = constants.S1sq if which == 1 else constants.S2sq
    phi = constants.phi1 if which == 1 else constants.phi2
    U = constants.U1 if which == 1 else constants.U2
    tag = f"u{which}-semitrivial"
    gap = S - p.beta
    if abs(gap) < DEGENERATE_GAP:
        raise DegenerateThreshold(f"beta={p.beta} is within {DEGENERATE_GAP} of S_{which}^2={S}")
    form = None
    if U is not None:
        lam_k = p.lam2 if which == 1 else p.lam1
        weighted = float(U.grid.weights @ (U.values**2 * phi.values**2))
        form = (inner_h(phi, phi, lam_k) - p.beta * weighted) / weighted
    verdict = "strict-local-min" if gap > 0 else "saddle"
    if verdict == "saddle" and form is not None and not form < 0:
        raise NonConvergence(f"witness does not give a negative direction (form={form:.3e})")
    return Classification(
        which=which,
        tag=tag,
        verdict=verdict,
        witness=phi if verdict == "saddle" else None,
        form_value=float(form) if form is not None else float(gap),
        hessian_min=float(gap),
        threshold=float(S),
        beta=float(p.beta),
    )


# -- global minimisation -----------------------------------------------------


def _project(grid, U, p):
    return nehari_scale(grid, U, p) * U


def _J(grid, U, p) -> float:
    return energies_array(grid, U, p).J


def _seed(grid: RadialGrid, p: ModelParams, opts: SystemOptions) -> np.ndarray:
    u1, u2 = semitrivial_states(p, grid)
    U = np.vstack([u1.u1.values, u2.u2.values])
    rng = np.random.default_rng(opts.seed)
    x = grid.r / grid.R
    for j in range(2):
        c = rng.normal(size=3)
        U[j] *= 1 + opts.perturbation * (c[0] * np.cos(math.pi * x) + c[1] * x + c[2] * x**2) * (1 if j else -1)
    U[:, -1] = 0.0
    return _project(grid, U, p)


def solve_global_min(
    p: ModelParams,
    grid: RadialGrid,
    opts: SystemOptions | None = None,
    constants: SobolevConstants | None = None,
    U0=None,
) -> SolveResult:
    """Minimise ``J`` on the Nehari manifold from a coupled seed."""
    _check(grid, p)
    if not admissibility(p):
        raise InvalidParameters(f"beta={p.beta} <= -sqrt(mu1 mu2): J is unbounded below on N")
    opts = opts or SystemOptions()
    tol = _tol(opts, p)
    w = grid.weights
    U = _seed(grid, p, opts) if U0 is None else _project(grid, np.array(U0, dtype=float), p)
    f = _J(grid, U, p)
    g = gradient_array(grid, U, p)
    res = max(residual_norms(grid, U, p))
    tol_req = tol
    tol = max(tol_req, FLOOR_FACTOR * roundoff_floor(grid, U))
    best = (res, U.copy())
    dead = [False, False]
    tau, stall, it = 1.0, 0, 0
    for it in range(1, opts.max_iter + 1):
        if res < 0.5 * tol:
            break
        d = precondition(grid, g, p)
        slope = float(np.sum(w * g * d))
        while True:
            V = _project(grid, U - tau * d, p)
            fv = _J(grid, V, p)
            if fv <= f - ARMIJO_C * tau * slope + ROUNDOFF_SLACK * abs(f):
                break
            tau *= 0.5
            if tau < 1e-12:
                break
        U, f = V, fv
        tau = min(1.0, 2.0 * tau)
        frac = l4_fractions(grid, U)
        for j in range(2):
            if not dead[j] and frac[j] < COLLAPSE_FRACTION:
                dead[j] = True
                U[j] = 0.0
                U = _project(grid, U, p)
                f = _J(grid, U, p)
                best = (np.inf, U.copy())
                log.info("component %d collapsed at iteration %d", j + 1, it)
        g = gradient_array(grid, U, p)
        res = max(residual_norms(grid, U, p))
        tol = max(tol_req, FLOOR_FACTOR * roundoff_floor(grid, U))
        if res < best[0]:
            best, stall = (res, U.copy()), 0
        elif best[0] < 100 * tol:
            stall += 1
            if stall >= opts.patience:
                break
    res, U = best
    tol = max(tol_req, FLOOR_FACTOR * roundoff_floor(grid, U))
    for j in range(2):
        if U[j, 0] < 0 or (U[j, 0] == 0 and U[j].sum() < 0):
            U[j] = -U[j]
    tag = "semi-trivial" if any(dead) else "coupled"
    out = _result(
        grid, p, U, it, res < tol, tag,
        tol=tol, tol_requested=tol_req, floor_limited=bool(tol > tol_req), collapsed=[bool(x) for x in dead],
    )
    if not out.converged:
        raise NonConvergence(f"global minimisation stopped at residual {res:.3e} > {tol:.1e}", out)
    if any(dead):
        msg = f"minimiser collapsed onto a semi-trivial state with J={out.J:.10g}"
        if not opts.allow_semitrivial:
            raise FellToSemitrivial(msg, out)
        log.info(msg)
    if constants is not None and p.beta > constants.Lambda_prime:
        u1, u2 = semitrivial_states(p, grid)
        Jmin = min(energies_array(grid, u.stack(), p).J for u in (u1, u2))
        ok = out.J < Jmin - 1e-8 and not any(dead)
        out.diagnostics["below_semitrivial"] = bool(ok)
        if not ok:
            raise NonConvergence(
                f"beta > Lambda' but J={out.J:.10g} is not below min semi-trivial energy {Jmin:.10g}", out
            )
    return out


# -- mountain pass -----------------------------------------------------------


@dataclass
class MountainPassResult:
    path: list = field(repr=False)
    energies: np.ndarray
    saddle: SolveResult
    level: float
    endpoint_energies: tuple
    sweeps: int

    def summary(self) -> dict:
        return {
            "level": self.level,
            "endpoint_energies": list(self.endpoint_energies),
            "bead_energies": [float(e) for e in self.energies],
            "sweeps": self.sweeps,
            "saddle": self.saddle.summary(),
        }


def _metric(grid: RadialGrid, p: ModelParams):
    """Inner product of the product norm ``||.||`` on stacked states."""
    w, lap = grid.weights, grid.ops.lap
    lam = np.array(p.lam)

    def ip(A, B):
        LA, LB = (lap @ A.T).T, (lap @ B.T).T
        return float(np.sum(w * (LA * LB)) + np.sum(lam[:, None] * w * A * B))

    return ip


def _reparametrise(grid, p, path, ip):
    seg = np.array([math.sqrt(ip(b - a, b - a)) for a, b in zip(path[:-1], path[1:])])
    total = seg.sum()
    if np.min(seg) < 1e-10 * total:
        raise PathCollapse("adjacent beads merged; re-seed with a perturbed path")
    s = np.r_[0.0, np.cumsum(seg)] / total
    targets = np.linspace(0.0, 1.0, len(path))
    out = [path[0]]
    for t in targets[1:-1]:
        i = int(np.searchsorted(s, t, side="right") - 1)
        a = (t - s[i]) / (s[i + 1] - s[i])
        out.append(_project(grid, (1 - a) * path[i] + a * path[i + 1], p))
    out.append(path[-1])
    return out


def solve_mountain_pass(
    p: ModelParams,
    grid: RadialGrid,
    opts: SystemOptions | None = None,
    constants: SobolevConstants | None = None,
) -> MountainPassResult:
    """String method on the Nehari manifold between ``(U1, 0)`` and ``(0, U2)``."""
    _check(grid, p)
    opts = opts or SystemOptions()
    if constants is not None and not p.beta < constants.Lambda:
        log.warning("beta=%g >= Lambda=%g: semi-trivial states need not be local minima", p.beta, constants.Lambda)
    u1, u2 = semitrivial_states(p, grid)
    A, B = u1.stack(), u2.stack()
    ip = _metric(grid, p)
    thetas = np.linspace(0.0, 0.5 * math.pi, opts.beads)
    path = [A] + [
        _project(grid, np.vstack([math.cos(t) * A[0], math.sin(t) * B[1]]), p) for t in thetas[1:-1]
    ] + [B]
    ends = (_J(grid, A, p), _J(grid, B, p))
    tau = opts.step

    def relax(U):
        d = precondition(grid, gradient_array(grid, U, p), p)
        return _project(grid, U - tau * d, p)

    sweeps = 0
    energies = np.array([_J(grid, U, p) for U in path])
    for sweeps in range(1, opts.string_sweeps + 1):
        path = [path[0]] + pmap(relax, path[1:-1]) + [path[-1]]
        if sweeps % opts.reparam_every == 0:
            path = _reparametrise(grid, p, path, ip)
            new = np.array([_J(grid, U, p) for U in path])
            change = np.max(np.abs(new - energies)) / max(abs(new).max(), 1e-300)
            energies = new
            if change < 1e-10:
                break
    energies = np.array([_J(grid, U, p) for U in path])

    i = int(np.argmax(energies[1:-1])) + 1
    U = path[i].copy()
    gnorm = constrained_gradient(grid, U, p)[1]
    it = 0
    for it in range(1, opts.climb_iter + 1):
        if gnorm < opts.gtol:
            break
        t = path[i + 1] - path[i - 1]
        t = t / math.sqrt(ip(t, t))
        d = precondition(grid, gradient_array(grid, U, p), p)
        d = d - 2.0 * ip(d, t) * t
        U = _project(grid, U - tau * d, p)
        gnorm = constrained_gradient(grid, U, p)[1]
    path[i] = U
    energies[i] = _J(grid, U, p)
    frac = l4_fractions(grid, U)
    tag = "coupled" if frac.min() >= COLLAPSE_FRACTION else "semi-trivial"
    saddle = _result(grid, p, U, it, gnorm < opts.gtol, tag, bead=i, gtol=opts.gtol)
    level = float(energies.max())
    result = MountainPassResult(path, energies, saddle, level, ends, sweeps)
    if not saddle.converged:
        raise NonConvergence(f"climbing bead stalled at gradient norm {gnorm:.3e}", result)
    if not level > max(ends):
        raise NonConvergence(f"mountain-pass level {level:.10g} does not exceed the endpoints", result)
    return result
