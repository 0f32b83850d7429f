"""Fibering maps ``r -> J(r v)`` along fixed directions.

Scalar case (one equation, parameters ``lam, mu``)::

    phi_v(r) = r^2/2 * A - r^4/4 * B,   A = int |Delta v|^2 + lam int v^2,  B = mu int v^4

with the unique maximiser ``r^2 = A / B`` and reduced value ``A^2 / (4B)``.
System case: ``Phi_v(r) = r^2/2 ||v||^2 - r^4 (F(v) + beta G(v))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .energy import ADMISSIBLE_RTOL, ModelParams, StatePair, eval_energies
from .errors import DegenerateQuartic, NonAdmissibleDirection, NonPositiveQuadratic, ZeroDirection
from .radial import RadialField, RadialGrid, bilap_energy, integrate_power

QUARTIC_FLOOR = 1e-30


@dataclass
class FiberingProfile:
    r: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    r_crit: float
    phi_at_crit: float
    second_derivative_at_crit: float
    r_max: float | None = None
    K: float | None = None
    direction: object = field(default=None, repr=False)

    def summary(self) -> dict:
        out = {
            "r_crit": self.r_crit,
            "phi_crit": self.phi_at_crit,
            "d2phi_crit": self.second_derivative_at_crit,
        }
        if self.r_max is not None:
            out["r_max"] = self.r_max
        if self.K is not None:
            out["K"] = self.K
        return out

    def sign_changes_of_slope(self) -> int:
        d = np.diff(self.phi)
        s = np.sign(d[d != 0])
        return int(np.count_nonzero(s[1:] != s[:-1]))


def _scalar_coeffs(v: RadialField, lam: float, mu: float) -> tuple[float, float]:
    quartic = mu * integrate_power(v, 4)
    if not np.any(v.values[:-1]):
        raise ZeroDirection("direction vanishes identically")
    if quartic < QUARTIC_FLOOR:
        raise DegenerateQuartic(f"mu * int v^4 = {quartic:.3e} is numerically zero")
    quad = bilap_energy(v) + lam * integrate_power(v, 2)
    return quad, quartic


def _default_samples(r_crit: float, n: int = 200) -> np.ndarray:
    return np.geomspace(1e-3 * r_crit, 3 * r_crit, n)


def scalar_critical_r(v: RadialField, lam: float, mu: float = 1.0) -> float:
    A, B = _scalar_coeffs(v, lam, mu)
    if A <= 0:
        raise NonPositiveQuadratic(f"quadratic part {A:.3e} must be positive")
    return math.sqrt(A / B)


def scalar_reduced_functional(v: RadialField, lam: float, mu: float = 1.0) -> float:
    A, B = _scalar_coeffs(v, lam, mu)
    if A <= 0:
        raise NonPositiveQuadratic(f"quadratic part {A:.3e} must be positive")
    return 0.25 * A * A / B


def scalar_profile_from_coeffs(A: float, B: float, r) -> FiberingProfile:
    r = np.asarray(r, dtype=float)
    rc = math.sqrt(A / B)
    return FiberingProfile(
        r=r,
        phi=0.5 * r**2 * A - 0.25 * r**4 * B,
        dphi=r * A - r**3 * B,
        r_crit=rc,
        phi_at_crit=0.25 * A * A / B,
        second_derivative_at_crit=A - 3 * rc**2 * B,
    )


def scalar_profile(v: RadialField, lam: float, mu: float = 1.0, r_grid=None) -> FiberingProfile:
    A, B = _scalar_coeffs(v, lam, mu)
    if A <= 0:
        raise NonPositiveQuadratic(f"quadratic part {A:.3e} must be positive")
    rc = math.sqrt(A / B)
    prof = scalar_profile_from_coeffs(A, B, _default_samples(rc) if r_grid is None else r_grid)
    prof.direction = v
    return prof


def scalar_rmax_and_K(v: RadialField, ell1_hat: float) -> tuple[float, float]:
    """Maximiser of ``H_v(r) = r^2/2 int|Delta v|^2 - r^4/4 int v^4`` and ``K = 2/ell1_hat``."""
    quartic = integrate_power(v, 4)
    if quartic < QUARTIC_FLOOR:
        raise DegenerateQuartic(f"int v^4 = {quartic:.3e} is numerically zero")
    return math.sqrt(bilap_energy(v) / quartic), 2.0 / ell1_hat


def scalar_H_at_rmax(v: RadialField) -> float:
    quartic = integrate_power(v, 4)
    if quartic < QUARTIC_FLOOR:
        raise DegenerateQuartic(f"int v^4 = {quartic:.3e} is numerically zero")
    return 0.25 * bilap_energy(v) ** 2 / quartic


def _system_coeffs(v: StatePair, p: ModelParams) -> tuple[float, float]:
    rep = eval_energies(v, p)
    if rep.norm2_total <= 0:
        raise ZeroDirection("direction vanishes identically")
    denom = rep.F + p.beta * rep.G
    if denom <= ADMISSIBLE_RTOL * (rep.F + abs(p.beta) * rep.G):
        raise NonAdmissibleDirection(
            f"F + beta*G = {denom:.3e} <= 0 at beta={p.beta}"
        )
    return rep.norm2_total, denom


def system_critical_r(v: StatePair, p: ModelParams) -> float:
    n2, d = _system_coeffs(v, p)
    return math.sqrt(n2 / (4 * d))


def system_reduced_functional(v: StatePair, p: ModelParams) -> float:
    n2, d = _system_coeffs(v, p)
    return n2 * n2 / (16 * d)


def system_profile(v: StatePair, p: ModelParams, r_grid=None) -> FiberingProfile:
    n2, d = _system_coeffs(v, p)
    rc = math.sqrt(n2 / (4 * d))
    r = _default_samples(rc) if r_grid is None else np.asarray(r_grid, dtype=float)
    return FiberingProfile(
        r=r,
        phi=0.5 * r**2 * n2 - r**4 * d,
        dphi=r * n2 - 4 * r**3 * d,
        r_crit=rc,
        phi_at_crit=n2 * n2 / (16 * d),
        second_derivative_at_crit=n2 - 12 * rc**2 * d,
        direction=v,
    )


def admissibility(p: ModelParams) -> bool:
    """True iff ``beta > -sqrt(mu1 mu2)``, i.e. ``F + beta G > 0`` for all nonzero pairs."""
    return p.beta > -math.sqrt(p.mu1 * p.mu2)


def random_pair_fields(grid: RadialGrid, n: int, rng, bumps: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """``n`` random pairs of smooth clamped fields (sums of Gaussian bumps), shape ``(n, M)``."""

    def draw():
        c = rng.standard_normal((n, bumps))
        centres = rng.uniform(0.0, 0.6 * grid.R, (n, bumps))
        widths = rng.uniform(0.05, 0.3, (n, bumps)) * grid.R
        x = (grid.r[None, None, :] - centres[..., None]) / widths[..., None]
        out = np.einsum("nb,nbm->nm", c, np.exp(-(x**2)))
        out[:, -1] = 0.0
        return out

    return draw(), draw()


def random_admissibility_search(
    p: ModelParams, grid: RadialGrid, n: int = 100_000, seed: int = 0, chunk: int = 2000
) -> int:
    """Number of random field pairs with ``F(v) + beta G(v) <= 0`` (0 expected when admissible)."""
    rng = np.random.default_rng(seed)
    w = grid.weights
    bad = 0
    for start in range(0, n, chunk):
        m = min(chunk, n - start)
        u1, u2 = random_pair_fields(grid, m, rng)
        F = 0.25 * (p.mu1 * (u1**4 @ w) + p.mu2 * (u2**4 @ w))
        G = 0.5 * ((u1**2 * u2**2) @ w)
        bad += int(np.count_nonzero(F + p.beta * G <= 0))
    return bad
