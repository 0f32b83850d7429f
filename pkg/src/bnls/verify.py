"""Acceptance checks.  Each check returns measured quantities next to their tolerances."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .energy import (
    ModelParams,
    StatePair,
    directional_derivative,
    eval_energies,
    nehari_identities,
    nehari_project,
)
from .errors import NonAdmissibleDirection
from .fibering import random_admissibility_search, random_pair_fields
from .radial import RadialField, build_grid, integrate_power, norm_h
from .scalar import (
    energy_scaling_factor,
    multistart,
    rescale_ground_state,
    sign_structure,
    solve_scalar_ground_state,
    tail_fit,
)
from .spectral import category_count, clamped_spectrum, thresholds
from .system import (
    classify_semitrivial,
    l4_fractions,
    semitrivial_states,
    solve_global_min,
    solve_mountain_pass,
)


@dataclass
class Measure:
    name: str
    value: float
    tol: float
    kind: str = "<"  # value < tol, or ">" / ">=" / "=="

    def __post_init__(self):
        self.value = float(self.value)
        self.tol = float(self.tol)

    @property
    def ok(self) -> bool:
        v, t = self.value, self.tol
        if not math.isfinite(v):
            return False
        return {"<": v < t, ">": v > t, ">=": v >= t, "==": v == t}[self.kind]

    def to_json(self) -> dict:
        return {"name": self.name, "value": self.value, "tolerance": self.tol, "test": self.kind, "pass": self.ok}


@dataclass
class CheckResult:
    number: int
    title: str
    measures: list = field(default_factory=list)
    seconds: float = 0.0
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and bool(self.measures) and all(m.ok for m in self.measures)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        detail = "; ".join(f"{m.name}={m.value:.3g} ({m.kind} {m.tol:.3g})" for m in self.measures)
        if self.error:
            detail = f"error: {self.error}"
        return f"[{status}] criterion {self.number}: {self.title} | {detail} | {self.seconds:.1f}s"

    def to_json(self) -> dict:
        return {
            "criterion": self.number,
            "title": self.title,
            "pass": self.passed,
            "seconds": self.seconds,
            "error": self.error,
            "measures": [m.to_json() for m in self.measures],
        }


@dataclass
class VerifySettings:
    N: int = 2
    R: float = 27.0
    M: int = 1024
    seed: int = 0


def _rel(a, b) -> float:
    return abs(a - b) / abs(b)


def check_nehari(s: VerifySettings) -> list:
    g = build_grid(s.N, s.R, s.M)
    rng = np.random.default_rng(s.seed)
    worst = dict.fromkeys(("psi", "J_quarter_norm", "J_F_beta_G", "psi_prime"), 0.0)
    for _ in range(50):
        beta = float(rng.uniform(-0.95, 4.0))
        p = ModelParams(
            lam1=float(rng.uniform(0.5, 2)), lam2=float(rng.uniform(0.5, 2)),
            mu1=1.0, mu2=1.0, beta=beta, N=s.N,
        )
        a, b = random_pair_fields(g, 1, rng)
        _, u = nehari_project(StatePair(RadialField(g, a[0]), RadialField(g, b[0])), p)
        for k, v in nehari_identities(u, p).items():
            worst[k] = max(worst[k], v)
    return [
        Measure("|Psi|/||u||^2", worst["psi"], 1e-10),
        Measure("|J-||u||^2/4|/J", worst["J_quarter_norm"], 1e-8),
        Measure("|J-(F+bG)|/J", worst["J_F_beta_G"], 1e-8),
        Measure("|(Psi'u|u)+2||u||^2|/||u||^2", worst["psi_prime"], 1e-8),
    ]


def check_gradient(s: VerifySettings) -> list:
    g = build_grid(s.N, s.R, s.M)
    rng = np.random.default_rng(s.seed + 1)
    p = ModelParams(beta=0.7, N=s.N)
    eps = (1e-3, 1e-4, 1e-5)
    orders = []
    for _ in range(10):
        u = StatePair.from_array(g, np.vstack(random_pair_fields(g, 1, rng)))
        # a long direction keeps the O(eps^2) term above double-precision cancellation at eps=1e-5
        h = StatePair.from_array(g, 10.0 * np.vstack(random_pair_fields(g, 1, rng)))
        exact = directional_derivative(u, h, p)
        errs = []
        for e in eps:
            fd = (eval_energies(u + h * e, p).J - eval_energies(u - h * e, p).J) / (2 * e)
            errs.append(abs(fd - exact))
        orders += [math.log10(errs[0] / errs[1]), math.log10(errs[1] / errs[2])]
    return [Measure("min observed order", min(orders), 1.9, ">=")]


def check_scalar(s: VerifySettings) -> list:
    g = build_grid(s.N, s.R, s.M)
    r = solve_scalar_ground_state(1.0, 1.0, g)
    U = r.state
    nehari = _rel(norm_h(U, 1.0), integrate_power(U, 4))
    _, spread = multistart(1.0, 1.0, g, seeds=range(5))
    return [
        Measure("strong residual", r.residual, 1e-8),
        Measure("| ||U||^2 / int U^4 - 1 |", nehari, 1e-6),
        Measure("multistart energy spread", spread, 1e-6),
    ]


def check_tail(s: VerifySettings) -> list:
    g = build_grid(s.N, s.R, s.M)
    U = solve_scalar_ground_state(1.0, 1.0, g).state
    fit = tail_fit(U)
    changes, _ = sign_structure(U)
    return [
        Measure("decay rate rel. err", _rel(fit.a, 1 / math.sqrt(2)), 0.05),
        Measure("zero spacing rel. err", _rel(fit.zero_spacing, math.pi * math.sqrt(2)), 0.05),
        Measure("envelope exponent rel. err", _rel(fit.delta, -(s.N - 1) / 2), 0.15),
        Measure("sign changes", changes, 1, ">="),
    ]


def check_scaling(s: VerifySettings) -> list:
    g = build_grid(s.N, s.R, s.M)
    out = []
    for lam, mu in ((2.0, 1.0), (1.0, 3.0)):
        # source grid chosen so the rescaled profile lands exactly on g
        src = build_grid(s.N, s.R * lam**0.25, s.M)
        base = solve_scalar_ground_state(1.0, 1.0, src)
        Ur = rescale_ground_state(base.state, lam, mu, g)
        direct = solve_scalar_ground_state(lam, mu, g)
        Ud = direct.state.values
        out.append(Measure(f"({lam:g},{mu:g}) pointwise rel. diff", float(np.max(np.abs(Ur.values - Ud)) / np.max(np.abs(Ud))), 1e-4))
        law = base.J * energy_scaling_factor(lam, mu, s.N)
        out.append(Measure(f"({lam:g},{mu:g}) energy law rel. err", _rel(direct.J, law), 1e-4))
    return out


def beam_oracle(R: float) -> float:
    kappa = brentq(lambda k: math.cos(k) * math.cosh(k) - 1.0, 4.0, 5.0)
    return (kappa / (2 * R)) ** 4


def check_spectral(s: VerifySettings) -> list:
    beam = clamped_spectrum(build_grid(1, 5.0, 512), 1).alphas[0]
    scaled = np.array([clamped_spectrum(build_grid(s.N, R, s.M), 5).alphas * R**4 for R in (10.0, 20.0, 40.0)])
    law = float(np.max(np.abs(scaled / scaled[0] - 1)))
    counts = [category_count(build_grid(s.N, R, s.M), 1.0, 1.05) for R in (10.0, 20.0, 40.0)]
    monotone = all(a <= b for a, b in zip(counts, counts[1:]))
    return [
        Measure("beam alpha_1 rel. err", _rel(beam, beam_oracle(5.0)), 1e-3),
        Measure("alpha_k R^4 spread (k<=5)", law, 1e-5),
        Measure("category count monotone in R", float(monotone), 1.0, "=="),
    ]


BETA_SWEEP = (-0.5, 0.0, 0.5, 1.5, 3.0)


def check_thresholds(s: VerifySettings) -> list:
    g = build_grid(s.N, s.R, s.M)
    p = ModelParams(N=s.N)
    u1, u2 = semitrivial_states(p, g)
    c = thresholds(p, u1.u1, u2.u2)
    verdicts = [classify_semitrivial(1, p.with_beta(b), c).verdict for b in BETA_SWEEP]
    flips = sum(a != b for a, b in zip(verdicts, verdicts[1:]))
    return [
        Measure("|S1^2/S2^2 - 1|", _rel(c.S1sq, c.S2sq), 1e-6),
        Measure("S^2 - mu", c.S1sq - p.mu1, 1e-10),
        Measure("verdict flips along beta sweep", flips, 1, "=="),
    ]


def check_global_min(s: VerifySettings) -> list:
    g = build_grid(s.N, s.R, s.M)
    p = ModelParams(beta=3.0, N=s.N)
    u1, u2 = semitrivial_states(p, g)
    J1, J2 = (eval_energies(u, p).J for u in (u1, u2))
    c = thresholds(p, u1.u1, u2.u2)
    r = solve_global_min(p, g, constants=c)
    frac = l4_fractions(g, r.state.stack())
    return [
        Measure("J(min)/J(u1) rel. err vs 0.5", _rel(r.J / J1, 0.5), 1e-3),
        Measure("J(min) - min J(u_j)", r.J - min(J1, J2), 0.0),
        Measure("smallest L4 mass fraction", float(frac.min()), 0.1, ">="),
    ]


def check_mountain_pass(s: VerifySettings) -> list:
    g = build_grid(s.N, s.R, s.M)
    p = ModelParams(beta=-0.3, N=s.N)
    u1, u2 = semitrivial_states(p, g)
    c = thresholds(p, u1.u1, u2.u2)
    mp = solve_mountain_pass(p, g, constants=c)
    top = max(mp.endpoint_energies)
    p0 = p.with_beta(0.0)
    mp0 = solve_mountain_pass(p0, g, constants=c)
    I1 = eval_energies(u1, p0).I1
    I2 = eval_energies(u2, p0).I2
    return [
        Measure("beta=-0.3: c - max J(u_j)", mp.level - top, 1e-6, ">"),
        Measure("beta=-0.3: constrained gradient norm", mp.saddle.diagnostics["constrained_gradient_norm"], 1e-6),
        Measure("beta=-0.3: Lambda - beta", c.Lambda - p.beta, 0.0, ">"),
        Measure("beta=0: c vs I1+I2 rel. err", _rel(mp0.level, I1 + I2), 1e-3),
    ]


def check_admissibility(s: VerifySettings) -> list:
    g = build_grid(s.N, s.R, s.M)
    p = ModelParams(beta=-0.99, N=s.N)
    bad = random_admissibility_search(p, g, n=100_000, seed=s.seed)
    v = RadialField(g, np.exp(-(g.r**2)) * (1 - (g.r / g.R) ** 2) ** 2)
    try:
        nehari_project(StatePair(v, v), p.with_beta(-1.0))
        raised = 0.0
    except NonAdmissibleDirection:
        raised = 1.0
    return [
        Measure("counterexamples at beta=-0.99", bad, 0, "=="),
        Measure("equality direction rejected at beta=-1", raised, 1.0, "=="),
    ]


CHECKS = {
    1: ("Nehari identities after projection", check_nehari),
    2: ("gradient matches central differences", check_gradient),
    3: ("scalar ground state", check_scalar),
    4: ("tail asymptotics and sign changes", check_tail),
    5: ("scaling laws", check_scaling),
    6: ("clamped spectrum", check_spectral),
    7: ("thresholds and classification", check_thresholds),
    8: ("global Nehari minimiser", check_global_min),
    9: ("mountain pass", check_mountain_pass),
    10: ("admissibility", check_admissibility),
}


def run_check(number: int, settings: VerifySettings | None = None) -> CheckResult:
    settings = settings or VerifySettings()
    title, fn = CHECKS[number]
    out = CheckResult(number, title)
    t0 = time.perf_counter()
    try:
        out.measures = fn(settings)
    except Exception as exc:  # a failed check is reported, not raised
        out.error = f"{type(exc).__name__}: {exc}"
    out.seconds = time.perf_counter() - t0
    return out


def run_all(settings: VerifySettings | None = None, numbers=None) -> list:
    return [run_check(n, settings) for n in (numbers or sorted(CHECKS))]
