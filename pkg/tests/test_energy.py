import json
import math

import numpy as np
import pytest

from bnls.energy import (
    ModelParams,
    StatePair,
    directional_derivative,
    eval_energies,
    gradient,
    nehari_identities,
    nehari_project,
    psi_prime_pairing,
)
from bnls.errors import GridMismatch, InvalidParameters, NonAdmissibleDirection, ZeroState
from bnls.radial import build_grid

from conftest import bump


@pytest.fixture(scope="module")
def small():
    return build_grid(2, 10.0, 256)


def random_pair(grid, rng, scale=1.0):
    r = grid.r
    comps = []
    for _ in range(2):
        c = rng.standard_normal(3)
        x0 = rng.uniform(0, 4, 3)
        v = sum(ci * np.exp(-((r - xi) ** 2)) for ci, xi in zip(c, x0))
        v = v * (1 - (r / grid.R) ** 2) ** 2
        comps.append(scale * v)
    return StatePair.from_array(grid, np.vstack(comps))


def test_zero_state_gives_zero_energies(small):
    rep = eval_energies(StatePair.zeros(small), ModelParams(beta=0.7))
    assert all(v == 0.0 for v in rep.to_json().values())


def test_zero_state_gradient_is_zero(small):
    g = gradient(StatePair.zeros(small), ModelParams(beta=0.7))
    assert not np.any(g.stack())


@pytest.mark.parametrize("beta", [-0.9, 0.0, 0.5, 3.0])
def test_semitrivial_energy_is_independent_of_beta(small, beta):
    v = bump(small)
    u = StatePair(v, small.field(np.zeros(small.M)))
    rep = eval_energies(u, ModelParams(beta=beta))
    ref = eval_energies(u, ModelParams(beta=0.0))
    assert rep.G == 0.0
    assert rep.J == pytest.approx(ref.I1, rel=1e-15)


def test_energy_report_definitions(small, rng):
    p = ModelParams(lam1=1.3, lam2=0.7, mu1=2.0, mu2=0.5, beta=-0.4)
    rep = eval_energies(random_pair(small, rng), p)
    assert rep.J == pytest.approx(rep.I1 + rep.I2 - p.beta * rep.G, rel=1e-13)
    assert rep.Psi == pytest.approx(rep.norm2_total - 4 * rep.F - 4 * p.beta * rep.G, rel=1e-12, abs=1e-12)
    assert rep.norm2_total == pytest.approx(rep.norm2_1 + rep.norm2_2, rel=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_quartic_homogeneity(small, seed):
    rng = np.random.default_rng(seed)
    u = random_pair(small, rng)
    p = ModelParams(beta=1.1)
    a, b = eval_energies(u, p), eval_energies(u * 2.0, p)
    assert b.F == pytest.approx(16 * a.F, rel=1e-12)
    assert b.G == pytest.approx(16 * a.G, rel=1e-12)


@pytest.mark.parametrize("t", [0.5, 2.0])
def test_psi_scaling(small, rng, t):
    p = ModelParams(mu1=1.5, beta=0.3)
    u = random_pair(small, rng)
    a = eval_energies(u, p)
    b = eval_energies(u * t, p)
    expected = t**2 * a.norm2_total - t**4 * (4 * a.F + 4 * p.beta * a.G)
    assert b.Psi == pytest.approx(expected, rel=1e-11, abs=1e-11 * b.norm2_total)


def test_energy_report_json_keys(small, rng):
    rep = eval_energies(random_pair(small, rng), ModelParams())
    keys = {"I1", "I2", "F", "G", "J", "Psi", "norm2_total", "norm2_1", "norm2_2"}
    assert set(rep.to_json()) == keys
    json.dumps(rep.to_json())


def test_grid_mismatch_is_rejected(small):
    with pytest.raises(GridMismatch):
        eval_energies(StatePair.zeros(small), ModelParams(N=3))
    other = build_grid(2, 10.0, 128)
    with pytest.raises(GridMismatch):
        StatePair(bump(small), bump(other))


@pytest.mark.parametrize(
    "kwargs", [{"lam1": 0.0}, {"mu2": -1.0}, {"beta": math.nan}, {"N": 9}, {"sigma": 2}]
)
def test_invalid_parameters(kwargs):
    with pytest.raises(InvalidParameters):
        ModelParams(**kwargs)


def test_gradient_matches_central_differences(small, rng):
    p = ModelParams(lam1=1.0, lam2=2.0, mu1=1.0, mu2=3.0, beta=0.8)
    u = random_pair(small, rng)
    h = random_pair(small, rng, scale=10.0)
    exact = directional_derivative(u, h, p)
    errs = []
    for eps in (1e-4, 1e-5):
        fd = (eval_energies(u + h * eps, p).J - eval_energies(u - h * eps, p).J) / (2 * eps)
        errs.append(abs(fd - exact))
    order = math.log10(errs[0] / errs[1])
    assert order >= 1.9


def test_gradient_at_ground_state_is_small(grid, ground, U):
    u = StatePair(U, grid.field(np.zeros(grid.M)))
    g = gradient(u, ModelParams())
    res = math.sqrt(grid.weights @ g.u1.values**2)
    assert res < ground.diagnostics["tol"]
    assert not np.any(g.u2.values)


def test_nehari_project_closed_form_example(small):
    v1 = bump(small)
    p0 = ModelParams()
    n2 = eval_energies(StatePair(v1, v1 * 0.0), p0).norm2_total
    v1 = v1 * math.sqrt(2.0 / n2)
    quart = eval_energies(StatePair(v1, v1 * 0.0), p0).F * 4.0
    p = ModelParams(mu1=8.0 / quart)
    v = StatePair(v1, v1 * 0.0)
    rep = eval_energies(v, p)
    assert rep.norm2_total == pytest.approx(2.0, rel=1e-14)
    assert 4 * rep.F == pytest.approx(8.0, rel=1e-14)
    t, _ = nehari_project(v, p)
    assert t == pytest.approx(0.5, rel=1e-14)


def test_nehari_project_ground_state_is_fixed(grid, U):
    t, _ = nehari_project(StatePair(U, grid.field(np.zeros(grid.M))), ModelParams())
    assert t == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("beta", [-0.9, 0.0, 0.4, 2.5])
def test_projected_state_satisfies_nehari_identities(small, rng, beta):
    p = ModelParams(lam2=2.0, mu1=1.5, beta=beta)
    t, u = nehari_project(random_pair(small, rng), p)
    assert t > 0
    rep = eval_energies(u, p)
    assert abs(rep.Psi) / rep.norm2_total < 1e-10
    assert rep.J == pytest.approx(0.25 * rep.norm2_total, rel=1e-10)
    assert all(v < 1e-8 for v in nehari_identities(u, p).values())
    assert psi_prime_pairing(u, p) == pytest.approx(-2 * rep.norm2_total, rel=1e-8)


def test_nehari_project_rejects_zero(small):
    with pytest.raises(ZeroState):
        nehari_project(StatePair.zeros(small), ModelParams())


def test_nehari_project_rejects_non_admissible_direction(small):
    v = bump(small)
    with pytest.raises(NonAdmissibleDirection):
        nehari_project(StatePair(v, v), ModelParams(beta=-1.0))
    with pytest.raises(NonAdmissibleDirection):
        nehari_project(StatePair(v, v), ModelParams(beta=-3.0))


def test_semitrivial_direction_is_admissible_for_any_beta(small):
    v = bump(small)
    t, _ = nehari_project(StatePair(v, v * 0.0), ModelParams(beta=-50.0))
    assert t > 0
