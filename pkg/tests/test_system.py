import numpy as np
import pytest

from bnls.energy import ModelParams, StatePair, eval_energies, nehari_identities
from bnls.errors import DegenerateThreshold, FellToSemitrivial, GridMismatch, InvalidParameters
from bnls.radial import build_grid
from bnls.scalar import scalar_residual, solve_scalar_ground_state
from bnls.spectral import SobolevConstants
from bnls.system import (
    SystemOptions,
    classify_semitrivial,
    residual_check,
    semitrivial_states,
    solve_global_min,
    solve_mountain_pass,
)


@pytest.fixture(scope="module")
def semis(grid, sym_params):
    return semitrivial_states(sym_params, grid)


@pytest.fixture(scope="module")
def mp_results(grid):
    return {beta: solve_mountain_pass(ModelParams(beta=beta), grid) for beta in (0.0, -0.3)}


def assert_on_nehari(u, p):
    assert all(v < 1e-8 for v in nehari_identities(u, p).values())


@pytest.mark.parametrize("beta", [-0.5, 0.0, 7.0])
def test_semitrivial_residual_is_beta_independent(grid, semis, beta):
    u1, _ = semis
    ref = residual_check(u1, ModelParams())
    assert residual_check(u1, ModelParams(beta=beta)) == ref
    assert ref[1] == 0.0
    assert ref[0] == pytest.approx(scalar_residual(u1.u1, 1.0, 1.0), rel=1e-12)
    assert ref[0] < 1e-8


def test_semitrivial_energy_is_quarter_norm(semis, sym_params):
    u1, _ = semis
    rep = eval_energies(u1, sym_params)
    assert rep.J == pytest.approx(0.25 * rep.norm2_1, rel=1e-6)


def test_symmetric_semitrivial_energies_agree(semis, sym_params):
    u1, u2 = semis
    assert eval_energies(u1, sym_params).J == pytest.approx(eval_energies(u2, sym_params).J, rel=1e-6)


def test_semitrivial_states_use_component_parameters(grid):
    p = ModelParams(lam1=1.0, lam2=2.0, mu2=3.0)
    u1, u2 = semitrivial_states(p, grid)
    assert scalar_residual(u2.u2, 2.0, 3.0) < 1e-7
    assert not np.any(u2.u1.values)


def test_residual_check_zero_state(grid):
    assert residual_check(StatePair.zeros(grid), ModelParams(beta=1.0)) == (0.0, 0.0)


def test_residual_check_grid_mismatch(grid):
    with pytest.raises(GridMismatch):
        residual_check(StatePair.zeros(grid), ModelParams(N=3))


@pytest.mark.parametrize("which", [1, 2])
def test_classify_negative_coupling_gives_minimum(sym_constants, which):
    c = classify_semitrivial(which, ModelParams(beta=-0.5), sym_constants)
    assert c.verdict == "strict-local-min"
    assert c.witness is None
    assert c.hessian_min > 0


@pytest.mark.parametrize("which", [1, 2])
def test_classify_strong_coupling_gives_saddle(sym_constants, which):
    c = classify_semitrivial(which, ModelParams(beta=2.0), sym_constants)
    assert c.verdict == "saddle"
    assert c.witness is not None
    assert c.form_value < 0
    assert c.form_value == pytest.approx(c.hessian_min, rel=1e-6)
    assert c.to_json()["state"] == f"u{which}-semitrivial"


def test_classify_degenerate_threshold(sym_constants):
    with pytest.raises(DegenerateThreshold):
        classify_semitrivial(1, ModelParams(beta=sym_constants.S1sq), sym_constants)


def test_classify_is_witness_scale_invariant(sym_constants):
    s = sym_constants
    scaled = SobolevConstants(
        s.S1sq, s.S2sq, s.Lambda, s.Lambda_prime, s.phi1 * 5.0, s.phi2 * -0.1, s.residuals, s.U1, s.U2
    )
    for beta in (-0.5, 2.0):
        a = classify_semitrivial(1, ModelParams(beta=beta), s)
        b = classify_semitrivial(1, ModelParams(beta=beta), scaled)
        assert a.verdict == b.verdict
        assert b.form_value == pytest.approx(a.form_value, rel=1e-10)


def test_classify_rejects_bad_index(sym_constants):
    with pytest.raises(ValueError):
        classify_semitrivial(3, ModelParams(), sym_constants)


def test_global_min_symmetric_strong_coupling(grid, semis, sym_constants):
    p = ModelParams(beta=3.0)
    res = solve_global_min(p, grid, constants=sym_constants)
    J1 = eval_energies(semis[0], p).J
    assert res.converged
    assert res.J / J1 == pytest.approx(0.5, rel=1e-3)
    assert res.tag == "coupled"
    assert res.diagnostics["below_semitrivial"]
    assert_on_nehari(res.state, p)
    assert max(residual_check(res.state, p)) < res.diagnostics["tol"]


def test_global_min_matches_symmetric_ansatz(grid):
    p = ModelParams(beta=3.0)
    res = solve_global_min(p, grid)
    W = solve_scalar_ground_state(1.0, 4.0, grid).state
    assert np.abs(res.state.u1.values - W.values).max() < 1e-4 * np.abs(W.values).max()


def test_global_min_collapses_without_coupling(grid, semis):
    p = ModelParams(beta=0.0)
    with pytest.raises(FellToSemitrivial) as info:
        solve_global_min(p, grid)
    J1 = eval_energies(semis[0], p).J
    assert info.value.result.J == pytest.approx(J1, rel=1e-4)


def test_global_min_allow_semitrivial(grid, semis):
    p = ModelParams(beta=0.0)
    res = solve_global_min(p, grid, SystemOptions(allow_semitrivial=True))
    assert res.J == pytest.approx(eval_energies(semis[0], p).J, rel=1e-4)
    assert min(res.diagnostics["l4_fraction"]) < 1e-10


def test_global_min_just_above_threshold(grid, semis, sym_constants):
    p = ModelParams(beta=sym_constants.Lambda_prime + 0.1)
    res = solve_global_min(p, grid, constants=sym_constants)
    assert res.J < eval_energies(semis[0], p).J - 1e-8
    assert min(res.diagnostics["l4_fraction"]) > 1e-10


def test_global_min_rejects_unbounded_coupling(grid):
    with pytest.raises(InvalidParameters):
        solve_global_min(ModelParams(beta=-1.0), grid)


def test_global_min_is_deterministic():
    g = build_grid(2, 27.0, 256)
    p = ModelParams(beta=3.0)
    a = solve_global_min(p, g, SystemOptions(seed=5))
    b = solve_global_min(p, g, SystemOptions(seed=5))
    assert a.iterations == b.iterations
    assert a.J == b.J


def test_mountain_pass_decoupled_level(semis, mp_results):
    p = ModelParams()
    mp = mp_results[0.0]
    expected = eval_energies(semis[0], p).J + eval_energies(semis[1], p).J
    assert mp.level == pytest.approx(expected, rel=1e-3)
    assert mp.saddle.tag == "coupled"


@pytest.mark.parametrize("beta", [0.0, -0.3])
def test_mountain_pass_level_exceeds_endpoints(mp_results, beta):
    mp = mp_results[beta]
    assert mp.level > max(mp.endpoint_energies)
    assert mp.saddle.converged


@pytest.mark.parametrize("beta", [0.0, -0.3])
def test_mountain_pass_saddle_is_constrained_critical(mp_results, beta):
    p = ModelParams(beta=beta)
    mp = mp_results[beta]
    assert abs(mp.saddle.omega) < 1e-6
    assert abs(mp.saddle.energy.Psi) / mp.saddle.energy.norm2_total < 1e-8
    assert_on_nehari(mp.saddle.state, p)


@pytest.mark.parametrize("beta", [0.0, -0.3])
def test_mountain_pass_beads_stay_on_nehari(grid, mp_results, beta):
    p = ModelParams(beta=beta)
    mp = mp_results[beta]
    assert len(mp.path) == 17
    for U in mp.path:
        assert_on_nehari(StatePair.from_array(grid, U), p)
    assert not mp.path[0][1].any()
    assert not mp.path[-1][0].any()


def test_mountain_pass_summary(mp_results):
    s = mp_results[0.0].summary()
    assert len(s["bead_energies"]) == 17
    assert s["saddle"]["tag"] == "coupled"
