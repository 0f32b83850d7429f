import math

import numpy as np
import pytest

from bnls.energy import ModelParams, eval_energies
from bnls.errors import DomainTooSmall, NonConvergence, NonPositiveLambda, WindowTooNarrow
from bnls.radial import build_grid, integrate_power, norm_h
from bnls.scalar import (
    SolveOptions,
    embed,
    energy_scaling_factor,
    multistart,
    rescale_ground_state,
    scalar_nehari_defect,
    scalar_residual,
    sign_change_locations,
    sign_structure,
    similar_grid,
    solve_scalar_ground_state,
    tail_fit,
)

from conftest import bump


def test_ground_state_converges(ground):
    assert ground.converged
    assert ground.residual < ground.diagnostics["tol"] <= 1e-8
    assert abs(ground.omega) < 1e-8
    assert ground.tag == "scalar-ground"


def test_sign_convention(U):
    assert U.values[0] > 0


def test_nehari_identity(U):
    assert abs(scalar_nehari_defect(U, 1.0, 1.0)) < 1e-6
    assert norm_h(U, 1.0) == pytest.approx(integrate_power(U, 4), rel=1e-6)


def test_energy_is_positive_quarter_norm(ground, U):
    assert ground.J > 0
    assert ground.J == pytest.approx(0.25 * norm_h(U, 1.0), rel=1e-6)


def test_level_consistency(ground):
    quarter = 0.25 * ground.energy.norm2_1
    assert ground.diagnostics["reduced_functional"] == pytest.approx(quarter, rel=1e-8)


def test_mu_scaling_halves_profile(grid, U):
    U4 = solve_scalar_ground_state(1.0, 4.0, grid).state
    err = np.abs(U4.values - 0.5 * U.values).max() / np.abs(0.5 * U.values).max()
    assert err < 1e-5


def test_rescale_identity(U):
    V = rescale_ground_state(U, 1.0, 1.0)
    assert V.grid.same_as(U.grid)
    assert np.array_equal(V.values, U.values)


def test_rescale_peak_and_compression(U):
    V = rescale_ground_state(U, 16.0, 1.0)
    assert V.grid.R == pytest.approx(U.grid.R / 2, rel=1e-15)
    assert np.allclose(V.grid.r, U.grid.r / 2, rtol=1e-15)
    assert V.values[0] == pytest.approx(4 * U.values[0], rel=1e-15)


def test_rescale_interpolates_on_other_grids(U):
    target = build_grid(2, 10.0, 700)
    V = rescale_ground_state(U, 16.0, 1.0, target)
    assert V.grid is target
    assert np.abs(V.values).max() == pytest.approx(4 * np.abs(U.values).max(), rel=1e-3)
    assert V.values[0] > 0


def test_rescale_rejects_small_domain(U):
    with pytest.raises(DomainTooSmall):
        rescale_ground_state(U, 16.0, 1.0, build_grid(2, 20.0, 512))


@pytest.mark.parametrize("lam,mu", [(2.0, 1.0), (1.0, 3.0)])
def test_rescaled_residual_stays_small(ground, U, lam, mu):
    V = rescale_ground_state(U, lam, mu)
    assert scalar_residual(V, lam, mu) < 10 * ground.residual


@pytest.mark.parametrize("lam,mu", [(2.0, 1.0), (1.0, 3.0)])
def test_energy_scaling_law(grid, lam, mu):
    source = build_grid(2, grid.R * lam**0.25, grid.M)
    base = solve_scalar_ground_state(1.0, 1.0, source)
    assert similar_grid(source, lam).same_as(grid)
    direct = solve_scalar_ground_state(lam, mu, grid)
    assert direct.J == pytest.approx(energy_scaling_factor(lam, mu, 2) * base.J, rel=1e-5)
    via = rescale_ground_state(base.state, lam, mu)
    p = ModelParams(lam1=lam, lam2=lam, mu1=mu, mu2=mu)
    assert eval_energies(embed(via), p).J == pytest.approx(direct.J, rel=1e-4)


def test_tail_fit_matches_predicted_bundle(U):
    fit = tail_fit(U, 2)
    s = 1 / math.sqrt(2)
    assert fit.a == pytest.approx(s, rel=0.05)
    assert fit.k == pytest.approx(s, rel=0.05)
    assert fit.delta == pytest.approx(-0.5, rel=0.15)
    assert fit.zero_spacing == pytest.approx(math.pi * math.sqrt(2), rel=0.05)
    assert fit.r_b < U.grid.R
    assert set(fit.to_json()) >= {"window", "a", "k", "delta", "C1", "C2", "residual"}


def test_tail_fit_rejects_non_oscillatory_field(grid):
    with pytest.raises(WindowTooNarrow):
        tail_fit(bump(grid))


def test_ground_state_changes_sign(U):
    n, first = sign_structure(U)
    assert n >= 1
    assert 0 < first < U.grid.R


def test_constant_field_has_no_sign_change(grid):
    assert sign_structure(grid.field(np.ones(grid.M))) == (0, None)


def test_sign_changes_colocate_with_tail_zeros(U):
    fit = tail_fit(U)
    h = U.grid.h
    zeros = sign_change_locations(U)
    for z in fit.zeros:
        assert np.min(np.abs(zeros - z)) < h


def test_grid_robustness_in_resolution(ground):
    fine = solve_scalar_ground_state(1.0, 1.0, build_grid(2, 27.0, 2048))
    assert abs(fine.J - ground.J) / ground.J < 1e-3


def test_grid_robustness_in_radius(ground, grid):
    wide = build_grid(2, 54.0, 2 * grid.M)
    assert wide.h == pytest.approx(grid.h, rel=1e-2)
    res = solve_scalar_ground_state(1.0, 1.0, wide)
    assert abs(res.J - ground.J) / ground.J < 1e-6


@pytest.mark.parametrize("lam,mu", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0)])
def test_non_positive_parameters(grid, lam, mu):
    with pytest.raises(NonPositiveLambda):
        solve_scalar_ground_state(lam, mu, grid)


def test_iteration_cap_raises_with_partial_result():
    g = build_grid(2, 27.0, 256)
    with pytest.raises(NonConvergence) as info:
        solve_scalar_ground_state(1.0, 1.0, g, SolveOptions(max_iter=2))
    assert info.value.result is not None
    assert not info.value.result.converged


def test_multistart_agrees(ground):
    g = build_grid(2, 27.0, 512)
    results, spread = multistart(1.0, 1.0, g, seeds=range(5))
    assert len(results) == 5
    assert spread < 1e-6
    assert results[0].J == pytest.approx(ground.J, rel=1e-3)


def test_deterministic(grid):
    a = solve_scalar_ground_state(1.0, 1.0, build_grid(2, 27.0, 256), SolveOptions(seed=3))
    b = solve_scalar_ground_state(1.0, 1.0, build_grid(2, 27.0, 256), SolveOptions(seed=3))
    assert np.array_equal(a.state.values, b.state.values)


def test_summary_is_flat(ground):
    s = ground.summary()
    assert s["tag"] == "scalar-ground"
    assert "energy" in s and "tol" in s
