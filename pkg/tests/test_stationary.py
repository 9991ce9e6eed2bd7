import math

import numpy as np
import pytest

from dampwave.models.config import ExpressionTerm, ModelConfig, Nonlinearity, SolverSettings
from dampwave.services.dynamics import State, random_initial_states, simulate
from dampwave.services.errors import StationaryDivergenceError
from dampwave.services.grid import GridFunction, h1_norm, sample, zeros
from dampwave.services.stationary import (
    OmegaLimitEstimate, StationarySolution, attractor_regularity_report, deduplicate, distance_to_set,
    enumerate_stationary, follow_heteroclinic, invariance_check, is_closed_under_negation,
    multistart_guesses, omega_limit, solve_stationary, stationary_residual,
)

from conftest import CUBIC, CUBIC_PLUS_LINEAR

BISTABLE = Nonlinearity(poly_coeffs=(0.0, -20.0, 0.0, 1.0))


def exact_profile(x):
    """Solution of −(|u′|u′)′ = 1 with zero boundary values."""
    return (2.0 / 3.0) * (0.5 ** 1.5 - np.abs(x - 0.5) ** 1.5)


def test_stationary_solution_with_constant_forcing():
    cfg = ModelConfig(p=3.0, g_terms=(ExpressionTerm(kind="pow", coeff=1.0, k=0.0),), grid_n=127)
    grid = cfg.grid
    guess = sample(grid, lambda x: 0.3 * np.sin(math.pi * x))
    sol = solve_stationary(guess, cfg)
    assert sol.residual_l2 < 1e-10
    np.testing.assert_allclose(sol.u.values, exact_profile(grid.nodes), atol=2e-3)


def test_monotone_problem_has_only_the_trivial_solution():
    cfg = ModelConfig(p=3.0, nonlinearity=CUBIC_PLUS_LINEAR, grid_n=31)
    sol = solve_stationary(sample(cfg.grid, lambda x: np.sin(math.pi * x)), cfg)
    assert h1_norm(sol.u) < 1e-6


def test_residual_of_zero_with_zero_forcing(cubic_cfg):
    assert np.all(stationary_residual(zeros(cubic_cfg.grid), cubic_cfg) == 0.0)


def test_divergence_is_reported():
    cfg = ModelConfig(p=3.0, nonlinearity=BISTABLE, grid_n=31)
    settings = SolverSettings(stationary_max_iter=1)
    guess = sample(cfg.grid, lambda x: 3.0 * np.sin(3.0 * math.pi * x))
    with pytest.raises(StationaryDivergenceError) as info:
        solve_stationary(guess, cfg, settings)
    assert info.value.exit_code == 3
    assert info.value.residual > 0.0


def test_multistart_guesses_start_at_zero_then_come_in_pairs(grid):
    guesses = multistart_guesses(grid, 6, seed=1)
    assert len(guesses) == 7
    assert not np.any(guesses[0].values)
    for a, b in zip(guesses[1::2], guesses[2::2]):
        np.testing.assert_array_equal(a.values, -b.values)
    assert not np.array_equal(guesses[1].values, guesses[3].values)
    assert len(multistart_guesses(grid, 5, seed=1)) == 7


def test_deduplicate_merges_basin_hits(grid, sine):
    near = sine + GridFunction(grid, np.full(grid.n, 1e-9))
    merged = deduplicate([StationarySolution(sine, 0.0), StationarySolution(near, 0.0),
                          StationarySolution(-sine, 0.0)], tol=1e-6)
    assert len(merged) == 2
    assert [s.basin_hits for s in merged] == [2, 1]


def test_distance_to_empty_set_is_infinite(sine):
    assert distance_to_set(sine, []) == math.inf


def test_bistable_set_is_closed_under_negation():
    cfg = ModelConfig(p=3.0, nonlinearity=BISTABLE, grid_n=31)
    solutions = enumerate_stationary(cfg, n_starts=8, seed=0, threads=2)
    assert len(solutions) >= 3
    assert any(h1_norm(s.u) < 1e-12 for s in solutions)
    assert all(s.residual_l2 < 1e-10 for s in solutions)
    assert is_closed_under_negation(solutions, 1e-6)
    assert sum(s.basin_hits for s in solutions) <= 9


def test_degenerate_zero_is_found_once():
    cfg = ModelConfig(p=3.0, nonlinearity=CUBIC, grid_n=31)
    solutions = enumerate_stationary(cfg, n_starts=8, seed=0, threads=2)
    assert len(solutions) == 1
    assert h1_norm(solutions[0].u) < 1e-7
    assert solutions[0].basin_hits == 9


def test_newton_polishes_toward_a_degenerate_root():
    cfg = ModelConfig(p=3.0, nonlinearity=CUBIC, grid_n=31)
    settings = SolverSettings()
    sol = solve_stationary(sample(cfg.grid, lambda x: 1e-6 * np.sin(math.pi * x)), cfg, settings)
    # the residual is already below tolerance at the start; the update norm decides
    assert sol.iterations > 0
    assert h1_norm(sol.u) < 100 * settings.stationary_step_tol


def test_linear_poisson_problem_is_solved_exactly():
    cfg = ModelConfig(p=2.0, allow_linear=True, g_terms=(ExpressionTerm(kind="pow", coeff=1.0, k=0.0),),
                      grid_n=31)
    x = cfg.grid.nodes
    sol = solve_stationary(zeros(cfg.grid), cfg)
    np.testing.assert_allclose(sol.u.values, x * (1.0 - x) / 2.0, atol=1e-10)


def test_enumerate_is_deterministic_across_thread_counts():
    cfg = ModelConfig(p=3.0, nonlinearity=BISTABLE, grid_n=31)
    a = enumerate_stationary(cfg, n_starts=4, seed=3, threads=1)
    b = enumerate_stationary(cfg, n_starts=4, seed=3, threads=4)
    assert len(a) == len(b)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.u.values, y.u.values)
        assert x.basin_hits == y.basin_hits


def test_omega_limit_of_a_monotone_problem():
    cfg = ModelConfig(p=3.0, nonlinearity=CUBIC_PLUS_LINEAR, grid_n=16, dt=0.1, t_end=1.0)
    zero = StationarySolution(zeros(cfg.grid), 0.0)
    ensemble = random_initial_states(cfg.grid, 2, 1.0, 1.0, seed=0)
    est = omega_limit(ensemble, cfg, 30.0, stationary_set=[zero], stride=10)
    assert est.max_distance < 0.05
    assert est.sup_w1inf_u > 0.0
    assert est.member_failures == [None, None]
    assert est.distances_to_N.shape == (2,)
    assert est.velocity_eps == pytest.approx(1.0 / 6.0)
    assert est.velocity_sup.shape == (2,)
    assert np.all(np.isfinite(est.velocity_sup))

    change = invariance_check(est, cfg, 1.0)
    assert change.shape == (2,)
    assert np.all(change < 0.05)


def test_omega_limit_distances_shrink_with_longer_horizons():
    cfg = ModelConfig(p=3.0, nonlinearity=CUBIC_PLUS_LINEAR, grid_n=16, dt=0.1, t_end=1.0)
    zero = StationarySolution(zeros(cfg.grid), 0.0)
    ensemble = random_initial_states(cfg.grid, 3, 1.0, 5.0, seed=2)
    short = omega_limit(ensemble, cfg, 10.0, stationary_set=[zero], stride=10)
    long = omega_limit(ensemble, cfg, 30.0, stationary_set=[zero], stride=10)
    assert np.all(long.distances_to_N <= short.distances_to_N)
    assert long.max_distance < short.max_distance


def _estimate(sup_u: float, sup_v: float) -> OmegaLimitEstimate:
    return OmegaLimitEstimate(limit_states=[], distances_to_N=np.zeros(0), sup_w1inf_u=sup_u,
                              sup_w1inf_v=sup_v, settled=np.zeros(0, dtype=bool))


def test_regularity_report_flags_growth():
    steady = attractor_regularity_report({64: _estimate(1.0, 0.0), 128: _estimate(1.02, 0.0),
                                          256: _estimate(1.03, 0.0)}, 3.0)
    assert steady.bounded
    assert steady.note == ""
    assert [r.n for r in steady.rows] == [64, 128, 256]
    assert steady.rows[1].drift_u == pytest.approx(0.02)

    growing = attractor_regularity_report({64: _estimate(1.0, 0.0), 128: _estimate(1.3, 0.0)}, 4.5)
    assert not growing.bounded
    assert "outside proven regime" in growing.note


def test_kick_from_the_unstable_origin_reaches_a_ground_state():
    cfg = ModelConfig(p=3.0, nonlinearity=BISTABLE, grid_n=32, dt=0.05, t_end=30.0)
    grid = cfg.grid
    # settle onto the positive ground state first, then polish with Newton
    settled = simulate(State(sample(grid, lambda x: 3.0 * np.sin(math.pi * x)), zeros(grid)), cfg,
                       stride=cfg.n_steps).final
    positive = solve_stationary(settled.u, cfg)
    assert np.all(positive.u.values > 0.0)
    stationary_set = [StationarySolution(zeros(grid), 0.0), positive,
                      StationarySolution(-positive.u, positive.residual_l2)]
    report = follow_heteroclinic(cfg, stationary_set, 0, amplitude=1e-3, seed=1)
    assert report.converged
    assert report.target_index in (1, 2)
    assert report.target_distance < 0.1
    assert report.lyapunov_drop > 0.0
