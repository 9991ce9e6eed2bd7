import math

import numpy as np
import pytest

from dampwave.services.grid import (
    Grid, GridFunction, Tridiagonal, forward_diff, h1_norm, h_neg1_norm, l2_norm, laplacian,
    lp_grad_norm, monotonicity_gap, norms, p_laplacian, p_laplacian_jacobian, signed_power,
    w1inf_norm, zeros,
)


def test_grid_spacing_and_nodes():
    g = Grid(9)
    assert g.h == pytest.approx(0.1)
    np.testing.assert_allclose(g.nodes, np.linspace(0.1, 0.9, 9))
    assert g.cell_centers.size == 10


def test_grid_needs_two_nodes():
    with pytest.raises(ValueError):
        Grid(1)


def test_grid_function_checks_length_and_is_read_only(grid):
    with pytest.raises(ValueError):
        GridFunction(grid, np.zeros(grid.n + 1))
    u = zeros(grid)
    with pytest.raises(ValueError):
        u.values[0] = 1.0


def test_grid_function_arithmetic(grid, sine):
    np.testing.assert_allclose((sine + sine).values, 2.0 * sine.values)
    np.testing.assert_allclose((sine - sine).values, 0.0)
    np.testing.assert_allclose((-sine).values, -sine.values)
    np.testing.assert_allclose((3.0 * sine).values, (sine * 3.0).values)


def test_tridiagonal_solve_matches_dense():
    rng = np.random.default_rng(1)
    n = 12
    T = Tridiagonal(rng.normal(size=n - 1), 4.0 + rng.random(n), rng.normal(size=n - 1))
    x = rng.normal(size=n)
    np.testing.assert_allclose(T.matvec(x), T.to_dense() @ x)
    np.testing.assert_allclose(T.solve(T.matvec(x)), x, rtol=1e-12, atol=1e-12)


def test_sine_is_a_laplacian_eigenvector(grid, sine):
    lam = (4.0 / grid.h ** 2) * math.sin(math.pi * grid.h / 2.0) ** 2
    np.testing.assert_allclose(laplacian(grid).matvec(sine.values), lam * sine.values, atol=1e-10)


def test_p_laplacian_at_two_is_the_laplacian(grid, sine):
    u = sine * 0.7 + sample_poly(grid)
    np.testing.assert_allclose(p_laplacian(u, 2.0).values, -laplacian(grid).matvec(u.values), atol=1e-9)


def sample_poly(grid):
    x = grid.nodes
    return GridFunction(grid, x * (1.0 - x) * (0.3 + x))


@pytest.mark.parametrize("p", [2.5, 3.0, 4.0])
def test_summation_by_parts(grid, p):
    rng = np.random.default_rng(3)
    u = GridFunction(grid, rng.normal(size=grid.n))
    v = GridFunction(grid, rng.normal(size=grid.n))
    lhs = grid.h * float(np.dot(p_laplacian(u, p).values, v.values))
    rhs = -grid.h * float(np.dot(signed_power(forward_diff(u), p), forward_diff(v)))
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_p_laplacian_rejects_p_at_most_one(grid, sine):
    with pytest.raises(ValueError):
        p_laplacian(sine, 1.0)


def test_p_laplacian_of_a_parabola_at_p_four():
    # (|u′|²u′)′ = −6(1 − 2x)² for u = x(1 − x); the centered flux difference adds exactly −2h²
    grid = Grid(63)
    x = grid.nodes
    u = GridFunction(grid, x * (1.0 - x))
    result = p_laplacian(u, 4.0).values
    np.testing.assert_allclose(result, -6.0 * (1.0 - 2.0 * x) ** 2 - 2.0 * grid.h ** 2, atol=1e-9)
    assert np.max(np.abs(result + 6.0 * (1.0 - 2.0 * x) ** 2)) < 3.0 * grid.h ** 2


def test_p_laplacian_of_the_first_mode_at_p_four():
    grid = Grid(256)
    x = grid.nodes
    u = GridFunction(grid, np.sin(math.pi * x))
    exact = -3.0 * math.pi ** 4 * np.cos(math.pi * x) ** 2 * np.sin(math.pi * x)
    assert np.max(np.abs(p_laplacian(u, 4.0).values - exact)) < 0.1


def test_jacobian_matches_finite_differences():
    grid = Grid(15)
    u = GridFunction(grid, np.sin(2.0 * grid.nodes) + 3.0 * grid.nodes ** 2)
    J = p_laplacian_jacobian(u, 3.0).to_dense()
    eps = 1e-6
    fd = np.empty_like(J)
    for j in range(grid.n):
        e = np.zeros(grid.n)
        e[j] = eps
        plus = p_laplacian(GridFunction(grid, u.values + e), 3.0).values
        minus = p_laplacian(GridFunction(grid, u.values - e), 3.0).values
        fd[:, j] = (plus - minus) / (2.0 * eps)
    np.testing.assert_allclose(J, fd, rtol=1e-6, atol=1e-3)


def test_jacobian_is_symmetric_negative(grid, sine):
    J = p_laplacian_jacobian(sine, 3.5).to_dense()
    np.testing.assert_allclose(J, J.T)
    assert np.max(np.linalg.eigvalsh(J)) < 0.0


def test_monotonicity_gap_nonnegative():
    rng = np.random.default_rng(0)
    x = rng.uniform(-2.0, 2.0, 20_000)
    y = rng.uniform(-2.0, 2.0, 20_000)
    p = 6.0 - 4.0 * rng.random(20_000)
    assert np.min(monotonicity_gap(x, y, p)) >= -1e-12


@pytest.mark.parametrize("p", [2.0, 3.0, 4.5, 6.0])
def test_monotonicity_gap_equality_case(p):
    assert abs(monotonicity_gap(1.0, -1.0, p)) <= 1e-12


def test_norms_of_the_first_mode(grid, sine):
    lam = (4.0 / grid.h ** 2) * math.sin(math.pi * grid.h / 2.0) ** 2
    assert l2_norm(sine) == pytest.approx(math.sqrt(0.5), rel=1e-12)
    assert h1_norm(sine) == pytest.approx(math.sqrt(lam / 2.0), rel=1e-12)
    assert h1_norm(sine) == pytest.approx(math.pi / math.sqrt(2.0), abs=1e-2)
    assert h_neg1_norm(sine) == pytest.approx(math.sqrt(0.5 / lam), rel=1e-10)
    assert lp_grad_norm(sine, 2.0) == pytest.approx(h1_norm(sine))
    assert w1inf_norm(sine) == pytest.approx(math.pi, rel=1e-2)


def test_norms_of_zero(grid):
    n = norms(zeros(grid), p=3.0)
    assert (n.l2, n.lp_grad, n.h1, n.h_neg1, n.w1inf) == (0.0, 0.0, 0.0, 0.0, 0.0)
