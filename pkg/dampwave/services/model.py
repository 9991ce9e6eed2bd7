"""
Problem data: nonlinearity, antiderivative, structural hypotheses
=================================================================
The nonlinearity is a polynomial plus signed-power terms b·|s|^{q−2}s, which
keeps f C¹ and its antiderivative F available in closed form. The growth
condition on f is decided structurally from the leading terms; sampling could
never certify a liminf.

The Poincaré-type constant λ = inf ||φ′||_p / ||φ||_p is computed on
piecewise-linear Dirichlet functions with exact cell integrals, so every
reported value is an upper bound on the continuum constant.
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.linalg import eigh
from scipy.optimize import brentq

from dampwave.models.config import Nonlinearity, SolverSettings
from dampwave.services.errors import PoincareConvergenceError
from dampwave.services.grid import (
    Grid, GridFunction, forward_diff, laplacian, signed_power,
)
from dampwave.services.workers import parallel_map

log = logging.getLogger("dampwave.model")

DEFAULT_RESOLUTION = 256
MIN_RESOLUTION = 32
_EXPONENT_TOL = 1e-12

# ---------------------------------------------------------------------------
# Nonlinearity evaluation
# ---------------------------------------------------------------------------

def eval_f(nl: Nonlinearity, s):
    s = np.asarray(s, dtype=float)
    out = P.polyval(s, nl.poly_coeffs) if nl.poly_coeffs else np.zeros_like(s)
    for b, q in nl.power_terms:
        out = out + b * signed_power(s, q)
    return out if out.ndim else float(out)


def eval_F(nl: Nonlinearity, s):
    """Closed-form antiderivative with F(0) = 0."""
    s = np.asarray(s, dtype=float)
    if nl.poly_coeffs:
        out = P.polyval(s, P.polyint(nl.poly_coeffs))
    else:
        out = np.zeros_like(s)
    for b, q in nl.power_terms:
        out = out + b * np.abs(s) ** q / q
    return out if out.ndim else float(out)


def eval_df(nl: Nonlinearity, s, eps_reg: float = 1e-8):
    """f′(s). Power terms with q < 2 are singular at 0 and use max(|s|, ε_reg)."""
    s = np.asarray(s, dtype=float)
    if len(nl.poly_coeffs) > 1:
        out = P.polyval(s, P.polyder(nl.poly_coeffs))
    else:
        out = np.zeros_like(s)
    for b, q in nl.power_terms:
        mag = np.abs(s) if q >= 2.0 else np.maximum(np.abs(s), eps_reg)
        out = out + b * (q - 1.0) * mag ** (q - 2.0)
    return out if out.ndim else float(out)


def is_odd(nl: Nonlinearity) -> bool:
    return all(c == 0.0 for c in nl.poly_coeffs[0::2])


# ---------------------------------------------------------------------------
# Poincaré constant
# ---------------------------------------------------------------------------

def _cell_mean_power(a: np.ndarray, b: np.ndarray, p: float):
    """Mean of |t|^p over [a, b] and its partial derivatives in a and b.

    Exact for the linear interpolant on a cell; a Taylor expansion about the
    midpoint replaces the divided difference when b − a is tiny.
    """
    d = b - a
    scale = np.maximum(np.abs(a), np.abs(b))
    near = np.abs(d) < 1e-3 * scale
    safe_d = np.where(near | (d == 0.0), 1.0, d)

    def G(t):
        return np.abs(t) ** p * t / (p + 1.0)

    g_a, g_b = np.abs(a) ** p, np.abs(b) ** p
    mean = (G(b) - G(a)) / safe_d
    d_a = (mean - g_a) / safe_d
    d_b = (g_b - mean) / safe_d

    m = 0.5 * (a + b)
    g1 = p * signed_power(m, p)
    g2 = p * (p - 1.0) * np.abs(m) ** (p - 2.0)
    mean_t = np.abs(m) ** p + g2 * d ** 2 / 24.0
    d_a_t = 0.5 * g1 - g2 * d / 12.0
    d_b_t = 0.5 * g1 + g2 * d / 12.0

    mean = np.where(near, mean_t, mean)
    d_a = np.where(near, d_a_t, d_a)
    d_b = np.where(near, d_b_t, d_b)
    zero = scale == 0.0
    return (np.where(zero, 0.0, mean), np.where(zero, 0.0, d_a), np.where(zero, 0.0, d_b))


def lp_mass(u: GridFunction, p: float) -> tuple[float, np.ndarray]:
    """∫|u|^p of the piecewise-linear interpolant and its gradient in u."""
    padded = np.concatenate(([0.0], u.values, [0.0]))
    mean, d_a, d_b = _cell_mean_power(padded[:-1], padded[1:], p)
    h = u.grid.h
    grad = h * (d_b[:-1] + d_a[1:])
    return h * float(np.sum(mean)), grad


def rayleigh_quotient(u: GridFunction, p: float) -> float:
    """||u′||_p^p / ||u||_p^p for the piecewise-linear interpolant."""
    numer = u.grid.h * float(np.sum(np.abs(forward_diff(u)) ** p))
    denom, _ = lp_mass(u, p)
    return numer / denom


def _inverse_p_laplacian(rhs: np.ndarray, grid: Grid, p: float) -> np.ndarray:
    """Solve −h·p_laplacian(w) = rhs exactly through the cell fluxes."""
    cumulative = np.concatenate(([0.0], np.cumsum(rhs)))  # length n+1

    def slopes(flux0):
        return signed_power(flux0 - cumulative, 1.0 + 1.0 / (p - 1.0))

    def boundary_mismatch(flux0):
        return float(np.sum(slopes(flux0)))

    lo, hi = float(cumulative.min()), float(cumulative.max())
    if hi - lo == 0.0:
        return np.zeros(grid.n)
    flux0 = brentq(boundary_mismatch, lo, hi, xtol=1e-15 * (hi - lo), rtol=1e-15, maxiter=500)
    return grid.h * np.cumsum(slopes(flux0))[:-1]


def _positive_guess(grid: Grid, rng: np.random.Generator) -> GridFunction:
    x = grid.nodes
    alpha, beta = rng.uniform(0.7, 2.0, size=2)
    wiggle = 1.0 + 0.2 * rng.uniform(-1.0, 1.0) * np.sin(2.0 * math.pi * x)
    return GridFunction(grid, x ** alpha * (1.0 - x) ** beta * wiggle)


def _descend(start: GridFunction, p: float, settings: SolverSettings):
    """Preconditioned gradient descent on the quotient, normalized each step.

    The preconditioner is the exact inverse of the discrete p-Laplacian, so a
    unit step is one sweep of nonlinear inverse iteration.
    """
    grid = start.grid
    u = start
    q_old = rayleigh_quotient(u, p)
    for it in range(1, settings.poincare_max_iter + 1):
        _, grad_mass = lp_mass(u, p)
        w = _inverse_p_laplacian(grad_mass / p, grid, p)
        mass, _ = lp_mass(GridFunction(grid, w), p)
        u = GridFunction(grid, w / mass ** (1.0 / p))
        q_new = rayleigh_quotient(u, p)
        if abs(q_old - q_new) <= settings.poincare_rtol * q_new:
            return u, q_new, it
        q_old = q_new
    raise PoincareConvergenceError(
        f"Poincaré minimizer did not converge for p={p} after {settings.poincare_max_iter} iterations",
        last_iterate=u,
        last_quotient=q_old ** (1.0 / p),
    )


def _linear_minimizer(grid: Grid) -> tuple[float, GridFunction]:
    stiffness = laplacian(grid).to_dense() * grid.h
    mass = grid.h / 6.0 * (4.0 * np.eye(grid.n) + np.eye(grid.n, k=1) + np.eye(grid.n, k=-1))
    vals, vecs = eigh(stiffness, mass, subset_by_index=[0, 0])
    vec = vecs[:, 0]
    vec = vec * np.sign(vec[np.argmax(np.abs(vec))])
    return math.sqrt(float(vals[0])), GridFunction(grid, vec / np.max(np.abs(vec)))


@lru_cache(maxsize=64)
def poincare_minimizer(p: float, resolution: int = DEFAULT_RESOLUTION, threads: int = 1) -> tuple[float, GridFunction]:
    """λ and a minimizing grid function (scaled to sup norm 1, positive)."""
    if not p > 1.0:
        raise ValueError(f"Poincaré constant requires p > 1, got {p}")
    if resolution < MIN_RESOLUTION:
        raise ValueError(f"resolution must be >= {MIN_RESOLUTION}, got {resolution}")
    grid = Grid(resolution)
    if p == 2.0:
        return _linear_minimizer(grid)

    settings = SolverSettings()
    starts = [
        _positive_guess(grid, np.random.default_rng([resolution, k]))
        for k in range(settings.poincare_restarts)
    ]

    def attempt(start):
        try:
            return _descend(start, p, settings)
        except PoincareConvergenceError as e:
            log.warning(f"Poincaré restart failed: {e}")
            return e

    outcomes = parallel_map(attempt, starts, threads)
    finished = [o for o in outcomes if not isinstance(o, PoincareConvergenceError)]
    if not finished:
        raise outcomes[-1]
    u, quotient, _ = min(finished, key=lambda r: r[1])
    lam = quotient ** (1.0 / p)
    log.debug(f"λ(p={p}, n={resolution}) = {lam:.10f} from {len(finished)} restarts")
    return lam, GridFunction(grid, u.values / np.max(np.abs(u.values)))


def poincare_constant(p: float, resolution: int = DEFAULT_RESOLUTION) -> float:
    return poincare_minimizer(p, resolution)[0]


# ---------------------------------------------------------------------------
# Growth condition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GrowthReport:
    lambda_: float
    asymptotic_coefficient: float
    satisfied: bool
    margin: float


def _side_coefficient(nl: Nonlinearity, p: float, sign: float) -> float:
    """lim of f(s)/(|s|^{p−2}s) as s → sign·∞, read off the leading term."""
    by_exponent: dict[float, float] = {}
    for j, a in enumerate(nl.poly_coeffs):
        if a == 0.0:
            continue
        # s^j / (|s|^{p−2}s) at s = −|s| picks up (−1)^{j+1}
        c = a if sign > 0 or j % 2 == 1 else -a
        by_exponent[float(j)] = by_exponent.get(float(j), 0.0) + c
    for b, q in nl.power_terms:
        by_exponent[q - 1.0] = by_exponent.get(q - 1.0, 0.0) + b

    for exponent in sorted(by_exponent, reverse=True):
        coeff = by_exponent[exponent]
        if coeff == 0.0:
            continue
        if exponent > p - 1.0 + _EXPONENT_TOL:
            return math.inf if coeff > 0 else -math.inf
        if abs(exponent - (p - 1.0)) <= _EXPONENT_TOL:
            return coeff
        return 0.0
    return 0.0


def check_growth_condition(nl: Nonlinearity, p: float, resolution: int = DEFAULT_RESOLUTION) -> GrowthReport:
    if not p > 2.0:
        raise ValueError(f"growth condition is stated for p > 2, got {p}")
    lam = poincare_constant(p, resolution)
    coeff = min(_side_coefficient(nl, p, 1.0), _side_coefficient(nl, p, -1.0))
    margin = coeff + lam ** p
    return GrowthReport(
        lambda_=lam,
        asymptotic_coefficient=coeff,
        satisfied=bool(margin > 0),
        margin=margin,
    )
