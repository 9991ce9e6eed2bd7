"""
Stationary set, ω-limits and attractor regularity diagnostics
=============================================================
Stationary points solve −(|u_x|^{p−2}u_x)_x + f(u) = g. The set 𝒩 is
approximated by multistart Newton; ω-limits of bounded ensembles by the
terminal states of long runs, measured against 𝒩 in H¹ and in W^{1,∞}.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError

from dampwave.models.config import ModelConfig, SolverSettings
from dampwave.services.dynamics import State, simulate, simulate_ensemble
from dampwave.services.energy import lyapunov
from dampwave.services.errors import StationaryDivergenceError
from dampwave.services.grid import (
    Grid, GridFunction, h1_norm, l2_norm, p_laplacian, p_laplacian_jacobian, w1inf_norm,
)
from dampwave.services.model import eval_df, eval_f
from dampwave.services.spectral import velocity_regularity_profile, velocity_smoothing_threshold
from dampwave.services.workers import parallel_map

log = logging.getLogger("dampwave.stationary")

CONVERGENCE_THRESHOLD = 1e-3   # h1(v) below which a terminal state counts as settled
REFINEMENT_DRIFT = 0.10
DRIFT_FLOOR = 1e-6


# ---------------------------------------------------------------------------
# Data models
# ---------------------------------------------------------------------------

@dataclass
class StationarySolution:
    u: GridFunction
    residual_l2: float
    basin_hits: int = 1
    iterations: int = 0


@dataclass
class OmegaLimitEstimate:
    limit_states: list[State]
    distances_to_N: np.ndarray
    sup_w1inf_u: float
    sup_w1inf_v: float
    settled: np.ndarray
    member_failures: list[Optional[str]] = field(default_factory=list)
    stationary_set: list[StationarySolution] = field(default_factory=list)
    velocity_sup: np.ndarray = field(default_factory=lambda: np.zeros(0))
    velocity_eps: float = 0.0

    @property
    def max_distance(self) -> float:
        return float(np.max(self.distances_to_N)) if self.distances_to_N.size else 0.0


# ---------------------------------------------------------------------------
# Newton on the stationary equation
# ---------------------------------------------------------------------------

def stationary_residual(u: GridFunction, cfg: ModelConfig) -> np.ndarray:
    return (
        -p_laplacian(u, cfg.p).values
        + eval_f(cfg.nonlinearity, u.values)
        - cfg.forcing.values
    )


def solve_stationary(guess: GridFunction, cfg: ModelConfig,
                     settings: Optional[SolverSettings] = None) -> StationarySolution:
    """Damped Newton with the residual norm as merit function.

    A small residual alone is not accepted: at a degenerate root the residual
    shrinks like a power of the error, so the iterate is polished until the
    Newton update itself is below `stationary_step_tol` in H¹.
    """
    settings = settings or SolverSettings()
    grid = guess.grid
    if grid.n != cfg.grid_n:
        raise ValueError(f"guess has n={grid.n}, config has grid_n={cfg.grid_n}")
    u = guess.values.copy()
    r = stationary_residual(GridFunction(grid, u), cfg)
    res = l2_norm(GridFunction(grid, r))
    for it in range(settings.stationary_max_iter):
        if not np.isfinite(res):
            break
        if res == 0.0:
            return StationarySolution(GridFunction(grid, u), res, iterations=it)
        current = GridFunction(grid, u)
        J = p_laplacian_jacobian(current, cfg.p, settings.eps_reg).scaled(-1.0).plus_diagonal(
            eval_df(cfg.nonlinearity, u, settings.eps_reg)
        )
        try:
            delta = J.solve(r)
        except (LinAlgError, ValueError) as e:
            raise StationaryDivergenceError(f"singular Jacobian: {e}", residual=res) from e
        if not np.all(np.isfinite(delta)):
            raise StationaryDivergenceError("singular Jacobian (non-finite Newton step)", residual=res)
        if res < settings.stationary_tol and h1_norm(GridFunction(grid, delta)) < settings.stationary_step_tol:
            return StationarySolution(current, res, iterations=it)
        step = 1.0
        for _ in range(settings.max_halvings + 1):
            u_try = u - step * delta
            r_try = stationary_residual(GridFunction(grid, u_try), cfg)
            res_try = l2_norm(GridFunction(grid, r_try))
            if res_try < res:
                break
            step *= 0.5
        u, r, res = u_try, r_try, res_try
    if res < settings.stationary_tol:
        log.debug(f"stationary Newton hit the iteration cap with residual {res:.2e}")
        return StationarySolution(GridFunction(grid, u), res, iterations=settings.stationary_max_iter)
    raise StationaryDivergenceError(
        f"stationary Newton failed after {settings.stationary_max_iter} iterations", residual=res
    )


def _random_guess(grid: Grid, seed: int, k: int, modes: int = 5) -> GridFunction:
    rng = np.random.default_rng([seed, k])
    x = grid.nodes
    coeffs = rng.normal(size=modes) * rng.uniform(0.5, 3.0) / np.arange(1, modes + 1)
    values = sum(c * np.sin((j + 1) * math.pi * x) for j, c in enumerate(coeffs))
    return GridFunction(grid, values)


def multistart_guesses(grid: Grid, n_starts: int, seed: int = 0) -> list[GridFunction]:
    """The zero function, then smooth random guesses in ± pairs.

    n_starts random guesses are drawn, rounded up to whole pairs; guess
    2j+1 and its negation 2j+2 depend only on (seed, j).
    """
    guesses = [GridFunction(grid, np.zeros(grid.n))]
    for k in range(n_starts + n_starts % 2):
        base = _random_guess(grid, seed, k // 2)
        guesses.append(base if k % 2 == 0 else -base)
    return guesses


def deduplicate(solutions: list[StationarySolution], tol: float) -> list[StationarySolution]:
    """Sequential reduction in input order; coalescing starts add to basin_hits."""
    unique: list[StationarySolution] = []
    for sol in solutions:
        for kept in unique:
            if h1_norm(sol.u - kept.u) < tol:
                kept.basin_hits += sol.basin_hits
                break
        else:
            unique.append(StationarySolution(sol.u, sol.residual_l2, sol.basin_hits, sol.iterations))
    return unique


def enumerate_stationary(cfg: ModelConfig, n_starts: int, seed: int = 0, threads: int = 1,
                         settings: Optional[SolverSettings] = None) -> list[StationarySolution]:
    if n_starts < 1:
        raise ValueError(f"n_starts must be >= 1, got {n_starts}")
    settings = settings or SolverSettings()
    guesses = multistart_guesses(cfg.grid, n_starts, seed)

    def attempt(guess):
        try:
            return solve_stationary(guess, cfg, settings)
        except StationaryDivergenceError as e:
            return e

    outcomes = parallel_map(attempt, guesses, threads)
    solved = [o for o in outcomes if isinstance(o, StationarySolution)]
    failed = len(outcomes) - len(solved)
    if failed:
        log.warning(f"⚠️ {failed}/{len(guesses)} multistart runs failed to converge")
    unique = deduplicate(solved, settings.dedup_tol)
    log.info(f"stationary set: {len(unique)} distinct solutions from {len(guesses)} starts")
    return unique


def distance_to_set(u: GridFunction, stationary_set: list[StationarySolution]) -> float:
    if not stationary_set:
        return math.inf
    return min(h1_norm(u - s.u) for s in stationary_set)


def is_closed_under_negation(stationary_set: list[StationarySolution], tol: float) -> bool:
    return all(distance_to_set(-s.u, stationary_set) < tol for s in stationary_set)


# ---------------------------------------------------------------------------
# ω-limits
# ---------------------------------------------------------------------------

def omega_limit(ensemble: list[State], cfg: ModelConfig, T_long: float, scheme: str = "be",
                stationary_set: Optional[list[StationarySolution]] = None, n_starts: int = 16,
                seed: int = 0, threads: int = 1, stride: int = 10,
                late_fraction: float = 0.5, velocity_eps: Optional[float] = None) -> OmegaLimitEstimate:
    """Run every member to T_long and measure where it lands.

    The sup norms run over all members and over sampled times in the last
    `late_fraction` of each run. `velocity_sup` holds, per member, the late
    sup of ||v||_{H^{1−ε}} with ε defaulting to the smoothing threshold of p.
    """
    if stationary_set is None:
        stationary_set = enumerate_stationary(cfg, n_starts, seed, threads)
    if velocity_eps is None:
        velocity_eps = velocity_smoothing_threshold(cfg.p)
    run_cfg = cfg.replace(t_end=T_long)
    records = simulate_ensemble(ensemble, run_cfg, scheme, stride, threads)

    limits, failures, distances, settled, velocity = [], [], [], [], []
    sup_u = sup_v = 0.0
    for member, rec in zip(ensemble, records):
        t_late = member.t + (1.0 - late_fraction) * T_long
        for s in rec.states:
            if s.t >= t_late - 1e-12:
                sup_u = max(sup_u, w1inf_norm(s.u))
                sup_v = max(sup_v, w1inf_norm(s.v))
        final = rec.final
        limits.append(final)
        failures.append(rec.failure)
        distances.append(distance_to_set(final.u, stationary_set))
        settled.append(h1_norm(final.v) < CONVERGENCE_THRESHOLD)
        velocity.append(velocity_regularity_profile(rec, velocity_eps, t_min=t_late - 1e-12))
    bad = sum(f is not None for f in failures)
    if bad:
        log.warning(f"⚠️ {bad}/{len(ensemble)} ensemble members did not reach T_long")
    return OmegaLimitEstimate(
        limit_states=limits,
        distances_to_N=np.asarray(distances),
        sup_w1inf_u=sup_u,
        sup_w1inf_v=sup_v,
        settled=np.asarray(settled, dtype=bool),
        member_failures=failures,
        stationary_set=stationary_set,
        velocity_sup=np.asarray(velocity),
        velocity_eps=velocity_eps,
    )


def invariance_check(estimate: OmegaLimitEstimate, cfg: ModelConfig, extra_time: float,
                     scheme: str = "be", threads: int = 1) -> np.ndarray:
    """Change of each distance to 𝒩 after advancing the terminal states by extra_time."""
    run_cfg = cfg.replace(t_end=extra_time)
    records = simulate_ensemble(estimate.limit_states, run_cfg, scheme, stride=max(1, run_cfg.n_steps),
                                threads=threads)
    after = np.array([distance_to_set(r.final.u, estimate.stationary_set) for r in records])
    return np.abs(after - estimate.distances_to_N)


# ---------------------------------------------------------------------------
# Regularity under refinement
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegularityRow:
    n: int
    sup_w1inf_u: float
    sup_w1inf_v: float
    drift_u: float
    drift_v: float


@dataclass(frozen=True)
class RegularityReport:
    rows: list[RegularityRow]
    bounded: bool
    note: str = ""


def _drift(prev: float, cur: float) -> float:
    if max(prev, cur) < DRIFT_FLOOR:
        return 0.0
    return abs(cur - prev) / max(prev, DRIFT_FLOOR)


def attractor_regularity_report(estimates: dict[int, OmegaLimitEstimate], p: float) -> RegularityReport:
    """Tabulate the W^{1,∞} sups against grid size; growth > 10% per refinement is flagged."""
    rows = []
    prev = None
    for n in sorted(estimates):
        est = estimates[n]
        if prev is None:
            du = dv = 0.0
        else:
            du = _drift(prev.sup_w1inf_u, est.sup_w1inf_u)
            dv = _drift(prev.sup_w1inf_v, est.sup_w1inf_v)
        rows.append(RegularityRow(n, est.sup_w1inf_u, est.sup_w1inf_v, du, dv))
        prev = est
    bounded = all(r.drift_u <= REFINEMENT_DRIFT and r.drift_v <= REFINEMENT_DRIFT for r in rows)
    note = "" if p < 4.0 else "outside proven regime (p >= 4), exploratory"
    if not bounded:
        log.warning(f"⚠️ W^1,inf sup grows beyond {REFINEMENT_DRIFT:.0%} per refinement (p={p})")
    return RegularityReport(rows=rows, bounded=bounded, note=note)


# ---------------------------------------------------------------------------
# Heteroclinic connections
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HeteroclinicReport:
    origin_index: int
    target_index: int
    target_distance: float
    lyapunov_drop: float
    converged: bool


def follow_heteroclinic(cfg: ModelConfig, stationary_set: list[StationarySolution], origin_index: int,
                       amplitude: float = 1e-3, seed: int = 0, scheme: str = "be") -> HeteroclinicReport:
    """Kick a stationary point, integrate, and report which stationary point is reached."""
    origin = stationary_set[origin_index]
    grid = origin.u.grid
    kick = _random_guess(grid, seed, 0)
    norm = h1_norm(kick)
    kick = kick * (amplitude / norm) if norm > 0 else kick
    zero_v = GridFunction(grid, np.zeros(grid.n))
    start = State(origin.u + kick, zero_v, 0.0)
    rec = simulate(start, cfg, scheme, stride=max(1, cfg.n_steps))
    final = rec.final
    dists = [h1_norm(final.u - s.u) for s in stationary_set]
    target = int(np.argmin(dists))
    drop = lyapunov(origin.u, zero_v, cfg) - lyapunov(final.u, final.v, cfg)
    return HeteroclinicReport(origin_index, target, float(dists[target]), float(drop), rec.converged)
