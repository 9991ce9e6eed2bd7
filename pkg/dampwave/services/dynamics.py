"""
Time integration of the strongly damped p-Laplacian wave equation
=================================================================
First-order system in (u, v = u_t):

    u_t = v,   v_t = Δv + (|u_x|^{p−2}u_x)_x − f(u) + g

One implicit step eliminates the velocity and solves for w = u⁺:

  backward Euler   v⁺ = (w − u)/dt
                   R(w) = v⁺ − v − dt[−K v⁺ + Δ_p w − f(w) + g]
  midpoint         v^θ = (w − u)/dt, v⁺ = 2v^θ − v, u^θ = (u + w)/2
                   R(w) = v⁺ − v − dt[−K v^θ + Δ_p u^θ − f(u^θ) + g]

K = −Δ_h. The Jacobian of R is symmetric tridiagonal, so each Newton
iteration is a single banded solve.
"""
import logging
import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from dampwave.models.config import ModelConfig, SolverSettings
from dampwave.services.energy import (
    EnergyLedger, dissipation_rate, energy, record_step,
)
from dampwave.services.errors import NewtonDivergenceError, NonFiniteStateError, NumericalError
from dampwave.services.grid import (
    Grid, GridFunction, h1_norm, h_neg1_norm, l2_norm, laplacian,
    p_laplacian, p_laplacian_jacobian,
)
from dampwave.services.model import check_growth_condition, eval_df, eval_f
from dampwave.services.workers import parallel_map

log = logging.getLogger("dampwave.dynamics")

Scheme = Literal["be", "mp"]
_SCHEME_ALIASES = {"be": "be", "mp": "mp", "backward_euler": "be", "midpoint": "mp"}


def _scheme_key(scheme: str) -> str:
    try:
        return _SCHEME_ALIASES[scheme]
    except KeyError:
        raise ValueError(f"unknown scheme '{scheme}'") from None


# ---------------------------------------------------------------------------
# Data models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class State:
    u: GridFunction
    v: GridFunction
    t: float = 0.0

    def __post_init__(self):
        if self.u.grid != self.v.grid:
            raise ValueError("State components live on different grids")

    @property
    def grid(self) -> Grid:
        return self.u.grid

    @classmethod
    def zero(cls, grid: Grid, t: float = 0.0) -> "State":
        return cls(GridFunction(grid, np.zeros(grid.n)), GridFunction(grid, np.zeros(grid.n)), t)


@dataclass
class TrajectoryRecord:
    states: list[State]
    ledger: EnergyLedger
    newton_iterations: np.ndarray
    converged: bool
    failure: Optional[str] = None
    scheme: str = "be"

    @property
    def final(self) -> State:
        return self.states[-1]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])


@dataclass
class StepInfo:
    iterations: int
    residual: float
    dissipation: float = 0.0


# ---------------------------------------------------------------------------
# One implicit step
# ---------------------------------------------------------------------------

class _StepSystem:
    """Residual and Jacobian of one step as functions of w = u⁺."""

    def __init__(self, state: State, cfg: ModelConfig, scheme: str, g: np.ndarray,
                 K, settings: SolverSettings):
        self.u = state.u.values
        self.v = state.v.values
        self.grid = state.grid
        self.cfg = cfg
        self.scheme = scheme
        self.g = g
        self.K = K
        self.settings = settings
        self.dt = cfg.dt

    def velocities(self, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(v⁺, velocity entering the damping term)."""
        vel = (w - self.u) / self.dt
        if self.scheme == "be":
            return vel, vel
        return 2.0 * vel - self.v, vel

    def displacement(self, w: np.ndarray) -> np.ndarray:
        return w if self.scheme == "be" else 0.5 * (self.u + w)

    def residual(self, w: np.ndarray) -> np.ndarray:
        v_new, v_damp = self.velocities(w)
        m = GridFunction(self.grid, self.displacement(w))
        forcing = (
            -self.K.matvec(v_damp)
            + p_laplacian(m, self.cfg.p).values
            - eval_f(self.cfg.nonlinearity, m.values)
            + self.g
        )
        return v_new - self.v - self.dt * forcing

    def jacobian(self, w: np.ndarray):
        dt = self.dt
        m = GridFunction(self.grid, self.displacement(w))
        Jp = p_laplacian_jacobian(m, self.cfg.p, self.settings.eps_reg)
        df = eval_df(self.cfg.nonlinearity, m.values, self.settings.eps_reg)
        if self.scheme == "be":
            # I/dt + K − dt·J_p + dt·f′
            return (self.K + Jp.scaled(-dt)).plus_diagonal(np.full(self.grid.n, 1.0 / dt) + dt * df)
        # 2I/dt + K − (dt/2)·J_p + (dt/2)·f′
        return (self.K + Jp.scaled(-0.5 * dt)).plus_diagonal(
            np.full(self.grid.n, 2.0 / dt) + 0.5 * dt * df
        )


def _norm(r: np.ndarray, h: float) -> float:
    return math.sqrt(h * float(np.dot(r, r)))


def _advance(state: State, cfg: ModelConfig, scheme: str, g: np.ndarray, K,
             settings: SolverSettings) -> tuple[State, StepInfo]:
    scheme = _scheme_key(scheme)
    system = _StepSystem(state, cfg, scheme, g, K, settings)
    h = state.grid.h
    w = state.u.values + cfg.dt * state.v.values
    r = system.residual(w)
    res = _norm(r, h)
    iterations = 0
    while not res < cfg.newton_tol:
        if not np.isfinite(res):
            raise NonFiniteStateError(f"non-finite residual at t={state.t + cfg.dt:.6g}", last_state=state)
        if iterations >= cfg.newton_max_iter:
            raise NewtonDivergenceError(
                f"Newton did not converge at t={state.t + cfg.dt:.6g}",
                iterations=iterations, residual=res, last_state=state,
            )
        delta = system.jacobian(w).solve(r)
        step = 1.0
        for _ in range(settings.max_halvings + 1):
            w_try = w - step * delta
            r_try = system.residual(w_try)
            res_try = _norm(r_try, h)
            if res_try < res:
                break
            step *= 0.5
        else:
            log.debug(f"damped Newton found no decrease at t={state.t + cfg.dt:.6g} (residual {res:.3e})")
        if step < 1.0:
            log.debug(f"damped Newton step {step:g} at t={state.t + cfg.dt:.6g}")
        w, r, res = w_try, r_try, res_try
        iterations += 1

    if not np.all(np.isfinite(w)):
        raise NonFiniteStateError(f"non-finite state at t={state.t + cfg.dt:.6g}", last_state=state)
    v_new, v_damp = system.velocities(w)
    grid = state.grid
    new_state = State(GridFunction(grid, w), GridFunction(grid, v_new), state.t + cfg.dt)
    info = StepInfo(
        iterations=iterations,
        residual=res,
        dissipation=cfg.dt * dissipation_rate(GridFunction(grid, v_damp)),
    )
    return new_state, info


def step(state: State, cfg: ModelConfig, scheme: str = "be",
         settings: Optional[SolverSettings] = None) -> State:
    """One implicit step; raises NewtonDivergenceError / NonFiniteStateError."""
    if state.grid.n != cfg.grid_n:
        raise ValueError(f"state has n={state.grid.n}, config has grid_n={cfg.grid_n}")
    settings = settings or SolverSettings()
    new_state, _ = _advance(state, cfg, scheme, cfg.forcing.values, laplacian(cfg.grid), settings)
    return new_state


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

def simulate(initial: State, cfg: ModelConfig, scheme: str = "be", stride: int = 1,
             check_growth: bool = True, settings: Optional[SolverSettings] = None) -> TrajectoryRecord:
    """Advance `initial` over the horizon cfg.t_end (measured from initial.t).

    States are kept every `stride` steps and at the end; the ledger gets every
    step. Step failures end the record with converged=False.
    """
    scheme = _scheme_key(scheme)
    if initial.grid.n != cfg.grid_n:
        raise ValueError(f"initial state has n={initial.grid.n}, config has grid_n={cfg.grid_n}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if check_growth and cfg.p > 2.0:
        report = check_growth_condition(cfg.nonlinearity, cfg.p)
        if not report.satisfied:
            log.warning(
                f"⚠️ growth condition fails (liminf={report.asymptotic_coefficient:.4g}, "
                f"-λ^p={-report.lambda_ ** cfg.p:.4g}); proceeding"
            )
    settings = settings or SolverSettings()
    g = cfg.forcing.values
    K = laplacian(cfg.grid)
    t0 = initial.t
    n_steps = cfg.n_steps

    ledger = EnergyLedger()
    record_step(ledger, t0, energy(initial.u, initial.v, cfg), 0.0)
    states = [initial]
    iterations = []
    state = initial
    converged, failure = True, None
    for k in range(1, n_steps + 1):
        try:
            state, info = _advance(state, cfg, scheme, g, K, settings)
        except NumericalError as e:
            log.warning(f"run stopped after {k - 1}/{n_steps} steps: {e}")
            converged, failure = False, str(e)
            break
        # re-anchor time on the step count so long runs carry no drift
        state = State(state.u, state.v, t0 + k * cfg.dt)
        record_step(ledger, state.t, energy(state.u, state.v, cfg), info.dissipation)
        iterations.append(info.iterations)
        if k % stride == 0 or k == n_steps:
            states.append(state)
    if not converged and states[-1] is not state:
        states.append(state)
    return TrajectoryRecord(
        states=states,
        ledger=ledger,
        newton_iterations=np.asarray(iterations, dtype=int),
        converged=converged,
        failure=failure,
        scheme=scheme,
    )


def simulate_ensemble(initials: list[State], cfg: ModelConfig, scheme: str = "be",
                      stride: int = 1, threads: int = 1) -> list[TrajectoryRecord]:
    if cfg.p > 2.0:
        check_growth_condition(cfg.nonlinearity, cfg.p)  # warm the λ cache once
    return parallel_map(lambda s: simulate(s, cfg, scheme, stride), initials, threads)


def random_initial_states(grid: Grid, count: int, amplitude_min: float, amplitude_max: float,
                          seed: int = 0, modes: int = 6) -> list[State]:
    """Smooth random data; u has H¹ norm drawn in [amplitude_min, amplitude_max].

    State k depends only on (seed, k), so longer lists extend shorter ones.
    """
    x = grid.nodes
    basis = np.array([np.sin(k * math.pi * x) for k in range(1, modes + 1)])
    out = []
    for k in range(count):
        rng = np.random.default_rng([seed, k])
        weights = 1.0 / np.arange(1, modes + 1) ** 2
        u = GridFunction(grid, (rng.normal(size=modes) * weights) @ basis)
        v = GridFunction(grid, (rng.normal(size=modes) * weights) @ basis)
        amp = rng.uniform(amplitude_min, amplitude_max)
        u_norm = h1_norm(u)
        v_norm = l2_norm(v)
        u = u * (amp / u_norm) if u_norm > 0 else u
        v = v * (0.5 * amp / v_norm) if v_norm > 0 else v
        out.append(State(u, v, 0.0))
    return out


# ---------------------------------------------------------------------------
# Continuous dependence
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DependenceTable:
    times: np.ndarray
    gaps: np.ndarray
    ratios: np.ndarray
    converged: bool


def phase_gap(a: State, b: State) -> float:
    """||u − ũ||_{H¹₀} + ||v − ṽ||_{H⁻¹}."""
    return h1_norm(a.u - b.u) + h_neg1_norm(a.v - b.v)


def continuous_dependence(u0: GridFunction, v0: GridFunction, du: GridFunction, dv: GridFunction,
                          cfg: ModelConfig, T: float, scheme: str = "be", stride: int = 10,
                          threads: int = 1) -> DependenceTable:
    run_cfg = cfg.replace(t_end=T)
    base = State(u0, v0, 0.0)
    perturbed = State(u0 + du, v0 + dv, 0.0)
    a, b = simulate_ensemble([base, perturbed], run_cfg, scheme, stride, threads)
    count = min(len(a.states), len(b.states))
    times = np.array([a.states[i].t for i in range(count)])
    gaps = np.array([phase_gap(a.states[i], b.states[i]) for i in range(count)])
    ratios = gaps / gaps[0] if gaps[0] > 0 else np.zeros_like(gaps)
    return DependenceTable(times, gaps, ratios, a.converged and b.converged)


def estimate_dependence_constant(cfg: ModelConfig, T: float, count: int = 8, amplitude: float = 1.0,
                                 perturbation: float = 1e-3, seed: int = 0, scheme: str = "be",
                                 stride: int = 10, threads: int = 1) -> float:
    """Empirical sup_t gap(t)/gap(0) over random pairs in a data ball."""
    grid = cfg.grid
    bases = random_initial_states(grid, count, amplitude, amplitude, seed)
    kicks = random_initial_states(grid, count, perturbation, perturbation, seed + 1)
    worst = 0.0
    for base, kick in zip(bases, kicks):
        table = continuous_dependence(base.u, base.v, kick.u, kick.v, cfg, T, scheme, stride, threads)
        worst = max(worst, float(np.max(table.ratios)))
    log.info(f"dependence constant over {count} pairs at T={T}: {worst:.4g}")
    return worst
