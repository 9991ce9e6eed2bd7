"""
Pointwise bounds for the scalar inequality |u′ + |u|^{p−2}u| ≤ f on [0, 1]
==========================================================================
Every such u obeys, on [s₀, 1] and whatever u(0) is,

    |u| ≤ A6 = (p/(p−2) + ||f||_∞)^{1/(p−2)}
    |u′| ≤ A7 = (p/(p−2) + ||f||_∞)^{(p−1)/(p−2)} + ||f||_∞

The inequality is sampled through the extremal family u′ = −|u|^{p−2}u + θ(t)·F
with |θ| ≤ 1, F = ||f||_∞, integrated by backward Euler. The implicit scalar
equation x + dt|x|^{p−2}x = rhs is strictly monotone, so Newton started at
x = rhs converges monotonically; bisection covers anything left over.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from dampwave.services.workers import parallel_map

log = logging.getLogger("dampwave.odebound")

SLACK = 0.01
NEWTON_MAX_ITER = 200

Control = Callable[[int], np.ndarray]  # n_steps -> θ_1..θ_n

# ---------------------------------------------------------------------------
# Closed-form quantities
# ---------------------------------------------------------------------------

def _base(p: float, f_bound: float) -> float:
    if not p > 2.0:
        raise ValueError(f"bounds require p > 2, got {p}")
    if f_bound < 0:
        raise ValueError(f"f_bound must be >= 0, got {f_bound}")
    return p / (p - 2.0)


def _safe_pow(base: float, exponent: float) -> float:
    try:
        return math.pow(base, exponent)
    except OverflowError:
        return math.inf


def s0(p: float, f_bound: float) -> float:
    r = _base(p, f_bound)
    a = _safe_pow(r, 1.0 / (p - 2.0))
    if math.isinf(a):
        return 1.0 - 1.0 / r
    return 1.0 - (a - 1.0) / (a * r + f_bound)


def bound_values(p: float, f_bound: float) -> tuple[float, float]:
    base = _base(p, f_bound) + f_bound
    a6 = _safe_pow(base, 1.0 / (p - 2.0))
    a7 = _safe_pow(base, (p - 1.0) / (p - 2.0)) + f_bound
    return a6, a7


# ---------------------------------------------------------------------------
# Controls
# ---------------------------------------------------------------------------

def constant_control(theta: float = 1.0) -> Control:
    return lambda n: np.full(n, float(theta))


def alternating_control(start: float = 1.0) -> Control:
    """θ flips sign every step."""
    return lambda n: float(start) * np.where(np.arange(n) % 2 == 0, 1.0, -1.0)


def random_sign_control(seed: int) -> Control:
    return lambda n: np.random.default_rng(seed).choice([-1.0, 1.0], size=n)


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OdeBoundCase:
    p: float
    f_bound: float
    control: Control
    u0: float
    dt_ode: float = 1e-4

    def __post_init__(self):
        _base(self.p, self.f_bound)
        if not self.dt_ode > 0:
            raise ValueError(f"dt_ode must be > 0, got {self.dt_ode}")

    @property
    def n_steps(self) -> int:
        return int(round(1.0 / self.dt_ode))


@dataclass(frozen=True)
class OdeTrajectory:
    t: np.ndarray
    u: np.ndarray
    du: np.ndarray


def _solve_implicit(rhs: np.ndarray, p: np.ndarray, dt: float) -> np.ndarray:
    """Root of x + dt|x|^{p−2}x = rhs, elementwise."""
    x = rhs.copy()
    active = np.ones(x.shape, dtype=bool)
    for _ in range(NEWTON_MAX_ITER):
        xa, pa, ra = x[active], p[active], rhs[active]
        mag = np.abs(xa) ** (pa - 2.0)
        g = xa + dt * mag * xa - ra
        dg = 1.0 + dt * (pa - 1.0) * mag
        step = g / dg
        x[active] = xa - step
        still = np.abs(step) > 1e-14 * np.maximum(1.0, np.abs(xa))
        idx = np.flatnonzero(active)
        active[idx[~still]] = False
        if not active.any():
            return x
    for i in np.flatnonzero(active):
        r, q = rhs[i], p[i]
        lo, hi = min(0.0, r), max(0.0, r)
        if lo == hi:
            x[i] = 0.0
            continue
        x[i] = brentq(lambda y: y + dt * abs(y) ** (q - 2.0) * y - r, lo, hi, xtol=1e-300, rtol=1e-15)
    return x


def integrate_batch(p: np.ndarray, f_bound: np.ndarray, theta: np.ndarray, u0: np.ndarray,
                    dt_ode: float) -> OdeTrajectory:
    """Integrate many cases at once; theta has shape (cases, steps)."""
    p = np.asarray(p, dtype=float)
    f_bound = np.asarray(f_bound, dtype=float)
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    if np.any(np.abs(theta) > 1.0):
        raise ValueError("control must satisfy |θ| <= 1")
    cases, steps = theta.shape
    u = np.empty((cases, steps + 1))
    du = np.empty((cases, steps + 1))
    u[:, 0] = u0
    du[:, 0] = -np.abs(u[:, 0]) ** (p - 2.0) * u[:, 0] + theta[:, 0] * f_bound
    forcing = theta * f_bound[:, None]
    for k in range(steps):
        x = _solve_implicit(u[:, k] + dt_ode * forcing[:, k], p, dt_ode)
        u[:, k + 1] = x
        # derivative from the right-hand side, not by differencing
        du[:, k + 1] = -np.abs(x) ** (p - 2.0) * x + forcing[:, k]
    t = dt_ode * np.arange(steps + 1)
    return OdeTrajectory(t=t, u=u, du=du)


def _solve_scalar(rhs: float, p: float, dt: float) -> float:
    x = rhs
    for _ in range(NEWTON_MAX_ITER):
        mag = abs(x) ** (p - 2.0)
        step = (x + dt * mag * x - rhs) / (1.0 + dt * (p - 1.0) * mag)
        x -= step
        if abs(step) <= 1e-14 * max(1.0, abs(x)):
            return x
    lo, hi = min(0.0, rhs), max(0.0, rhs)
    if lo == hi:
        return 0.0
    return brentq(lambda y: y + dt * abs(y) ** (p - 2.0) * y - rhs, lo, hi, xtol=1e-300, rtol=1e-15)


def integrate_case(case: OdeBoundCase) -> OdeTrajectory:
    """Single case; a plain float loop is much faster than length-1 arrays."""
    theta = case.control(case.n_steps)
    if np.any(np.abs(theta) > 1.0):
        raise ValueError("control must satisfy |θ| <= 1")
    forcing = (theta * case.f_bound).tolist()
    p, dt = case.p, case.dt_ode
    u = [float(case.u0)]
    du = [-abs(u[0]) ** (p - 2.0) * u[0] + forcing[0]]
    x = u[0]
    for k in range(case.n_steps):
        x = _solve_scalar(x + dt * forcing[k], p, dt)
        u.append(x)
        du.append(-abs(x) ** (p - 2.0) * x + forcing[k])
    t = dt * np.arange(case.n_steps + 1)
    return OdeTrajectory(t=t, u=np.asarray(u), du=np.asarray(du))


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OdeBoundReport:
    s0: float
    max_u: float
    max_du: float
    a6: float
    a7: float
    resolved: bool

    @property
    def passed(self) -> bool:
        return self.max_u <= self.a6 * (1.0 + SLACK) and self.max_du <= self.a7 * (1.0 + SLACK)


def _window_report(t: np.ndarray, u: np.ndarray, du: np.ndarray, p: float, f_bound: float,
                   dt_ode: float) -> OdeBoundReport:
    start = s0(p, f_bound)
    a6, a7 = bound_values(p, f_bound)
    window = t >= start
    max_u = float(np.max(np.abs(u[window])))
    max_du = float(np.max(np.abs(du[window])))
    # one step moves u by at most dt·max|u′|; it has to stay well inside the bound
    resolved = dt_ode * max_du < SLACK * a6
    return OdeBoundReport(start, max_u, max_du, a6, a7, bool(resolved))


def verify_lemma(case: OdeBoundCase, trajectory: Optional[OdeTrajectory] = None) -> OdeBoundReport:
    traj = trajectory or integrate_case(case)
    report = _window_report(traj.t, traj.u, traj.du, case.p, case.f_bound, case.dt_ode)
    if not report.resolved:
        log.warning(f"dt_ode={case.dt_ode} is coarse for p={case.p}, f_bound={case.f_bound}")
    return report


# ---------------------------------------------------------------------------
# Randomized campaign
# ---------------------------------------------------------------------------

CONTROL_KINDS = ("plus", "minus", "alternating", "random")


@dataclass(frozen=True)
class CampaignRow:
    case: int
    seed: int
    p: float
    f_bound: float
    u0: float
    control: str
    max_u: float
    a6: float
    max_du: float
    a7: float
    passed: bool
    resolved: bool


def campaign_case(seed: int, index: int) -> tuple[float, float, float, str, Control]:
    """Parameters of campaign case `index`; depends only on (seed, index)."""
    rng = np.random.default_rng([seed, index])
    p = 6.0 - 4.0 * rng.random()          # (2, 6]
    f_bound = 10.0 * rng.random()
    magnitude = 10.0 ** rng.uniform(-1.0, 6.0)
    u0 = float(rng.choice([-1.0, 1.0]) * magnitude)
    kind = CONTROL_KINDS[int(rng.integers(len(CONTROL_KINDS)))]
    if kind == "plus":
        control = constant_control(1.0)
    elif kind == "minus":
        control = constant_control(-1.0)
    elif kind == "alternating":
        control = alternating_control(float(rng.choice([-1.0, 1.0])))
    else:
        control = random_sign_control(int(rng.integers(2 ** 31)))
    return p, f_bound, u0, kind, control


def _run_chunk(args) -> list[CampaignRow]:
    seed, indices, dt_ode = args
    n_steps = int(round(1.0 / dt_ode))
    params = [campaign_case(seed, i) for i in indices]
    p = np.array([c[0] for c in params])
    fb = np.array([c[1] for c in params])
    u0 = np.array([c[2] for c in params])
    theta = np.vstack([c[4](n_steps) for c in params])
    traj = integrate_batch(p, fb, theta, u0, dt_ode)
    rows = []
    for j, i in enumerate(indices):
        rep = _window_report(traj.t, traj.u[j], traj.du[j], p[j], fb[j], dt_ode)
        rows.append(CampaignRow(
            case=i, seed=seed, p=float(p[j]), f_bound=float(fb[j]), u0=float(u0[j]),
            control=params[j][3], max_u=rep.max_u, a6=rep.a6, max_du=rep.max_du, a7=rep.a7,
            passed=rep.passed, resolved=rep.resolved,
        ))
    return rows


def run_campaign(n_cases: int, seed: int = 0, threads: int = 1, dt_ode: float = 1e-4,
                 batch_size: int = 250) -> list[CampaignRow]:
    chunks = [
        (seed, list(range(start, min(start + batch_size, n_cases))), dt_ode)
        for start in range(0, n_cases, batch_size)
    ]
    rows = [row for chunk in parallel_map(_run_chunk, chunks, threads) for row in chunk]
    failures = sum(not r.passed for r in rows)
    coarse = sum(not r.resolved for r in rows)
    log.info(f"ODE bound campaign: {len(rows)} cases, {failures} violations, {coarse} coarse")
    return rows
