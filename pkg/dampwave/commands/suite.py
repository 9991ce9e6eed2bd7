"""
`suite`: the acceptance battery
===============================
Twelve property checks at desk scale. `--quick` shrinks grids, ensembles and
horizons but keeps every check and threshold. Each check writes its own CSVs
under <out>/<check name>/; the summary table goes to <out>/suite_summary.csv
and the exit status is 0 iff every check passes.
"""
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from dampwave.commands.context import RunContext
from dampwave.commands.verify import (
    CLOSED_FORM_TOL, DECAY_PAIRS, EMBEDDING_GROWTH, closed_form_check, decay_summary, embedding_summary,
)
from dampwave.models.config import ExpressionTerm, ModelConfig, Nonlinearity
from dampwave.services.dynamics import (
    State, continuous_dependence, estimate_dependence_constant, random_initial_states, simulate,
    simulate_ensemble,
)
from dampwave.services.errors import NumericalError
from dampwave.services.grid import Grid, h1_norm, l2_norm, monotonicity_gap, sample, zeros
from dampwave.services.model import poincare_constant
from dampwave.services.odebound import run_campaign
from dampwave.services.stationary import attractor_regularity_report, omega_limit
from dampwave.storage import artifacts

log = logging.getLogger("dampwave.commands.suite")

CUBIC = Nonlinearity(poly_coeffs=(0.0, 0.0, 0.0, 1.0))
CUBIC_PLUS_LINEAR = Nonlinearity(poly_coeffs=(0.0, 2.0, 0.0, 1.0))
STRONG_LINEAR = Nonlinearity(poly_coeffs=(0.0, 100.0, 0.0, 1.0))
CONVERGENCE_MODES = 2
DEPENDENCE_PAIRS = 4
SINE = (ExpressionTerm(kind="sin", coeff=1.0, k=1.0),)


@dataclass(frozen=True)
class SuiteSizes:
    energy_configs: int = 20
    energy_grid: int = 64
    equality_grid: int = 64
    oracle_grid: int = 64
    poincare_resolution: int = 512
    monotonicity_samples: int = 1_000_000
    convergence_ensemble: int = 16
    convergence_grid: int = 64
    convergence_t: float = 100.0
    regularity_grids: tuple[int, ...] = (128, 256, 512)
    regularity_ensemble: int = 4
    regularity_t: float = 40.0
    dependence_t: float = 5.0
    decay_grids: tuple[int, ...] = (128, 512)
    embedding_grids: tuple[int, ...] = (128, 256, 512, 1024)
    campaign_cases: int = 10_000
    determinism_cases: int = 500


QUICK = SuiteSizes(
    energy_configs=6,
    energy_grid=32,
    equality_grid=32,
    oracle_grid=32,
    poincare_resolution=128,
    monotonicity_samples=100_000,
    convergence_ensemble=4,
    convergence_grid=32,
    convergence_t=60.0,
    regularity_grids=(32, 64, 128),
    regularity_ensemble=2,
    regularity_t=20.0,
    dependence_t=2.0,
    decay_grids=(64, 128),
    embedding_grids=(128, 256),
    campaign_cases=500,
    determinism_cases=100,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    metric: float
    threshold: float
    detail: str = ""


@dataclass(frozen=True)
class SuiteRun:
    sizes: SuiteSizes
    seed: int
    threads: int
    out_dir: Path

    def dir_for(self, name: str) -> Path:
        return artifacts.ensure_dir(self.out_dir / name)


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------

def check_energy_inequality(run: SuiteRun) -> CheckResult:
    """Backward Euler: E_{n+1} − E_n + dt||v⁺_x||² ≤ 10·newton_tol at every step."""
    n = run.sizes.energy_grid
    grid = Grid(n)
    initials = random_initial_states(grid, run.sizes.energy_configs, 1.0, 5.0, run.seed)
    rows, worst, violations = [], -math.inf, 0
    for i, initial in enumerate(initials):
        rng = np.random.default_rng([run.seed, i])
        p = float(rng.choice([2.5, 3.0, 3.5]))
        g_terms = SINE if rng.random() < 0.5 else ()
        cfg = ModelConfig(p=p, nonlinearity=CUBIC, g_terms=g_terms, grid_n=n, dt=0.01, t_end=1.0)
        rec = simulate(initial, cfg, "be", stride=cfg.n_steps)
        residuals = rec.ledger.step_residuals()
        limit = 10.0 * cfg.newton_tol
        bad = int(np.sum(residuals > limit)) + (0 if rec.converged else 1)
        violations += bad
        worst = max(worst, float(np.max(residuals)))
        rows.append((i, p, bool(g_terms), float(np.max(residuals)), bad))
    artifacts.write_table(run.dir_for("energy_inequality") / "configs.csv",
                          ["config", "p", "forced", "max_step_residual", "violations"], rows, run.seed)
    return CheckResult("energy_inequality", violations == 0, worst, 10.0 * 1e-10,
                       f"{violations} violations over {len(rows)} configs")


def _equality_residual(dt: float, n: int) -> float:
    cfg = ModelConfig(p=4.0, nonlinearity=CUBIC, g_terms=SINE, grid_n=n, dt=dt, t_end=1.0, newton_tol=1e-12)
    grid = cfg.grid
    initial = State(sample(grid, lambda x: np.sin(math.pi * x)), zeros(grid))
    rec = simulate(initial, cfg, "mp", stride=cfg.n_steps)
    if not rec.converged:
        raise NumericalError(f"midpoint run failed at dt={dt}: {rec.failure}")
    return float(np.max(np.abs(rec.ledger.as_arrays()["residual"])))


def check_energy_equality(run: SuiteRun) -> CheckResult:
    """Midpoint: the ledger residual shrinks ≥ 3.5× per dt-halving."""
    dts = [0.02, 0.01, 0.005, 0.0025]
    residuals = [_equality_residual(dt, run.sizes.equality_grid) for dt in dts]
    ratios = [a / b for a, b in zip(residuals[:-1], residuals[1:])]
    artifacts.write_table(run.dir_for("energy_equality") / "halving.csv", ["dt", "max_residual"],
                          zip(dts, residuals), run.seed)
    worst = min(ratios)
    return CheckResult("energy_equality", worst >= 3.5, worst, 3.5,
                       "ratios " + ", ".join(f"{r:.2f}" for r in ratios))


def modal_solution(lam: float, t: float) -> float:
    """c(t) for c″ + λc′ + λc = 0, c(0) = 1, c′(0) = 0 (λ > 4)."""
    root = math.sqrt(lam * lam - 4.0 * lam)
    r_plus, r_minus = (-lam + root) / 2.0, (-lam - root) / 2.0
    a = -r_minus / (r_plus - r_minus)
    b = r_plus / (r_plus - r_minus)
    return a * math.exp(r_plus * t) + b * math.exp(r_minus * t)


def linear_oracle_errors(n: int, dts: list[float], scheme: str) -> list[float]:
    grid = Grid(n)
    mode = sample(grid, lambda x: np.sin(math.pi * x))
    lam = (4.0 / grid.h ** 2) * math.sin(math.pi * grid.h / 2.0) ** 2
    errors = []
    for dt in dts:
        cfg = ModelConfig(p=2.0, allow_linear=True, grid_n=n, dt=dt, t_end=1.0)
        rec = simulate(State(mode, zeros(grid)), cfg, scheme, stride=cfg.n_steps)
        exact = mode * modal_solution(lam, rec.final.t)
        errors.append(l2_norm(rec.final.u - exact))
    return errors


def check_linear_oracle(run: SuiteRun) -> CheckResult:
    """p = 2 single mode against the closed form: order 1 for BE, 2 for MP (± 0.3)."""
    dts = [1 / 20, 1 / 40, 1 / 80, 1 / 160]
    rows, offsets = [], []
    for scheme, expected in (("be", 1.0), ("mp", 2.0)):
        errors = linear_oracle_errors(run.sizes.oracle_grid, dts, scheme)
        order = math.log2(errors[-2] / errors[-1])
        offsets.append(abs(order - expected))
        rows.extend((scheme, dt, e) for dt, e in zip(dts, errors))
        rows.append((scheme, "order", order))
    artifacts.write_table(run.dir_for("linear_oracle") / "errors.csv", ["scheme", "dt", "error"], rows, run.seed)
    worst = max(offsets)
    return CheckResult("linear_oracle", worst <= 0.3, worst, 0.3, "max |measured − expected order|")


def check_poincare(run: SuiteRun) -> CheckResult:
    res = run.sizes.poincare_resolution
    lam2 = poincare_constant(2.0, res)
    lam4 = poincare_constant(4.0, res)
    exact4 = 3.0 ** 0.25 * 2.0 * math.pi / (4.0 * math.sin(math.pi / 4.0))
    err2, err4 = abs(lam2 - math.pi), abs(lam4 - exact4)
    artifacts.write_table(run.dir_for("poincare") / "constants.csv", ["p", "lambda", "exact"],
                          [(2.0, lam2, math.pi), (4.0, lam4, exact4)], run.seed)
    return CheckResult("poincare", err2 < 1e-3 and err4 < 1e-2, max(err2, err4), 1e-2,
                       f"|λ(2) − π| = {err2:.2e}, |λ(4) − exact| = {err4:.2e}")


def check_monotonicity(run: SuiteRun) -> CheckResult:
    rng = np.random.default_rng(run.seed)
    count = run.sizes.monotonicity_samples
    x = rng.uniform(-2.0, 2.0, count)
    y = rng.uniform(-2.0, 2.0, count)
    p = 6.0 - 4.0 * rng.random(count)
    gaps = monotonicity_gap(x, y, p)
    worst = float(np.min(gaps))
    equality = max(abs(monotonicity_gap(1.0, -1.0, q)) for q in (2.5, 3.0, 4.0, 6.0))
    artifacts.write_table(run.dir_for("monotonicity") / "gaps.csv", ["samples", "min_gap", "equality_gap"],
                          [(count, worst, equality)], run.seed)
    return CheckResult("monotonicity", worst >= -1e-12 and equality <= 1e-12, worst, -1e-12,
                       f"equality witness {equality:.1e}")


def check_convergence(run: SuiteRun) -> CheckResult:
    """Non-degenerate p = 3 problem: every member ends within 1e−3 of u = 0, Lyapunov never rises.

    Near u = 0 the flux is degenerate, so mode k is overdamped and relaxes at
    about μ/λ_k with μ = f′(0). STRONG_LINEAR and two-mode data keep every
    mode that carries energy well inside the horizon.
    """
    sizes = run.sizes
    cfg = ModelConfig(p=3.0, nonlinearity=STRONG_LINEAR, grid_n=sizes.convergence_grid,
                      dt=0.05, t_end=sizes.convergence_t)
    initials = random_initial_states(cfg.grid, sizes.convergence_ensemble, 1.0, 10.0, run.seed,
                                     modes=CONVERGENCE_MODES)
    records = simulate_ensemble(initials, cfg, "be", stride=50, threads=run.threads)
    slack = 10.0 * cfg.newton_tol
    rows = []
    for i, rec in enumerate(records):
        rows.append((i, h1_norm(rec.final.u), rec.ledger.is_nonincreasing(slack), rec.converged))
    artifacts.write_table(run.dir_for("convergence") / "members.csv",
                          ["member", "distance_to_zero", "lyapunov_monotone", "converged"], rows, run.seed)
    worst = max(r[1] for r in rows)
    ok = worst < 1e-3 and all(r[2] and r[3] for r in rows)
    return CheckResult("convergence", ok, worst, 1e-3, f"{len(rows)} members to T={sizes.convergence_t}")


def check_regularity(run: SuiteRun) -> CheckResult:
    """W^{1,∞} sups of the ω-limit under grid refinement and amplitude scaling."""
    sizes = run.sizes
    g_terms = (ExpressionTerm(kind="sin", coeff=5.0, k=1.0),)
    estimates = {}
    for n in sizes.regularity_grids:
        cfg = ModelConfig(p=3.0, nonlinearity=CUBIC_PLUS_LINEAR, g_terms=g_terms, grid_n=n, dt=0.05,
                          t_end=sizes.regularity_t)
        ensemble = random_initial_states(cfg.grid, sizes.regularity_ensemble, 1.0, 1.0, run.seed)
        estimates[n] = omega_limit(ensemble, cfg, sizes.regularity_t, n_starts=4, seed=run.seed,
                                   threads=run.threads, late_fraction=0.25)
    report = attractor_regularity_report(estimates, 3.0)
    coarse = sizes.regularity_grids[0]
    cfg = ModelConfig(p=3.0, nonlinearity=CUBIC_PLUS_LINEAR, g_terms=g_terms, grid_n=coarse, dt=0.05,
                      t_end=sizes.regularity_t)
    big = random_initial_states(cfg.grid, sizes.regularity_ensemble, 10.0, 10.0, run.seed)
    scaled = omega_limit(big, cfg, sizes.regularity_t, stationary_set=estimates[coarse].stationary_set,
                         threads=run.threads, late_fraction=0.25)
    base_sup = estimates[coarse].sup_w1inf_u
    factor = max(scaled.sup_w1inf_u, base_sup) / min(scaled.sup_w1inf_u, base_sup)

    rows = [(r.n, r.sup_w1inf_u, r.sup_w1inf_v, r.drift_u, r.drift_v) for r in report.rows]
    artifacts.write_table(run.dir_for("regularity") / "refinement.csv",
                          ["n", "sup_w1inf_u", "sup_w1inf_v", "drift_u", "drift_v"], rows, run.seed)
    worst_drift = max(r.drift_u for r in report.rows)
    ok = worst_drift < 0.10 and factor < 2.0
    return CheckResult("regularity", ok, worst_drift, 0.10, f"amplitude ×10 factor {factor:.3f}")


def check_dependence(run: SuiteRun) -> CheckResult:
    """Halving the initial gap halves the final gap (± 20%); no perturbation, no gap.

    Also reports the empirical constant sup_t gap(t)/gap(0) over a small data ball.
    """
    cfg = ModelConfig(p=3.0, nonlinearity=CUBIC, g_terms=SINE, grid_n=32, dt=0.02, t_end=1.0)
    grid = cfg.grid
    T = run.sizes.dependence_t
    base = random_initial_states(grid, 1, 1.0, 1.0, run.seed)[0]
    kick = random_initial_states(grid, 1, 1e-3, 1e-3, run.seed + 1)[0]
    stride = int(round(T / cfg.dt))
    full = continuous_dependence(base.u, base.v, kick.u, kick.v, cfg, T, stride=stride, threads=run.threads)
    half = continuous_dependence(base.u, base.v, kick.u * 0.5, kick.v * 0.5, cfg, T, stride=stride,
                                 threads=run.threads)
    none = continuous_dependence(base.u, base.v, zeros(grid), zeros(grid), cfg, T, stride=stride,
                                 threads=run.threads)
    constant = estimate_dependence_constant(cfg, T, count=DEPENDENCE_PAIRS, seed=run.seed, threads=run.threads)
    ratio = float(half.gaps[-1] / full.gaps[-1])
    zero_gap = float(none.gaps[-1])
    artifacts.write_table(run.dir_for("dependence") / "gaps.csv", ["perturbation", "gap_0", "gap_T"],
                          [("full", full.gaps[0], full.gaps[-1]), ("half", half.gaps[0], half.gaps[-1]),
                           ("none", none.gaps[0], none.gaps[-1])], run.seed)
    artifacts.write_table(run.dir_for("dependence") / "constant.csv", ["T", "pairs", "constant"],
                          [(T, DEPENDENCE_PAIRS, constant)], run.seed)
    deviation = abs(ratio / 0.5 - 1.0)
    ok = (deviation <= 0.2 and zero_gap <= 1e-14 and full.converged and half.converged
          and math.isfinite(constant))
    return CheckResult("dependence", ok, deviation, 0.2,
                       f"gap ratio {ratio:.4f}, zero-perturbation gap {zero_gap:.1e}, C(T) ≈ {constant:.3g}")


def check_decay(run: SuiteRun) -> CheckResult:
    rows, ok, _ = decay_summary(run.sizes.decay_grids, run.dir_for("decay"), run.seed)
    artifacts.write_table(
        run.dir_for("decay") / "summary.csv",
        ["s", "sigma", "omega", "m_fit_coarse", "m_fit_fine", "M", "relative_change", "dominates", "stable"],
        rows, run.seed,
    )
    worst = max(r[6] for r in rows)
    return CheckResult("decay", ok, worst, 0.10, f"{len(DECAY_PAIRS)} (s, σ) pairs")


def check_embedding(run: SuiteRun) -> CheckResult:
    rows, growth = embedding_summary(run.sizes.embedding_grids, 0.25)
    artifacts.write_table(run.dir_for("embedding") / "constants.csv", ["n", "constant"], rows, run.seed)
    return CheckResult("embedding", growth < EMBEDDING_GROWTH, growth, EMBEDDING_GROWTH, "ε = 0.25")


def check_ode_bound(run: SuiteRun) -> CheckResult:
    rows = run_campaign(run.sizes.campaign_cases, run.seed, run.threads)
    artifacts.write_campaign(run.dir_for("ode_bound") / "campaign.csv", rows, run.seed)
    violations = sum(not r.passed for r in rows)
    error, report = closed_form_check()
    ok = violations == 0 and error < CLOSED_FORM_TOL and report.passed
    return CheckResult("ode_bound", ok, float(violations), 0.0,
                       f"{len(rows)} cases, closed-form error {error:.2e}")


def _determinism_outputs(out_dir: Path, run: SuiteRun) -> None:
    rows = run_campaign(run.sizes.determinism_cases, run.seed, run.threads)
    artifacts.write_campaign(out_dir / "campaign.csv", rows, run.seed)
    cfg = ModelConfig(p=3.0, nonlinearity=CUBIC, g_terms=SINE, grid_n=32, dt=0.02, t_end=0.5)
    initials = random_initial_states(cfg.grid, 4, 1.0, 5.0, run.seed)
    for i, rec in enumerate(simulate_ensemble(initials, cfg, "mp", stride=5, threads=run.threads)):
        artifacts.write_trajectory(out_dir / f"trajectory_{i}.csv", rec, run.seed)
        artifacts.write_ledger(out_dir / f"ledger_{i}.csv", rec.ledger, run.seed)


def check_determinism(run: SuiteRun) -> CheckResult:
    """Two identical runs must produce byte-identical CSVs."""
    base = run.dir_for("determinism")
    first, second = artifacts.ensure_dir(base / "run_a"), artifacts.ensure_dir(base / "run_b")
    _determinism_outputs(first, run)
    _determinism_outputs(second, run)
    names = sorted(p.name for p in first.glob("*.csv"))
    mismatched = [n for n in names if (first / n).read_bytes() != (second / n).read_bytes()]
    return CheckResult("determinism", not mismatched and bool(names), float(len(mismatched)), 0.0,
                       f"{len(names)} files compared")


CHECKS: list[Callable[[SuiteRun], CheckResult]] = [
    check_energy_inequality,
    check_energy_equality,
    check_linear_oracle,
    check_poincare,
    check_monotonicity,
    check_convergence,
    check_regularity,
    check_dependence,
    check_decay,
    check_embedding,
    check_ode_bound,
    check_determinism,
]


# ---------------------------------------------------------------------------
# Command
# ---------------------------------------------------------------------------

def run_checks(run: SuiteRun, checks: list[Callable[[SuiteRun], CheckResult]]) -> list[CheckResult]:
    results = []
    for idx, check in enumerate(checks, start=1):
        name = check.__name__.removeprefix("check_")
        log.info(f"🚀 [{idx}/{len(checks)}] {name}")
        try:
            result = check(run)
        except NumericalError as e:
            log.error(f"❌ {name}: {e}")
            result = CheckResult(name, False, math.nan, math.nan, str(e))
        log.info(f"{'✅' if result.passed else '❌'} {name}: metric={result.metric:.4g} ({result.detail})")
        results.append(result)
    return results


def run_suite(ctx: RunContext) -> int:
    sizes = QUICK if ctx.spec.quick else SuiteSizes()
    run = SuiteRun(sizes=sizes, seed=ctx.spec.seed, threads=ctx.spec.threads, out_dir=ctx.out_dir)
    results = run_checks(run, CHECKS)
    ctx.keep(artifacts.write_table(
        ctx.out_dir / "suite_summary.csv",
        ["check", "passed", "metric", "threshold", "detail"],
        [(r.name, r.passed, r.metric, r.threshold, r.detail) for r in results],
        ctx.spec.seed,
    ))
    ctx.artifacts.extend(sorted(p for p in ctx.out_dir.glob("*/**/*.csv")))
    passed = sum(r.passed for r in results)
    ctx.summary.update({"checks": len(results), "passed": passed, "quick": ctx.spec.quick})
    log.info(f"{'✅' if passed == len(results) else '❌'} suite: {passed}/{len(results)} checks passed")
    return 0 if passed == len(results) else 1


COMMANDS = {"suite": run_suite}
