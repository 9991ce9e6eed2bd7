"""`poincare`, `verify-decay`, `verify-embedding`, `verify-lemma-a2`."""
import logging
from pathlib import Path

import numpy as np

from dampwave.commands.context import RunContext
from dampwave.services.errors import ConfigError
from dampwave.services.grid import Grid
from dampwave.services.model import poincare_minimizer
from dampwave.services.odebound import (
    OdeBoundCase, OdeBoundReport, constant_control, integrate_case, run_campaign, verify_lemma,
)
from dampwave.services.spectral import (
    DecayReport, check_decay_estimate, embedding_bound_check, embedding_sample_family,
)
from dampwave.storage import artifacts

log = logging.getLogger("dampwave.commands.verify")

DECAY_PAIRS = ((0.0, 0.0), (0.0, 0.5), (-0.5, 0.5))
DECAY_STABILITY = 0.10
EMBEDDING_GRIDS = (128, 256, 512, 1024)
EMBEDDING_GROWTH = 2.0
CLOSED_FORM_TOL = 1e-4
CAMPAIGN_CASES = 10_000


# ---------------------------------------------------------------------------
# Shared checks (also used by `suite`)
# ---------------------------------------------------------------------------

def decay_summary(grids: tuple[int, ...], out_dir: Path, seed: int) -> tuple[list[tuple], bool, list[Path]]:
    """Fit the decay bound per (s, σ) on every grid; one CSV per fit."""
    rows, paths = [], []
    ok = True
    for s, sigma in DECAY_PAIRS:
        reports: list[DecayReport] = [check_decay_estimate(s, sigma, grid=Grid(n)) for n in grids]
        for rep in reports:
            name = f"decay_s{s:+.1f}_sigma{sigma:+.1f}_n{rep.n}.csv"
            paths.append(artifacts.write_decay_report(out_dir / name, rep, seed))
        change = abs(reports[-1].m_fit - reports[0].m_fit) / reports[0].m_fit
        stable = change < DECAY_STABILITY
        dominates = all(r.dominates for r in reports)
        ok = ok and stable and dominates
        rows.append((s, sigma, reports[0].omega, reports[0].m_fit, reports[-1].m_fit, reports[-1].M,
                     change, dominates, stable))
    return rows, ok, paths


def embedding_summary(grids: tuple[int, ...], eps: float) -> tuple[list[tuple], float]:
    """(n, constant) rows and the growth of the constant from the coarsest to the finest grid."""
    constants = [embedding_bound_check(embedding_sample_family(Grid(n)), eps) for n in grids]
    return list(zip(grids, constants)), constants[-1] / constants[0]


def closed_form_check() -> tuple[float, OdeBoundReport]:
    """u′ = −u³ from u(0) = 1000: |numerical − exact| at t = 1/2, and the bound report."""
    case = OdeBoundCase(p=4.0, f_bound=0.0, control=constant_control(0.0), u0=1000.0, dt_ode=5e-6)
    traj = integrate_case(case)
    idx = int(np.argmin(np.abs(traj.t - 0.5)))
    exact = (case.u0 ** -2 + 2.0 * traj.t[idx]) ** -0.5
    return float(abs(traj.u[idx] - exact)), verify_lemma(case, traj)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def run_poincare(ctx: RunContext) -> int:
    p = ctx.spec.p if ctx.spec.p is not None else (ctx.cfg.p if ctx.cfg else None)
    if p is None:
        raise ConfigError("poincare needs --p or a config with p")
    resolution = 128 if ctx.spec.quick else 512
    try:
        lam, minimizer = poincare_minimizer(p, resolution, ctx.spec.threads)
    except ValueError as e:
        raise ConfigError(str(e), key="p") from e
    print(f"{lam:.10f}")
    ctx.keep(artifacts.write_grid_function(ctx.out_dir / "poincare_minimizer.csv", minimizer, ctx.spec.seed))
    ctx.summary.update({"p": p, "resolution": resolution, "lambda": lam})
    log.info(f"✅ λ(p={p}) = {lam:.10f} at resolution {resolution}")
    return 0


def run_verify_decay(ctx: RunContext) -> int:
    grids = (64, 128) if ctx.spec.quick else (128, 512)
    rows, ok, paths = decay_summary(grids, ctx.out_dir, ctx.spec.seed)
    ctx.artifacts.extend(paths)
    ctx.keep(artifacts.write_table(
        ctx.out_dir / "decay_summary.csv",
        ["s", "sigma", "omega", "m_fit_coarse", "m_fit_fine", "M", "relative_change", "dominates", "stable"],
        rows, ctx.spec.seed,
    ))
    ctx.summary["decay_pass"] = ok
    log.info(f"{'✅' if ok else '❌'} decay estimate on n={grids}")
    return 0 if ok else 1


def run_verify_embedding(ctx: RunContext) -> int:
    eps = ctx.options.eps
    grids = EMBEDDING_GRIDS[:2] if ctx.spec.quick else EMBEDDING_GRIDS
    rows, growth = embedding_summary(grids, eps)
    ctx.keep(artifacts.write_table(ctx.out_dir / "embedding.csv", ["n", "constant"], rows, ctx.spec.seed))
    ok = growth < EMBEDDING_GROWTH
    ctx.summary.update({"eps": eps, "embedding_growth": growth, "embedding_pass": ok})
    log.info(f"{'✅' if ok else '❌'} embedding constant growth {growth:.3f} over n={grids[0]}..{grids[-1]} (ε={eps})")
    return 0 if ok else 1


def run_verify_lemma(ctx: RunContext) -> int:
    n_cases = 500 if ctx.spec.quick else CAMPAIGN_CASES
    rows = run_campaign(n_cases, ctx.spec.seed, ctx.spec.threads)
    ctx.keep(artifacts.write_campaign(ctx.out_dir / "lemma_campaign.csv", rows, ctx.spec.seed))
    violations = sum(not r.passed for r in rows)
    error, report = closed_form_check()
    ok = violations == 0 and error < CLOSED_FORM_TOL and report.passed
    ctx.summary.update({
        "cases": len(rows),
        "violations": violations,
        "unresolved": sum(not r.resolved for r in rows),
        "closed_form_error": error,
        "lemma_pass": ok,
    })
    log.info(f"{'✅' if ok else '❌'} {len(rows)} cases, {violations} violations, closed-form error {error:.2e}")
    return 0 if ok else 1


COMMANDS = {
    "poincare": run_poincare,
    "verify-decay": run_verify_decay,
    "verify-embedding": run_verify_embedding,
    "verify-lemma-a2": run_verify_lemma,
}
