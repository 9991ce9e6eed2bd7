"""`stationary` and `omega-limit`: the stationary set and where ensembles land."""
import logging

import numpy as np

from dampwave.commands.context import RunContext
from dampwave.commands.simulate import enforce_growth_condition
from dampwave.models.config import SolverSettings
from dampwave.services.dynamics import random_initial_states
from dampwave.services.grid import w1inf_norm
from dampwave.services.model import is_odd
from dampwave.services.stationary import (
    enumerate_stationary, follow_heteroclinic, invariance_check, is_closed_under_negation, omega_limit,
)
from dampwave.services.workers import parallel_map
from dampwave.storage import artifacts

log = logging.getLogger("dampwave.commands.stationary")

INVARIANCE_FRACTION = 0.1  # extra run time for the invariance check, as a share of t_long


def run_stationary(ctx: RunContext) -> int:
    cfg = ctx.require_config()
    solutions = enumerate_stationary(cfg, ctx.options.n_starts, ctx.spec.seed, ctx.spec.threads)
    ctx.keep(artifacts.write_stationary_set(ctx.out_dir / "stationary.csv", solutions, ctx.spec.seed))
    summary_rows = [
        (i, s.basin_hits, s.residual_l2, w1inf_norm(s.u)) for i, s in enumerate(solutions)
    ]
    ctx.keep(artifacts.write_table(
        ctx.out_dir / "stationary_summary.csv", ["index", "basin_hits", "residual_l2", "w1inf"],
        summary_rows, ctx.spec.seed,
    ))
    ctx.summary["solutions"] = len(solutions)

    if len(solutions) > 1:
        reports = parallel_map(
            lambda i: follow_heteroclinic(cfg, solutions, i, seed=ctx.spec.seed, scheme=ctx.scheme),
            list(range(len(solutions))), ctx.spec.threads,
        )
        ctx.keep(artifacts.write_table(
            ctx.out_dir / "heteroclinic.csv",
            ["origin", "target", "target_distance", "lyapunov_drop", "converged"],
            [(r.origin_index, r.target_index, r.target_distance, r.lyapunov_drop, r.converged)
             for r in reports],
            ctx.spec.seed,
        ))

    # f odd and g = 0: the problem commutes with u ↦ −u
    if is_odd(cfg.nonlinearity) and not np.any(cfg.forcing.values):
        symmetric = is_closed_under_negation(solutions, SolverSettings().dedup_tol)
        ctx.summary["closed_under_negation"] = symmetric
        if not symmetric:
            log.error("❌ stationary set of an odd problem is not closed under u ↦ −u")
            return 1
    log.info(f"✅ {len(solutions)} stationary solutions")
    return 0


def run_omega_limit(ctx: RunContext) -> int:
    cfg = ctx.require_config()
    enforce_growth_condition(ctx)
    opts = ctx.options
    ensemble = random_initial_states(
        cfg.grid, opts.ensemble_size, opts.amplitude_min, opts.amplitude_max, ctx.spec.seed
    )
    log.info(f"🚀 ω-limit of {len(ensemble)} states to T={opts.t_long} ({ctx.scheme})")
    est = omega_limit(
        ensemble, cfg, opts.t_long, ctx.scheme, n_starts=opts.n_starts, seed=ctx.spec.seed,
        threads=ctx.spec.threads, stride=opts.stride,
    )
    invariance = invariance_check(est, cfg, INVARIANCE_FRACTION * opts.t_long, ctx.scheme, ctx.spec.threads)
    rows = [
        (i, d, bool(settled), change, vsup, f or "")
        for i, (d, settled, change, vsup, f) in enumerate(
            zip(est.distances_to_N, est.settled, invariance, est.velocity_sup, est.member_failures)
        )
    ]
    ctx.keep(artifacts.write_table(
        ctx.out_dir / "omega_limit.csv",
        ["member", "distance_to_N", "settled", "invariance_change", "velocity_sup", "failure"],
        rows, ctx.spec.seed,
    ))
    ctx.keep(artifacts.write_stationary_set(ctx.out_dir / "stationary.csv", est.stationary_set, ctx.spec.seed))
    ctx.summary.update({
        "max_distance_to_N": est.max_distance,
        "sup_w1inf_u": est.sup_w1inf_u,
        "sup_w1inf_v": est.sup_w1inf_v,
        "max_invariance_change": float(np.max(invariance)) if invariance.size else 0.0,
        "velocity_eps": est.velocity_eps,
        "sup_velocity_norm": float(np.max(est.velocity_sup)) if est.velocity_sup.size else 0.0,
        "failed_members": sum(f is not None for f in est.member_failures),
    })
    log.info(f"✅ max distance to 𝒩 {est.max_distance:.3e}, sup |u_x| {est.sup_w1inf_u:.4g}")
    return 0


COMMANDS = {"stationary": run_stationary, "omega-limit": run_omega_limit}
