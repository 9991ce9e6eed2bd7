"""`simulate`: one trajectory from the configured initial data."""
import logging

from dampwave.commands.context import RunContext
from dampwave.models.config import sample_terms
from dampwave.services.dynamics import State, simulate
from dampwave.services.errors import ConfigError, NumericalError
from dampwave.services.model import check_growth_condition
from dampwave.storage import artifacts

log = logging.getLogger("dampwave.commands.simulate")


def enforce_growth_condition(ctx: RunContext) -> None:
    cfg = ctx.require_config()
    report = check_growth_condition(cfg.nonlinearity, cfg.p)
    ctx.summary["growth_satisfied"] = report.satisfied
    ctx.summary["growth_margin"] = report.margin
    ctx.summary["lambda"] = report.lambda_
    if not report.satisfied:
        if not ctx.spec.override_growth_check:
            raise ConfigError(
                f"f violates the growth condition (liminf={report.asymptotic_coefficient:.6g} "
                f"<= -λ^p={-report.lambda_ ** cfg.p:.6g}); pass --override-growth-check to run anyway"
            )
        log.warning("⚠️ growth condition overridden")


def run_simulate(ctx: RunContext) -> int:
    cfg = ctx.require_config()
    enforce_growth_condition(ctx)
    grid = cfg.grid
    initial = State(sample_terms(ctx.options.u0_terms, grid), sample_terms(ctx.options.v0_terms, grid), 0.0)
    log.info(f"🚀 simulate p={cfg.p} n={cfg.grid_n} dt={cfg.dt} T={cfg.t_end} scheme={ctx.scheme}")
    record = simulate(initial, cfg, ctx.scheme, ctx.options.stride, check_growth=False)

    seed = ctx.spec.seed
    ctx.keep(artifacts.write_trajectory(ctx.out_dir / "trajectory.csv", record, seed))
    ctx.keep(artifacts.write_ledger(ctx.out_dir / "ledger.csv", record.ledger, seed))
    ctx.summary.update({
        "steps": len(record.newton_iterations),
        "converged": record.converged,
        "max_residual": record.ledger.max_residual(),
        "final_t": record.final.t,
    })
    if not record.converged:
        raise NumericalError(record.failure or "integration stopped early")
    log.info(f"✅ {len(record.newton_iterations)} steps, max ledger residual {record.ledger.max_residual():.3e}")
    return 0


COMMANDS = {"simulate": run_simulate}
