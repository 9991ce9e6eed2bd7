"""dampwave: command-line entry point

Usage:
    python -m dampwave simulate --config run.cfg --out runs/sim
    python -m dampwave stationary --config run.cfg --threads 4
    python -m dampwave poincare --p 2
    python -m dampwave suite --quick --out runs/suite

Exit codes: 0 success, 1 a verification check failed, 2 bad input,
3 numerical failure (diagnostics in <out>/failure.txt).
"""
import argparse
import logging
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from pydantic import ValidationError

from dampwave import __version__
from dampwave.commands import simulate, stationary, suite, verify
from dampwave.commands.context import RunContext, load_context
from dampwave.models.config import ExperimentSpec
from dampwave.services.errors import DampwaveError, NumericalError
from dampwave.storage import artifacts
from dampwave.storage.config_file import echo_config

log = logging.getLogger("dampwave")

# Command registry
COMMANDS = {
    **simulate.COMMANDS,
    **stationary.COMMANDS,
    **verify.COMMANDS,
    **suite.COMMANDS,
}


def configure_logging() -> None:
    level = os.getenv("PLAP_LOG", "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(asctime)s [%(levelname)s] %(message)s")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dampwave",
                                     description="Strongly damped p-Laplacian wave equation experiments")
    parser.add_argument("command", choices=list(COMMANDS), help="Experiment to run")
    parser.add_argument("--config", type=Path, help="key = value config file")
    parser.add_argument("--out", type=Path, default=Path("runs"), help="Output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--scheme", choices=["be", "mp"], help="Overrides the config's scheme")
    parser.add_argument("--override-growth-check", action="store_true",
                        help="Run even if f violates the growth condition")
    parser.add_argument("--p", type=float, help="Exponent (poincare, or override for the config)")
    parser.add_argument("--quick", action="store_true", help="Reduced sizes, same checks")
    return parser


def _manifest(spec: ExperimentSpec, ctx: Optional[RunContext], status: int, started: datetime,
              wall_time: float, error: Optional[Exception]) -> dict:
    entries = {
        "command": spec.command,
        "dampwave": __version__,
        **artifacts.library_versions(),
        "seed": spec.seed,
        "threads": spec.threads,
        "scheme": spec.scheme or (ctx.scheme if ctx else ""),
        "quick": spec.quick,
        "config_path": spec.config_path or "",
        "started_at": started.isoformat(timespec="seconds"),
        "wall_time_s": round(wall_time, 3),
        "exit_status": status,
    }
    if error is not None:
        entries["error"] = str(error)
    if ctx is None:
        return entries
    if ctx.cfg is not None:
        entries.update({f"config.{k}": v for k, v in echo_config(ctx.cfg, ctx.options).items()})
    entries.update({f"summary.{k}": v for k, v in ctx.summary.items()})
    for idx, path in enumerate(ctx.artifacts):
        try:
            entries[f"artifact.{idx}"] = Path(path).relative_to(spec.output_dir)
        except ValueError:
            entries[f"artifact.{idx}"] = path
    return entries


def run(spec: ExperimentSpec) -> int:
    """Run one command; the manifest is written last, whatever the outcome."""
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    artifacts.ensure_dir(spec.output_dir)
    ctx: Optional[RunContext] = None
    error: Optional[Exception] = None
    try:
        ctx = load_context(spec)
        log.info(f"🚀 {spec.command} → {spec.output_dir} (seed={spec.seed}, threads={spec.threads})")
        status = COMMANDS[spec.command](ctx)
    except NumericalError as e:
        log.error(f"❌ numerical failure: {e}")
        path = artifacts.write_failure(spec.output_dir, e)
        if ctx is not None:
            ctx.keep(path)
        status, error = e.exit_code, e
    except DampwaveError as e:
        log.error(f"❌ {e}")
        status, error = e.exit_code, e
    wall = time.perf_counter() - t0
    artifacts.write_manifest(spec.output_dir, _manifest(spec, ctx, status, started, wall, error))
    log.info(f"{spec.command} finished with status {status} in {wall:.1f}s")
    return status


def main(argv: Optional[list[str]] = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    try:
        spec = ExperimentSpec(
            command=args.command,
            config_path=args.config,
            output_dir=args.out,
            seed=args.seed,
            threads=args.threads,
            scheme=args.scheme,
            override_growth_check=args.override_growth_check,
            p=args.p,
            quick=args.quick,
        )
    except ValidationError as e:
        err = e.errors()[0]
        log.error(f"❌ invalid option {'.'.join(str(x) for x in err['loc'])}: {err['msg']}")
        return 2
    return run(spec)


if __name__ == "__main__":
    sys.exit(main())
