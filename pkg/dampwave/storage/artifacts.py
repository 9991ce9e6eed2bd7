"""CSV artifacts and the run manifest.

Every CSV starts with a `# seed=<seed>` line; floats are written with %.17g so
identical runs produce byte-identical bodies. Timestamps only go to the
manifest, which the orchestrator writes last.
"""
import csv
import logging
import platform
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from dampwave.services.errors import ArtifactError
from dampwave.services.grid import Grid, GridFunction

log = logging.getLogger("dampwave.storage")


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    return str(value)


def ensure_dir(path: Path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence], seed: int) -> Path:
    path = Path(path)
    ensure_dir(path.parent)
    with open(path, "w", newline="") as fh:
        fh.write(f"# seed={seed}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    log.debug(f"wrote {path}")
    return path


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"file not found: {path}")
    with open(path, newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(lines)
    rows = list(reader)
    if not rows:
        raise ArtifactError(f"{path} has no header")
    return rows[0], rows[1:]


# ---------------------------------------------------------------------------
# Grid functions
# ---------------------------------------------------------------------------

def write_grid_function(path: Path, u: GridFunction, seed: int, name: str = "u") -> Path:
    return write_csv(path, ["x", name], zip(u.grid.nodes, u.values), seed)


def read_grid_function(path: Path, grid: Grid) -> GridFunction:
    header, rows = read_csv(path)
    if len(header) < 2:
        raise ArtifactError(f"{path}: expected columns (x, value), got {header}")
    if len(rows) != grid.n:
        raise ArtifactError(f"{path}: {len(rows)} samples, grid has n={grid.n}")
    try:
        values = np.array([float(r[1]) for r in rows])
    except (ValueError, IndexError) as e:
        raise ArtifactError(f"{path}: malformed sample ({e})") from e
    return GridFunction(grid, values)


# ---------------------------------------------------------------------------
# Module artifacts
# ---------------------------------------------------------------------------

def write_trajectory(path: Path, record, seed: int) -> Path:
    def rows():
        for s in record.states:
            for x, u, v in zip(s.grid.nodes, s.u.values, s.v.values):
                yield (s.t, x, u, v)
    return write_csv(path, ["t", "x", "u", "v"], rows(), seed)


def write_ledger(path: Path, ledger, seed: int) -> Path:
    rows = zip(ledger.times, ledger.E_values, ledger.dissipation_cumulative, ledger.inequality_residuals)
    return write_csv(path, ["t", "E", "D_cumulative", "residual"], rows, seed)


def write_stationary_set(path: Path, solutions, seed: int) -> Path:
    def rows():
        for idx, sol in enumerate(solutions):
            for x, u in zip(sol.u.grid.nodes, sol.u.values):
                yield (idx, sol.basin_hits, sol.residual_l2, x, u)
    return write_csv(path, ["index", "basin_hits", "residual_l2", "x", "u"], rows(), seed)


def write_decay_report(path: Path, report, seed: int) -> Path:
    rows = zip(report.t_grid, report.exact, report.bound, report.ratio)
    return write_csv(path, ["t", "exact_norm", "bound", "ratio"], rows, seed)


def write_campaign(path: Path, rows, seed: int) -> Path:
    header = ["p", "f_bound", "u0", "seed", "control", "max_u", "A6", "max_du", "A7", "pass"]
    body = ((r.p, r.f_bound, r.u0, r.seed, r.control, r.max_u, r.a6, r.max_du, r.a7, r.passed) for r in rows)
    return write_csv(path, header, body, seed)


def write_table(path: Path, header: Sequence[str], rows: Iterable[Sequence], seed: int) -> Path:
    return write_csv(path, header, rows, seed)


# ---------------------------------------------------------------------------
# Manifest / failure artifacts
# ---------------------------------------------------------------------------

def library_versions() -> dict[str, str]:
    import numpy
    import pydantic
    import scipy
    return {
        "python": platform.python_version(),
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "pydantic": pydantic.VERSION,
    }


def write_manifest(out_dir: Path, entries: dict) -> Path:
    path = ensure_dir(out_dir) / "manifest.txt"
    with open(path, "w") as fh:
        for key, value in entries.items():
            fh.write(f"{key} = {_fmt(value)}\n")
    return path


def write_failure(out_dir: Path, error: Exception) -> Path:
    path = ensure_dir(out_dir) / "failure.txt"
    with open(path, "w") as fh:
        fh.write(f"error = {type(error).__name__}\n")
        fh.write(f"detail = {error}\n")
        for attr in ("iterations", "residual", "last_quotient"):
            if hasattr(error, attr):
                fh.write(f"{attr} = {_fmt(getattr(error, attr))}\n")
        last = getattr(error, "last_state", None)
        if last is not None and hasattr(last, "t"):
            fh.write(f"last_valid_t = {_fmt(last.t)}\n")
    return path
