"""Exception hierarchy: every failure carries the CLI exit code it maps to."""
from typing import Any, Optional


class DampwaveError(Exception):
    exit_code = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


# ---------------------------------------------------------------------------
# Input errors (exit 2)
# ---------------------------------------------------------------------------

class ConfigError(DampwaveError):
    """Bad configuration file or value. `line` is 1-based when known."""
    exit_code = 2

    def __init__(self, detail: str, key: Optional[str] = None, line: Optional[int] = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + detail)
        self.key = key
        self.line = line


class ArtifactError(DampwaveError):
    exit_code = 2


class LedgerError(DampwaveError, ValueError):
    exit_code = 2


# ---------------------------------------------------------------------------
# Numerical failures (exit 3)
# ---------------------------------------------------------------------------

class NumericalError(DampwaveError):
    exit_code = 3


class NewtonDivergenceError(NumericalError):
    def __init__(self, detail: str, iterations: int, residual: float, last_state: Any = None):
        super().__init__(
            f"{detail} (iterations={iterations}, residual={residual:.3e}); "
            f"try halving dt"
        )
        self.iterations = iterations
        self.residual = residual
        self.last_state = last_state


class NonFiniteStateError(NumericalError):
    def __init__(self, detail: str, last_state: Any = None):
        super().__init__(detail)
        self.last_state = last_state


class PoincareConvergenceError(NumericalError):
    def __init__(self, detail: str, last_iterate: Any = None, last_quotient: float = float("nan")):
        super().__init__(f"{detail} (last quotient={last_quotient:.8g})")
        self.last_iterate = last_iterate
        self.last_quotient = last_quotient


class StationaryDivergenceError(NumericalError):
    def __init__(self, detail: str, residual: float):
        super().__init__(f"{detail} (final residual={residual:.3e})")
        self.residual = residual
