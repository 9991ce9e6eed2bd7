"""Problem data and run options: pydantic schemas, frozen after validation."""
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from dampwave.services.grid import Grid, GridFunction


class Nonlinearity(BaseModel):
    """f(s) = Σ_j a_j s^j + Σ b·|s|^{q−2}s."""
    model_config = ConfigDict(frozen=True)

    poly_coeffs: tuple[float, ...] = ()
    power_terms: tuple[tuple[float, float], ...] = ()

    @field_validator("power_terms")
    @classmethod
    def _q_above_one(cls, terms):
        for b, q in terms:
            if not q > 1.0:
                raise ValueError(f"power term exponent q must be > 1 (got b={b}, q={q})")
        return terms


class ExpressionTerm(BaseModel):
    """One term of the expression grammar: c·sin(kπx) or c·x^k."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["sin", "pow"]
    coeff: float
    k: float

    def sample(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "sin":
            return self.coeff * np.sin(self.k * math.pi * x)
        return self.coeff * x ** self.k


def sample_terms(terms: tuple[ExpressionTerm, ...], grid: Grid) -> GridFunction:
    x = grid.nodes
    values = np.zeros(grid.n)
    for term in terms:
        values += term.sample(x)
    return GridFunction(grid, values)


class ModelConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    p: float
    nonlinearity: Nonlinearity = Field(default_factory=Nonlinearity)
    g_terms: tuple[ExpressionTerm, ...] = ()
    g_samples: Optional[tuple[float, ...]] = None
    grid_n: int = 128
    dt: float = 0.01
    t_end: float = 1.0
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    # p = 2 is the linear reference problem; only tests and oracles use it
    allow_linear: bool = False

    @model_validator(mode="after")
    def _check(self):
        if self.allow_linear:
            if self.p < 2.0:
                raise ValueError(f"p must be >= 2, got {self.p}")
        elif not self.p > 2.0:
            raise ValueError(f"p must be > 2, got {self.p}")
        if self.grid_n < 2:
            raise ValueError(f"grid_n must be >= 2, got {self.grid_n}")
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.t_end < self.dt:
            raise ValueError(f"t_end ({self.t_end}) must be >= dt ({self.dt})")
        if not self.newton_tol > 0:
            raise ValueError(f"newton_tol must be > 0, got {self.newton_tol}")
        if self.newton_max_iter < 1:
            raise ValueError(f"newton_max_iter must be >= 1, got {self.newton_max_iter}")
        if self.g_samples is not None and len(self.g_samples) != self.grid_n:
            raise ValueError(
                f"g_samples has {len(self.g_samples)} values, grid_n is {self.grid_n}"
            )
        return self

    @property
    def grid(self) -> Grid:
        return Grid(self.grid_n)

    @property
    def forcing(self) -> GridFunction:
        grid = self.grid
        if self.g_samples is not None:
            return GridFunction(grid, np.asarray(self.g_samples))
        return sample_terms(self.g_terms, grid)

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_end / self.dt)))

    def replace(self, **changes) -> "ModelConfig":
        """Validated copy with some fields changed (refinements, horizons, ...)."""
        data = self.model_dump()
        data.update(changes)
        if "grid_n" in changes and self.g_samples is not None and "g_samples" not in changes:
            raise ValueError("cannot refine a config whose forcing is given as samples")
        return ModelConfig(**data)


class CommandOptions(BaseModel):
    """Per-command knobs that can live in the config file next to the model."""
    model_config = ConfigDict(frozen=True)

    scheme: Literal["be", "mp"] = "be"
    stride: int = Field(default=10, ge=1)
    n_starts: int = Field(default=16, ge=1)
    ensemble_size: int = Field(default=16, ge=1)
    t_long: float = Field(default=100.0, gt=0)
    amplitude_min: float = Field(default=1.0, ge=0)
    amplitude_max: float = Field(default=10.0, ge=0)
    eps: float = Field(default=0.25, ge=0, lt=0.5)
    # initial data for `simulate`; zero when empty
    u0_terms: tuple[ExpressionTerm, ...] = ()
    v0_terms: tuple[ExpressionTerm, ...] = ()

    @model_validator(mode="after")
    def _amplitudes(self):
        if self.amplitude_max < self.amplitude_min:
            raise ValueError("amplitude_max must be >= amplitude_min")
        return self


CommandName = Literal[
    "simulate", "stationary", "omega-limit", "poincare",
    "verify-decay", "verify-embedding", "verify-lemma-a2", "suite",
]


class ExperimentSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    command: CommandName
    config_path: Optional[Path] = None
    output_dir: Path = Path("runs")
    seed: int = 0
    threads: int = Field(default=1, ge=1)
    scheme: Optional[Literal["be", "mp"]] = None
    override_growth_check: bool = False
    p: Optional[float] = None
    quick: bool = False


# ---------------------------------------------------------------------------
# Solver settings (process-level knobs)
# ---------------------------------------------------------------------------

@dataclass
class SolverSettings:
    eps_reg: float = 0.0            # 0 = read DAMPWAVE_EPS_REG, default 1e-8
    stationary_tol: float = 1e-10
    stationary_step_tol: float = 1e-9  # h1 of the last Newton update; well below dedup_tol
    stationary_max_iter: int = 200
    dedup_tol: float = 1e-6
    max_halvings: int = 12
    poincare_restarts: int = 10
    poincare_max_iter: int = 500
    poincare_rtol: float = 1e-10

    def __post_init__(self):
        if self.eps_reg == 0.0:
            self.eps_reg = float(os.getenv("DAMPWAVE_EPS_REG", "1e-8"))
