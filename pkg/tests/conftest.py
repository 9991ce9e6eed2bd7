import math
from pathlib import Path

import numpy as np
import pytest

from dampwave.models.config import ExpressionTerm, ModelConfig, Nonlinearity
from dampwave.services.grid import Grid, sample

CUBIC = Nonlinearity(poly_coeffs=(0.0, 0.0, 0.0, 1.0))
CUBIC_PLUS_LINEAR = Nonlinearity(poly_coeffs=(0.0, 2.0, 0.0, 1.0))
SINE = (ExpressionTerm(kind="sin", coeff=1.0, k=1.0),)


@pytest.fixture
def grid():
    return Grid(31)


@pytest.fixture
def sine(grid):
    return sample(grid, lambda x: np.sin(math.pi * x))


@pytest.fixture
def cubic_cfg():
    return ModelConfig(p=3.0, nonlinearity=CUBIC, grid_n=31, dt=0.01, t_end=0.2)


@pytest.fixture
def write_config(tmp_path):
    """Write a config file from lines and return its path."""
    def _write(*lines: str, name: str = "run.cfg") -> Path:
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n")
        return path
    return _write
