import numpy as np
import pytest

from dampwave.models.config import ModelConfig, Nonlinearity
from dampwave.services.energy import (
    EnergyLedger, dissipation_rate, energy, lyapunov, record_step,
)
from dampwave.services.errors import LedgerError
from dampwave.services.grid import h1_norm, lp_grad_norm, zeros

from conftest import SINE


def test_energy_of_zero_state_is_zero(grid, cubic_cfg):
    assert energy(zeros(grid), zeros(grid), cubic_cfg) == 0.0


def test_kinetic_energy_of_the_first_mode(grid, sine, cubic_cfg):
    assert energy(zeros(grid), sine, cubic_cfg) == pytest.approx(0.25)


def test_energy_terms(grid, sine):
    cfg = ModelConfig(p=3.0, nonlinearity=Nonlinearity(poly_coeffs=(0.0, 0.0, 0.0, 1.0)),
                      g_terms=SINE, grid_n=grid.n)
    u = sine * 0.5
    expected = (
        lp_grad_norm(u, 3.0) ** 3 / 3.0
        + grid.h * np.sum(u.values ** 4) / 4.0
        - grid.h * np.dot(sine.values, u.values)
    )
    assert energy(u, zeros(grid), cfg) == pytest.approx(expected, rel=1e-12)
    assert lyapunov(u, zeros(grid), cfg) == energy(u, zeros(grid), cfg)


def test_dissipation_rate_is_h1_squared(sine):
    assert dissipation_rate(sine) == pytest.approx(h1_norm(sine) ** 2)


def test_ledger_accumulates_and_reports_residuals():
    ledger = EnergyLedger()
    record_step(ledger, 0.0, 2.0, 0.0)
    record_step(ledger, 0.1, 1.5, 0.4)
    record_step(ledger, 0.2, 1.2, 0.3)
    arrays = ledger.as_arrays()
    np.testing.assert_allclose(arrays["D"], [0.0, 0.4, 0.7])
    np.testing.assert_allclose(arrays["residual"], [0.0, -0.1, -0.1], atol=1e-15)
    np.testing.assert_allclose(ledger.step_residuals(), [-0.1, 0.0], atol=1e-15)
    assert len(ledger) == 3
    assert ledger.is_nonincreasing()
    assert ledger.max_residual() == pytest.approx(0.0, abs=1e-15)


def test_ledger_detects_energy_increase():
    ledger = EnergyLedger()
    record_step(ledger, 0.0, 1.0, 0.0)
    record_step(ledger, 0.1, 1.0 + 1e-6, 0.0)
    assert not ledger.is_nonincreasing()
    assert ledger.is_nonincreasing(slack=1e-5)
    assert ledger.max_residual() == pytest.approx(1e-6)


def test_ledger_requires_increasing_time():
    ledger = EnergyLedger()
    record_step(ledger, 0.0, 1.0, 0.0)
    with pytest.raises(LedgerError):
        record_step(ledger, 0.0, 0.9, 0.1)
    # LedgerError is also a ValueError
    with pytest.raises(ValueError):
        record_step(ledger, -1.0, 0.9, 0.1)


def test_empty_ledger():
    ledger = EnergyLedger()
    assert ledger.max_residual() == 0.0
    assert ledger.step_residuals().size == 0
