from __future__ import annotations

import logging
import math

import pytest

from waveguide.core.errors import DomainError
from waveguide.models import GaussianProfile, StripConfig, make_slab
from waveguide.services.perturbation import second_order
from waveguide.services.slab_oracle import solve_slab
from waveguide.services.variational import rayleigh_quotient, variational_estimate

PI = math.pi


def test_slab_decay_rate_and_energy(unit_strip, slab):
    var = variational_estimate(unit_strip, slab)
    assert var.a == pytest.approx(0.2467401, abs=1e-7)
    assert var.w == pytest.approx(9.8087237, abs=1e-6)
    assert var.bound_exists
    assert var.converged


def test_weak_field_energy_matches_second_order(unit_strip):
    g = GaussianProfile(amplitude=0.1, y0=-0.1, wx=0.4, wy=0.25)
    var = variational_estimate(unit_strip, g)
    e2, _ = second_order(unit_strip, g)
    assert var.w - unit_strip.threshold() == pytest.approx(e2, rel=1e-10, abs=1e-14)


@pytest.mark.parametrize("sigma0", [0.0, -0.1])
def test_no_trial_state_without_attraction(unit_strip, sigma0):
    var = variational_estimate(unit_strip, make_slab(sigma0, 0.5))
    assert var.a <= 0
    assert not var.bound_exists


def test_strong_field_warns(unit_strip, caplog):
    with caplog.at_level(logging.WARNING, logger="waveguide.services.variational"):
        variational_estimate(unit_strip, make_slab(0.5, 0.5))
    assert "weak-field" in caplog.text


@pytest.mark.parametrize("sigma0", [0.05, 0.1, 0.2])
def test_rayleigh_quotient_bounds_exact_energy(unit_strip, sigma0):
    slab = make_slab(sigma0, 0.5)
    exact = solve_slab(unit_strip, slab).energy
    var = variational_estimate(unit_strip, slab)
    rq = rayleigh_quotient(unit_strip, slab, var.a)
    assert rq.value >= exact
    # the weak-field energy falls short of the exact one by about E3
    e3 = PI ** 6 * 0.5 ** 4 * sigma0 ** 3 / 12
    assert var.w <= exact
    assert var.w >= exact - 2 * e3


def test_rayleigh_quotient_on_empty_field(unit_strip):
    rq = rayleigh_quotient(unit_strip, make_slab(0.0, 0.5), a=0.3)
    assert rq.value == pytest.approx(0.09 + PI ** 2, rel=1e-14)


def test_rayleigh_quotient_needs_positive_rate(unit_strip, slab):
    with pytest.raises(DomainError):
        rayleigh_quotient(unit_strip, slab, a=0.0)


def test_scaled_strip_rate():
    var = variational_estimate(StripConfig(b=2.0), make_slab(0.1, 1.0))
    assert var.a == pytest.approx(PI ** 2 * 0.1 / 8, rel=1e-10)
