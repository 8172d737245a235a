"""Rescaling x, y, b and every width by lam multiplies all energies by 1/lam^2"""
from __future__ import annotations

import pytest

from waveguide.models import GaussianProfile, StripConfig, make_slab, scaled
from waveguide.services.fd_oracle import GridSpec, lowest_mode
from waveguide.services.perturbation import second_order, third_order
from waveguide.services.variational import variational_estimate

LAM = 2.0
FIELDS = [
    make_slab(0.1, 0.5),
    GaussianProfile(amplitude=0.12, x0=0.1, y0=0.05, wx=0.3, wy=0.2),
]


@pytest.fixture
def strips():
    base = StripConfig(b=1.0)
    return base, base.scaled(LAM)


def test_threshold(strips):
    base, big = strips
    assert big.threshold() == pytest.approx(base.threshold() / LAM ** 2, rel=1e-15)


@pytest.mark.parametrize("field", FIELDS, ids=["slab", "gaussian"])
def test_second_order(strips, field):
    base, big = strips
    e2, _ = second_order(base, field)
    e2_big, _ = second_order(big, scaled(field, LAM))
    assert e2_big == pytest.approx(e2 / LAM ** 2, rel=1e-6)


@pytest.mark.parametrize("field, rel", [(FIELDS[0], 1e-4), (FIELDS[1], 1e-3)], ids=["slab", "gaussian"])
def test_third_order(strips, field, rel):
    base, big = strips
    e3, _ = third_order(base, field)
    e3_big, _ = third_order(big, scaled(field, LAM))
    assert e3_big == pytest.approx(e3 / LAM ** 2, rel=rel)


@pytest.mark.parametrize("field", FIELDS, ids=["slab", "gaussian"])
def test_variational_energy(strips, field):
    base, big = strips
    w = variational_estimate(base, field).w
    w_big = variational_estimate(big, scaled(field, LAM)).w
    assert w_big == pytest.approx(w / LAM ** 2, rel=1e-10)


def test_finite_difference_eigenvalue(strips):
    base, big = strips
    field = FIELDS[0]
    small = lowest_mode(base, field, GridSpec(L=12.0, nx=99, ny=19))
    large = lowest_mode(big, scaled(field, LAM), GridSpec(L=12.0 * LAM, nx=99, ny=19))
    # identical discrete problems up to the factor 1/lam^2 in the stiffness
    assert large.e_min == pytest.approx(small.e_min / LAM ** 2, rel=1e-8)
