from __future__ import annotations

import math

import numpy as np
import pytest

from waveguide.core.errors import DomainError
from waveguide.models import StripConfig, make_slab
from waveguide.services.quadrature import (
    W_GAUSS,
    W_KRONROD,
    QuadratureSpec,
    integrate_line,
    integrate_line_pair,
    integrate_pair,
    integrate_strip,
)


def test_rule_weights_integrate_constants():
    assert W_KRONROD.sum() == pytest.approx(2.0, rel=1e-15)
    assert W_GAUSS.sum() == pytest.approx(2.0, rel=1e-15)
    assert np.count_nonzero(W_GAUSS) == 7


def test_line_integral():
    res = integrate_line(np.sin, (0.0, math.pi), QuadratureSpec(rel_tol=1e-12))
    assert res.converged
    assert res.value == pytest.approx(2.0, rel=1e-12)


def test_line_vector_valued():
    def f(x):
        return np.stack([np.ones_like(x), x ** 2, np.exp(x)], axis=-1)

    res = integrate_line(f, (-1.0, 1.0), QuadratureSpec(rel_tol=1e-12))
    np.testing.assert_allclose(res.value, [2.0, 2.0 / 3.0, math.e - 1.0 / math.e], rtol=1e-12)


def test_strip_constant(unit_strip):
    res = integrate_strip(lambda x, y: 1.0, (-1.0, 1.0), QuadratureSpec(), unit_strip)
    assert res.value == pytest.approx(2.0, rel=1e-12)


def test_strip_transverse_weight(unit_strip):
    res = integrate_strip(lambda x, y: np.cos(math.pi * y) ** 2, (-0.25, 0.25),
                          QuadratureSpec(), unit_strip)
    assert res.value == pytest.approx(0.25, rel=1e-10)


def test_strip_with_slab_density(unit_strip, slab):
    spec = QuadratureSpec().with_splits(x=slab.split_points_x)

    def f(x, y):
        return slab.sigma(x, y) * np.cos(math.pi * y) ** 2

    res = integrate_strip(f, (-1.0, 1.0), spec, unit_strip)
    assert res.converged
    assert res.value == pytest.approx(0.025, rel=1e-10)


def test_strip_is_linear(unit_strip):
    spec = QuadratureSpec(rel_tol=1e-10)

    def f(x, y):
        return np.exp(-x ** 2) * np.cos(math.pi * y)

    def g(x, y):
        return x ** 2 * (y + 0.5)

    combo = integrate_strip(lambda x, y: 2 * f(x, y) + 3 * g(x, y), (-1.0, 2.0), spec, unit_strip)
    parts = [integrate_strip(h, (-1.0, 2.0), spec, unit_strip) for h in (f, g)]
    expected = 2 * parts[0].value + 3 * parts[1].value
    slack = combo.err_estimate + 2 * parts[0].err_estimate + 3 * parts[1].err_estimate
    assert abs(combo.value - expected) <= slack + 1e-14


def test_strip_is_deterministic(unit_strip):
    def f(x, y):
        return np.exp(-3 * np.abs(x)) * np.cos(math.pi * y) ** 2

    spec = QuadratureSpec(rel_tol=1e-9)
    first = integrate_strip(f, (-2.0, 2.0), spec, unit_strip)
    second = integrate_strip(f, (-2.0, 2.0), spec, unit_strip)
    assert first.value == second.value
    assert first.n_panels == second.n_panels


def test_error_estimates_are_honest(unit_strip):
    rng = np.random.default_rng(7)
    spec = QuadratureSpec(rel_tol=1e-6)
    honest = 0
    trials = 100
    for _ in range(trials):
        lo = rng.uniform(-3.0, 1.0)
        hi = lo + rng.uniform(0.1, 3.0)
        c = rng.uniform(0.5, 4.0)

        def f(x, y, c=c):
            return np.exp(c * x) * np.cos(math.pi * y) ** 2

        exact = 0.5 * (math.exp(c * hi) - math.exp(c * lo)) / c
        res = integrate_strip(f, (lo, hi), spec, unit_strip)
        if abs(res.value - exact) <= 3 * res.err_estimate + 1e-15 * abs(exact):
            honest += 1
    assert honest >= 99


def test_unconverged_is_flagged():
    spec = QuadratureSpec(rel_tol=1e-14, abs_tol=1e-16, max_subdivisions=1)
    res = integrate_line(lambda x: 1.0 / np.sqrt(x), (0.0, 1.0), spec)
    assert not res.converged
    assert res.err_estimate > spec.tolerance(res.value)


def test_unconverged_inner_pass_is_flagged():
    loose = QuadratureSpec(rel_tol=0.5, abs_tol=1e-3)
    starved = QuadratureSpec(rel_tol=1e-15, abs_tol=1e-18, max_subdivisions=1)

    def kernel(x1, x2):
        return np.sqrt(np.abs(x2 - x1))

    res = integrate_line_pair(kernel, ((0.0, 1.0), (0.0, 1.0)), loose, inner_spec=starved)
    # the outer error meets its tolerance; only the inner passes fall short
    assert res.err_estimate <= loose.tolerance(res.value)
    assert not res.converged
    assert res.value == pytest.approx(8.0 / 15.0, rel=1e-2)

    ok = integrate_line_pair(kernel, ((0.0, 1.0), (0.0, 1.0)), loose,
                             inner_spec=QuadratureSpec(rel_tol=1e-6))
    assert ok.converged


def test_unconverged_inner_strip_is_flagged():
    cfg = StripConfig(b=1.0)
    loose = QuadratureSpec(rel_tol=0.5, abs_tol=1e-3)
    starved = QuadratureSpec(rel_tol=1e-15, abs_tol=1e-18, max_subdivisions=1)

    def kernel(x1, y1, x2, y2):
        return np.sqrt(np.abs(x2 - x1)) + 0.0 * y2

    res = integrate_pair(kernel, ((0.0, 1.0), (0.0, 1.0)), loose, cfg, inner_spec=starved)
    assert not res.converged


@pytest.mark.parametrize("kwargs", [
    {"rel_tol": 0.0},
    {"abs_tol": -1.0},
    {"max_subdivisions": 0},
])
def test_spec_validation(kwargs):
    with pytest.raises(DomainError):
        QuadratureSpec(**kwargs)


@pytest.mark.parametrize("window", [(1.0, 0.0), (0.0, math.inf), (0.5, 0.5)])
def test_window_validation(window):
    with pytest.raises(DomainError):
        integrate_line(np.cos, window, QuadratureSpec())


def test_with_splits_merges_and_sorts():
    spec = QuadratureSpec(split_points_x=(0.5,)).with_splits(x=(-1.0, 0.5), y=(0.1,))
    assert spec.split_points_x == (-1.0, 0.5)
    assert spec.split_points_y == (0.1,)


# ============ Pair integrals ============

@pytest.mark.parametrize("kernel, expected", [
    (lambda x1, x2: np.ones_like(x2), 1.0),
    (lambda x1, x2: np.abs(x1 - x2), 1.0 / 3.0),
    (lambda x1, x2: np.log(np.abs(x1 - x2)), -1.5),
])
def test_line_pair_examples(kernel, expected):
    res = integrate_line_pair(kernel, ((0.0, 1.0), (0.0, 1.0)), QuadratureSpec(rel_tol=1e-8))
    assert res.converged
    assert res.value == pytest.approx(expected, rel=1e-7)


@pytest.mark.parametrize("kernel, expected", [
    (lambda x1, y1, x2, y2: np.ones_like(x2), 1.0),
    (lambda x1, y1, x2, y2: np.abs(x1 - x2) + 0.0 * y2, 1.0 / 3.0),
    pytest.param(lambda x1, y1, x2, y2: np.log(np.abs(x1 - x2)) + 0.0 * y2, -1.5,
                 marks=pytest.mark.slow),
])
def test_pair_examples(kernel, expected):
    cfg = StripConfig(b=1.0)
    res = integrate_pair(kernel, ((0.0, 1.0), (0.0, 1.0)), QuadratureSpec(rel_tol=1e-6), cfg)
    assert res.converged
    assert res.value == pytest.approx(expected, rel=1e-5)


def test_pair_separable_slab_moment():
    cfg = StripConfig(b=1.0)
    slab = make_slab(0.1, 0.5)

    def kernel(x1, y1, x2, y2):
        w1 = slab.sigma(x1, y1) * math.cos(math.pi * y1) ** 2
        return w1 * slab.sigma(x2, y2) * np.cos(math.pi * y2) ** 2

    res = integrate_pair(kernel, (slab.support_x, slab.support_x),
                         QuadratureSpec(rel_tol=1e-8), cfg)
    assert res.value == pytest.approx(0.025 ** 2, rel=1e-7)
