# waveguide/services/variational.py
"""
Variational upper bound with the trial state sqrt(a) exp(-a|x|) cos(pi y/b)

In the weak-field limit the optimal decay rate and the energy are

    a = (pi^2/b^3) M1,        W = pi^2/b^2 - (pi^4/b^6) M1^2

and a localized trial state exists only for a > 0.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from waveguide.core.errors import DomainError
from waveguide.models import DensityField, StripConfig
from waveguide.services.perturbation import e2_from_moment, moment
from waveguide.services.quadrature import QuadratureSpec, QuadResult, integrate_strip

logger = logging.getLogger(__name__)

WEAK_FIELD_LIMIT = 0.3


@dataclass(frozen=True)
class VariationalResult:
    a: float
    w: float
    bound_exists: bool
    m1: float = 0.0
    err_estimate: float = 0.0
    converged: bool = True


def variational_estimate(cfg: StripConfig, field: DensityField,
                         spec: Optional[QuadratureSpec] = None,
                         m1: Optional[QuadResult] = None) -> VariationalResult:
    if field.max_abs() > WEAK_FIELD_LIMIT:
        logger.warning("max|sigma| = %.3g > %.1f: weak-field closed forms are unreliable",
                       field.max_abs(), WEAK_FIELD_LIMIT)
    if m1 is None:
        m1 = moment(cfg, field, spec)
    b = cfg.b
    a = (math.pi ** 2 / b ** 3) * m1.value
    # same expression as the second-order shift: W - threshold matches e2 to round-off
    w = cfg.threshold() + e2_from_moment(m1.value, cfg)
    err = 2.0 * (math.pi ** 4 / b ** 6) * abs(m1.value) * m1.err_estimate
    return VariationalResult(a=a, w=w, bound_exists=a > 0.0, m1=m1.value,
                             err_estimate=err, converged=m1.converged)


def rayleigh_quotient(cfg: StripConfig, field: DensityField, a: float,
                      spec: Optional[QuadratureSpec] = None) -> QuadResult:
    """Exact Rayleigh quotient of the trial state at decay rate a > 0.

    W(a) = (a^2 + pi^2/b^2) / (1 + (2a/b) int int exp(-2a|x|) cos^2(pi y/b) sigma)

    Unlike the weak-field W this is a rigorous upper bound on the ground state.
    """
    if a <= 0:
        raise DomainError("the trial state is normalizable only for a > 0")
    spec = (spec or QuadratureSpec()).with_splits(
        x=(0.0, *field.split_points_x), y=field.split_points_y
    )
    k = math.pi / cfg.b

    def f(x, y):
        return np.exp(-2.0 * a * np.abs(x)) * np.cos(k * y) ** 2 * field.sigma(x, y)

    overlap = integrate_strip(f, field.support_x, spec, cfg)
    denominator = 1.0 + (2.0 * a / cfg.b) * overlap.value
    if denominator <= 0:
        raise DomainError("trial state has nonpositive weighted norm")
    value = (a * a + cfg.threshold()) / denominator
    err = value * (2.0 * a / cfg.b) * overlap.err_estimate / denominator
    return QuadResult(value=value, err_estimate=err, n_evals=overlap.n_evals,
                      converged=overlap.converged, n_panels=overlap.n_panels)
