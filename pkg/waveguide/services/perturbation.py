# waveguide/services/perturbation.py
"""
Weak-coupling expansion of the ground-state energy below the continuum edge

    E = pi^2/b^2 + eta E1 + eta^2 E2 + eta^3 E3

E1 vanishes once the infrared regulator is removed. E2 and E3 are the
regulator-free closed forms:

    M1 = int int sigma cos^2(pi y/b)
    E2 = -(pi^4/b^6) M1^2
    E3 = (2 pi^6/b^9) M1 (I_A - b I_B)
    I_A = int int |x1 - x2| sigma1 sigma2 cos^2(pi y1/b) cos^2(pi y2/b)
    I_B = int int cos(pi y1/b) cos(pi y2/b) sigma1 sigma2 G2(1, 2)

The alternative expansion in terms of the reduced resolvent (G = Omega,
G^2 = Lambda) gives term for term the same E1..E3, so only this form is
implemented.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Dict, Literal, Optional, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from waveguide.core.config import settings
from waveguide.core.errors import DomainError
from waveguide.models import DensityField, StripConfig
from waveguide.services.greens import (
    TransverseProjector,
    algebraic_tail,
    g2_kernel,
    transverse_projections,
)
from waveguide.services.quadrature import (
    QuadratureSpec,
    QuadResult,
    integrate_line_pair,
    integrate_pair,
    integrate_strip,
)

logger = logging.getLogger(__name__)

Verdict = Literal["bound", "unbound at this order", "undetermined"]
Method = Literal["modal", "direct"]

# |M1| below this times the support area is treated as a vanishing moment
DEGENERACY_RATIO = 1e-10
MAX_MODES = 256
# Remainder modes used by the vectorized G2 kernel on the direct path
DIRECT_KERNEL_TERMS = 64
# Initial x panels across the support of a smooth field
SMOOTH_PANELS = 8


@dataclass(frozen=True)
class PerturbativeEnergy:
    e0: float
    m1: float
    e2: float
    e3: float
    eta: float
    err_estimates: Dict[str, float]
    i_a: float = 0.0
    i_b: float = 0.0
    total: float = 0.0
    verdict: Verdict = "undetermined"
    converged: bool = True


def support_area(field: DensityField, cfg: StripConfig) -> float:
    lo, hi = field.support_x
    return (hi - lo) * cfg.b


def is_degenerate(m1: float, field: DensityField, cfg: StripConfig) -> bool:
    return abs(m1) < DEGENERACY_RATIO * support_area(field, cfg)


def panel_breaks_x(field: DensityField) -> Tuple[float, ...]:
    """Initial x breaks: the jumps of a piecewise-constant field, or a
    uniform partition of the support for a smooth one"""
    breaks = set(field.split_points_x)
    if field.smoothness_hint == "smooth":
        lo, hi = field.support_x
        breaks.update(float(p) for p in np.linspace(lo, hi, SMOOTH_PANELS + 1)[1:-1])
    return tuple(sorted(breaks))


def _strip_spec(field: DensityField, spec: QuadratureSpec) -> QuadratureSpec:
    return spec.with_splits(x=panel_breaks_x(field), y=field.split_points_y)


# ============ Orders 1 and 2 ============

def first_order(cfg: StripConfig, field: DensityField) -> float:
    """Vanishes identically after the regulator limit"""
    return 0.0


def moment(cfg: StripConfig, field: DensityField, spec: Optional[QuadratureSpec] = None) -> QuadResult:
    """M1 = int int sigma cos^2(pi y/b) over support_x x strip"""
    spec = spec or QuadratureSpec()
    k = math.pi / cfg.b

    def f(x, y):
        return field.sigma(x, y) * np.cos(k * y) ** 2

    return integrate_strip(f, field.support_x, _strip_spec(field, spec), cfg)


def e2_from_moment(m1: float, cfg: StripConfig) -> float:
    return -(math.pi ** 4 / cfg.b ** 6) * (m1 * m1)


def second_order(cfg: StripConfig, field: DensityField,
                 spec: Optional[QuadratureSpec] = None) -> Tuple[float, QuadResult]:
    m1 = moment(cfg, field, spec)
    return e2_from_moment(m1.value, cfg), m1


# ============ Order 3 ============

def _choose_modes(cfg: StripConfig, field: DensityField, greens_tol: float,
                  rel_tol: float) -> Tuple[int, float, float]:
    """Smallest mode count whose discarded-mode bound on b*I_B meets the budget.

    Returns (n_modes, tail_bound, budget). The budget is
    max(greens_tol, rel_tol * rough |I_A|). The bound uses Young's
    inequality: each discarded mode contributes at most
    2b / (pi^2 k_n^2) int tau_n^2 dx.
    """
    lo, hi = field.support_x
    cuts = [lo, *(p for p in panel_breaks_x(field) if lo < p < hi), hi]
    t, w = leggauss(48)
    xs = np.concatenate([0.5 * (a + c) + 0.5 * (c - a) * t for a, c in zip(cuts[:-1], cuts[1:])])
    wx = np.concatenate([0.5 * (c - a) * w for a, c in zip(cuts[:-1], cuts[1:])])
    proj = transverse_projections(field, cfg, xs, MAX_MODES)
    tau_sq = wx @ (proj.tau ** 2)
    total_sq = float(wx @ (proj.residual + (proj.tau ** 2).sum(axis=1)))
    # int residual_N dx for N = 1..MAX_MODES
    remaining = np.clip(total_sq - np.cumsum(tau_sq), 0.0, None)

    tau1 = np.abs(wx * proj.tau[:, 0])
    scale = float(tau1 @ np.abs(xs[:, None] - xs[None, :]) @ tau1)
    budget = max(greens_tol, rel_tol * scale)

    N = np.arange(1, MAX_MODES + 1, dtype=float)
    bound = 2.0 * cfg.b ** 2 / (math.pi ** 2 * ((N + 1) ** 2 - 1.0)) * remaining
    ok = np.nonzero(bound <= budget)[0]
    if ok.size == 0:
        logger.warning("G2 mode budget %.3e not met with %d modes (bound %.3e)",
                       budget, MAX_MODES, bound[-1])
        return MAX_MODES, float(bound[-1]), budget
    n_modes = int(ok[0]) + 1
    return n_modes, float(bound[n_modes - 1]), budget


def _modal_integrals(cfg: StripConfig, field: DensityField, spec: QuadratureSpec,
                     n_modes: int) -> QuadResult:
    """[I_A - b I_B, I_A, I_B] from transverse projections and one line-pair integral"""
    b = cfg.b
    k = np.sqrt(np.arange(2, n_modes + 1, dtype=float) ** 2 - 1.0)
    project = TransverseProjector(field, cfg, n_modes)

    @lru_cache(maxsize=4096)
    def tau_at(x1: float) -> np.ndarray:
        return project(x1).tau[0]

    def kernel(x1: float, x2: np.ndarray) -> np.ndarray:
        t1 = tau_at(x1)
        t2 = project(x2).tau
        d = np.abs(x1 - x2)
        a = d * t1[0] * t2[:, 0]
        if n_modes > 1:
            g = np.exp(-math.pi * np.multiply.outer(d, k) / b) / (math.pi * k)
            bb = (g * t1[1:] * t2[:, 1:]).sum(axis=1)
        else:
            bb = np.zeros_like(a)
        return np.stack([a - b * bb, a, bb], axis=-1)

    window = field.support_x
    return integrate_line_pair(kernel, (window, window), spec.with_splits(x=panel_breaks_x(field)))


def _direct_integrals(cfg: StripConfig, field: DensityField, spec: QuadratureSpec) -> QuadResult:
    """[I_A - b I_B, I_A, I_B] by iterated 4D quadrature with the G2 kernel"""
    b = cfg.b
    kb = math.pi / b

    def kernel(x1, y1, x2, y2):
        s1 = field.sigma(x1, y1) * math.cos(kb * y1)
        s2 = field.sigma(x2, y2) * np.cos(kb * y2)
        a = np.abs(x1 - x2) * (s1 * math.cos(kb * y1)) * (s2 * np.cos(kb * y2))
        g = g2_kernel(x1, y1, x2, y2, cfg, DIRECT_KERNEL_TERMS)
        bb = s1 * s2 * g
        return np.stack([a - b * bb, a, bb], axis=-1)

    window = field.support_x
    s = _strip_spec(field, spec)
    return integrate_pair(kernel, (window, window), s, cfg)


def third_order(cfg: StripConfig, field: DensityField, spec: Optional[QuadratureSpec] = None,
                greens_tol: Optional[float] = None, method: Method = "modal",
                m1: Optional[QuadResult] = None) -> Tuple[float, QuadResult]:
    """E3 and the quadrature result holding [I_A - b I_B, I_A, I_B].

    The err_estimate of the returned result covers the quadrature error of
    I_A - b I_B and, on the modal path, the bound on the discarded modes.
    """
    spec = spec or QuadratureSpec(rel_tol=settings.QUAD_REL_TOL_4D)
    greens_tol = settings.GREENS_TOL if greens_tol is None else greens_tol
    if m1 is None:
        m1 = moment(cfg, field, replace(spec, rel_tol=settings.QUAD_REL_TOL_2D))
    if field.max_abs() == 0.0 or is_degenerate(m1.value, field, cfg):
        # both integrals carry the factor M1
        return 0.0, QuadResult(value=np.zeros(3), err_estimate=0.0, n_evals=0, converged=True)

    prefactor = 2.0 * math.pi ** 6 / cfg.b ** 9
    if method == "modal":
        n_modes, tail, budget = _choose_modes(cfg, field, greens_tol, spec.rel_tol)
        logger.debug("modal I_B with %d transverse modes (tail %.3e)", n_modes, tail)
        res = _modal_integrals(cfg, field, spec, n_modes)
        res = replace(res, err_estimate=res.err_estimate + tail,
                      converged=res.converged and tail <= budget)
    elif method == "direct":
        res = _direct_integrals(cfg, field, spec)
        res = replace(res, err_estimate=res.err_estimate + cfg.b * support_area(field, cfg) ** 2
                      * field.max_abs() ** 2 * algebraic_tail(DIRECT_KERNEL_TERMS))
    else:
        raise DomainError(f"unknown third-order method {method!r}")

    if not res.converged:
        logger.warning("third order: integrals flagged unconverged (err %.3e)", res.err_estimate)
    return prefactor * m1.value * float(res.value[0]), res


# ============ Assembly ============

def assemble(cfg: StripConfig, field: DensityField, eta: float = 1.0,
             spec: Optional[QuadratureSpec] = None, spec_4d: Optional[QuadratureSpec] = None,
             greens_tol: Optional[float] = None, method: Method = "modal") -> PerturbativeEnergy:
    """E0 + eta^2 E2 + eta^3 E3 with a bound-state verdict"""
    if abs(eta) > 1.0:
        logger.warning("eta = %g outside the weak-coupling regime |eta| <= 1", eta)
    spec = spec or QuadratureSpec()
    spec_4d = spec_4d or replace(spec, rel_tol=settings.QUAD_REL_TOL_4D)

    e0 = cfg.threshold()
    e2, m1 = second_order(cfg, field, spec)
    e3, i3 = third_order(cfg, field, spec_4d, greens_tol, method, m1=m1)

    b = cfg.b
    err_m1 = m1.err_estimate
    err_e2 = 2.0 * (math.pi ** 4 / b ** 6) * abs(m1.value) * err_m1
    prefactor = 2.0 * math.pi ** 6 / b ** 9
    err_e3 = prefactor * (abs(m1.value) * i3.err_estimate + abs(float(i3.value[0])) * err_m1)
    total = e0 + eta ** 2 * e2 + eta ** 3 * e3
    err_total = eta ** 2 * err_e2 + abs(eta) ** 3 * err_e3

    if field.max_abs() == 0.0:
        verdict: Verdict = "unbound at this order"
    elif is_degenerate(m1.value, field, cfg):
        verdict = "undetermined"
    elif total + err_total < e0:
        verdict = "bound"
    else:
        verdict = "unbound at this order"

    return PerturbativeEnergy(
        e0=e0,
        m1=m1.value,
        e2=e2,
        e3=e3,
        eta=eta,
        err_estimates={"m1": err_m1, "e2": err_e2, "e3": err_e3, "total": err_total},
        i_a=float(i3.value[1]),
        i_b=float(i3.value[2]),
        total=total,
        verdict=verdict,
        converged=m1.converged and i3.converged,
    )
