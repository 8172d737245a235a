# waveguide/services/slab_oracle.py
"""
Exactly solvable slab: sigma = sigma0 on |x| < delta/2, 0 elsewhere

Inside the slab the longitudinal profile is a2 cos(p2 x), outside
a1 exp(-p1 |x|); continuity of value and slope at x = +-delta/2 gives

    p1 = p2 tan(delta p2 / 2)
    pi^2/b^2 - p2^2 tan^2(delta p2 / 2) = (pi^2/b^2 + p2^2) / (1 + sigma0)

and E = pi^2/b^2 - p1^2.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from waveguide.core.config import settings
from waveguide.core.errors import BracketError, ConvergenceError, DomainError, SlabRegimeError
from waveguide.models import SlabProfile, StripConfig

logger = logging.getLogger(__name__)

# keeps the upper bracket off the tan pole and off the threshold crossing
BRACKET_MARGIN = 1e-9


@dataclass(frozen=True)
class SlabSolution:
    sigma0: float
    delta: float
    b: float
    p2: float
    p1: float
    amplitudes: Tuple[float, float, float]
    energy: float
    residual: float
    normalized: bool = False


def _matching(cfg: StripConfig, slab: SlabProfile):
    e0 = cfg.threshold()
    s, d = slab.sigma0, slab.delta

    def f(p2: float) -> float:
        outside = e0 - (p2 * math.tan(0.5 * d * p2)) ** 2
        inside = (e0 + p2 * p2) / (1.0 + s)
        return outside - inside

    return f


def solve_slab(cfg: StripConfig, slab: SlabProfile, tol: Optional[float] = None,
               normalize: bool = False) -> SlabSolution:
    """Root of the matching equation on the first branch 0 < delta p2 / 2 < pi/2"""
    tol = settings.SLAB_RESIDUAL_TOL if tol is None else tol
    if tol <= 0:
        raise DomainError("tol must be positive")
    if slab.sigma0 <= 0:
        raise SlabRegimeError(
            f"no slab bound state in this regime (sigma0 = {slab.sigma0!r} <= 0)"
        )
    b, d, s = cfg.b, slab.delta, slab.sigma0
    f = _matching(cfg, slab)
    lo = 0.0
    hi = min(math.pi / d, math.pi * math.sqrt(s) / b) * (1.0 - BRACKET_MARGIN)
    f_lo, f_hi = f(lo), f(hi)
    if not (f_lo > 0.0 > f_hi):
        raise BracketError("slab matching equation not bracketed", lo, hi, f_lo, f_hi)

    p2, info = brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                      maxiter=500, full_output=True)
    if not info.converged:
        raise ConvergenceError(f"brentq stopped after {info.iterations} iterations: {info.flag}")

    p1 = p2 * math.tan(0.5 * d * p2)
    energy = cfg.threshold() - p1 * p1
    residual = abs(energy - (cfg.threshold() + p2 * p2) / (1.0 + s))
    if residual > tol * max(1.0, energy):
        raise ConvergenceError(f"slab residual {residual:.3e} exceeds tolerance {tol:.1e}")
    logger.debug("slab root p2=%r after %d iterations, residual %.2e",
                 p2, info.iterations, residual)

    a2 = 1.0
    a1 = a2 * math.cos(0.5 * d * p2) * math.exp(0.5 * d * p2 * math.tan(0.5 * d * p2))
    if normalize:
        # longitudinal L2 norm: int |psi(x)|^2 dx = 1
        inside = 0.5 * d + math.sin(d * p2) / (2.0 * p2)
        outside = a1 * a1 * math.exp(-p1 * d) / p1
        scale = 1.0 / math.sqrt(a2 * a2 * inside + outside)
        a1, a2 = a1 * scale, a2 * scale

    return SlabSolution(
        sigma0=s, delta=d, b=b, p2=p2, p1=p1, amplitudes=(a1, a2, a1),
        energy=energy, residual=residual, normalized=normalize,
    )


def slab_wavefunction(solution: SlabSolution, x) -> np.ndarray:
    """Longitudinal profile a1 e^{p1 x} | a2 cos(p2 x) | a3 e^{-p1 x}"""
    x = np.asarray(x, dtype=float)
    a1, a2, a3 = solution.amplitudes
    half = 0.5 * solution.delta
    outer = np.where(x < 0, a1, a3) * np.exp(-solution.p1 * np.abs(x))
    return np.where(np.abs(x) < half, a2 * np.cos(solution.p2 * x), outer)


# ============ Weak-slab series ============

MIN_ORDER, MAX_ORDER = 2, 5


def slab_series(cfg: StripConfig, slab: SlabProfile,
                order: int = MAX_ORDER) -> Tuple[List[float], List[float], List[float]]:
    """Coefficients of sigma^0..sigma^order for p2^2, p1 and E"""
    if not MIN_ORDER <= order <= MAX_ORDER:
        raise DomainError(f"series order must be within {MIN_ORDER}..{MAX_ORDER}")
    b, d = cfg.b, slab.delta
    pi = math.pi
    p2sq = [
        0.0,
        pi ** 2 / b ** 2,
        -pi ** 4 * d ** 2 / (4 * b ** 4),
        pi ** 4 * d ** 2 * (pi ** 2 * d ** 2 - 3 * b ** 2) / (12 * b ** 6),
        (150 * pi ** 6 * b ** 2 * d ** 4 - 23 * pi ** 8 * d ** 6) / (720 * b ** 8),
        pi ** 6 * d ** 4 * (630 * b ** 4 - 686 * pi ** 2 * b ** 2 * d ** 2 + 67 * pi ** 4 * d ** 4)
        / (5040 * b ** 10),
    ]
    p1 = [
        0.0,
        pi ** 2 * d / (2 * b ** 2),
        -pi ** 4 * d ** 3 / (12 * b ** 4),
        (pi ** 6 * d ** 5 - 5 * pi ** 4 * b ** 2 * d ** 3) / (40 * b ** 6),
        (210 * pi ** 6 * b ** 2 * d ** 5 - 23 * pi ** 8 * d ** 7) / (2520 * b ** 8),
        pi ** 6 * d ** 5 * (1134 * b ** 4 - 882 * pi ** 2 * b ** 2 * d ** 2 + 67 * pi ** 4 * d ** 4)
        / (18144 * b ** 10),
    ]
    energy = [
        pi ** 2 / b ** 2,
        0.0,
        -pi ** 4 * d ** 2 / (4 * b ** 4),
        pi ** 6 * d ** 4 / (12 * b ** 6),
        (90 * pi ** 6 * b ** 2 * d ** 4 - 23 * pi ** 8 * d ** 6) / (720 * b ** 8),
        pi ** 8 * d ** 6 * (67 * pi ** 2 * d ** 2 - 525 * b ** 2) / (5040 * b ** 10),
    ]
    n = order + 1
    return p2sq[:n], p1[:n], energy[:n]


def evaluate_series(coeffs: Sequence[float], sigma: float) -> float:
    return float(np.polynomial.polynomial.polyval(sigma, coeffs))


@dataclass(frozen=True)
class SeriesSweep:
    sigmas: Tuple[float, ...]
    exact: Tuple[float, ...]
    series: Tuple[float, ...]
    errors: Tuple[float, ...]
    slope: float
    order: int


def series_error_sweep(cfg: StripConfig, delta: float, sigmas: Sequence[float],
                       order: int = MAX_ORDER, tol: Optional[float] = None) -> SeriesSweep:
    """|exact - series| over a sigma sweep and its log-log slope"""
    if len(sigmas) < 2:
        raise DomainError("need at least two amplitudes for a slope")
    exact, series, errors = [], [], []
    for s in sigmas:
        slab = SlabProfile(sigma0=s, delta=delta)
        sol = solve_slab(cfg, slab, tol)
        _, _, coeffs = slab_series(cfg, slab, order)
        approx = evaluate_series(coeffs, s)
        exact.append(sol.energy)
        series.append(approx)
        errors.append(abs(sol.energy - approx))
    if min(errors) > 0:
        slope = float(np.polyfit(np.log(sigmas), np.log(errors), 1)[0])
    else:
        slope = math.nan
    return SeriesSweep(tuple(sigmas), tuple(exact), tuple(series), tuple(errors), slope, order)
