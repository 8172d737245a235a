# waveguide/services/greens.py
"""
Transverse-excited Green's correlator G2 of the regularized strip resolvent

    G2(x1, y1, x2, y2) = sum_{n>=2} exp(-pi k_n t) / (pi k_n) * S_n(y1) S_n(y2)

with k_n = sqrt(n^2 - 1), t = |x1 - x2| / b and S_n(y) = sin(n pi (y + b/2) / b).

Two evaluation regimes:

* direct-sum: plain summation while the geometric majorant
  exp(-pi N t) / (pi (N - 1) (1 - exp(-pi t))) is still cheap to drive below tol.
* small-separation: the n-exponential part sum_n exp(-pi n t)/(pi n) S_n S_n is
  summed in closed form (a logarithm), leaving the remainder
  r_n = g_n - h_n = O(n^-3) whose tail is bounded by (1 + 1/e) / (4 pi (N - 1)^2).

The closed forms of the y-summed mode sum (log, polylog and zeta expansions)
are exposed as cross-checks.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Literal, Optional, Tuple

import mpmath
import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import binom

from waveguide.core.config import settings
from waveguide.core.errors import DomainError, SingularKernelError
from waveguide.models import DensityField, StripConfig

logger = logging.getLogger(__name__)

Regime = Literal["direct-sum", "small-separation"]

# Largest geometric truncation still summed directly
DIRECT_SUM_MAX_TERMS = 512
# Below this t the direct sum would need more than DIRECT_SUM_MAX_TERMS for any tol < 1
DIRECT_SUM_MIN_T = 1e-6
# Hard cap on the number of modes in either regime
MAX_TERMS = 1 << 20
_CHUNK = 256
# Validity range of the small-separation expansion (t = dx / b)
SMALLSEP_MAX_T = 1e-2


@dataclass(frozen=True)
class GreensEval:
    value: float
    n_terms_used: int
    tail_bound: float
    regime: Regime


# ============ Mode helpers ============

def mode_factors(n: np.ndarray, y, b: float) -> np.ndarray:
    """S_n(y) = sin(n pi (y + b/2) / b), broadcast as y[..., None] x n"""
    y = np.asarray(y, dtype=float)
    return np.sin(np.multiply.outer(y + 0.5 * b, n) * (math.pi / b))


def _g(n: np.ndarray, t: float) -> np.ndarray:
    k = np.sqrt(n * n - 1.0)
    return np.exp(-math.pi * k * t) / (math.pi * k)


def _r(n: np.ndarray, t: float) -> np.ndarray:
    k = np.sqrt(n * n - 1.0)
    return (np.exp(-math.pi * k * t) / k - np.exp(-math.pi * n * t) / n) / math.pi


def geometric_tail(t: float, n_last: int) -> float:
    """Majorant of sum_{n > n_last} g_n (uses k_n >= n - 1)"""
    if t <= 0.0:
        return math.inf
    return math.exp(-math.pi * n_last * t) / (
        math.pi * (n_last - 1) * -math.expm1(-math.pi * t)
    )


def algebraic_tail(n_last: int) -> float:
    """Majorant of sum_{n > n_last} (g_n - h_n), uniform in t >= 0"""
    return (1.0 + 1.0 / math.e) / (4.0 * math.pi * (n_last - 1) ** 2)


def _geometric_terms(t: float, tol: float) -> float:
    """Terms the direct sum needs for a geometric tail below tol"""
    if t < DIRECT_SUM_MIN_T:
        return math.inf
    one_minus_q = -math.expm1(-math.pi * t)
    log_ratio = -math.log(tol) - math.log(math.pi) - math.log(one_minus_q)
    return 2.0 + max(0.0, log_ratio) / (math.pi * t)


def _log_kernel(theta, t) -> np.ndarray:
    """sum_{n>=1} exp(-pi n t) cos(n theta) / (pi n)"""
    t = np.asarray(t, dtype=float)
    # log(u^2 + 4 q sin^2) in log space: u^2 = (1 - q)^2 underflows near t = 1e-160
    with np.errstate(divide="ignore"):
        log_u2 = 2.0 * np.log(-np.expm1(-math.pi * t))
        log_s2 = math.log(4.0) - math.pi * t + 2.0 * np.log(np.abs(np.sin(0.5 * np.asarray(theta))))
    return -np.logaddexp(log_u2, log_s2) / (2.0 * math.pi)


def _accumulate(term: Callable[[np.ndarray], np.ndarray], tail: Callable[[int], float],
                tol: float, base: float, n_max: Optional[int]) -> Tuple[float, int, float]:
    """Sum term(n) for n = 2, 3, ... until tail(N) <= tol * max(1, |total|)"""
    if n_max is not None:
        if n_max < 2:
            raise DomainError("n_max must be >= 2")
        n = np.arange(2, n_max + 1, dtype=float)
        total = float(np.sum(term(n)))
        return total, n_max, tail(n_max)

    total = 0.0
    start, chunk = 2, _CHUNK
    while True:
        stop = min(start + chunk - 1, MAX_TERMS)
        n = np.arange(start, stop + 1, dtype=float)
        total += float(np.sum(term(n)))
        bound = tail(stop)
        if bound <= tol * max(1.0, abs(base + total)):
            return total, stop, bound
        if stop >= MAX_TERMS:
            logger.warning("G2 truncated at the mode cap %d (tail %.3e)", stop, bound)
            return total, stop, bound
        start = stop + 1
        chunk *= 2


# ============ Point evaluation ============

def g2_zero(x1: float, y1: float, x2: float, y2: float, cfg: StripConfig,
            tol: Optional[float] = None, n_max: Optional[int] = None) -> GreensEval:
    """G2 at one pair of strip points.

    ``n_max`` forces the truncation (the tail bound is still reported).
    Raises SingularKernelError on the coincident interior point, where the
    series diverges logarithmically.
    """
    tol = settings.GREENS_TOL if tol is None else tol
    if tol <= 0:
        raise DomainError("tol must be positive")
    b = cfg.b
    half = 0.5 * b
    if max(abs(y1), abs(y2)) > half:
        raise DomainError(f"y outside the strip |y| <= {half}")

    t = abs(x1 - x2) / b
    if abs(y1) == half or abs(y2) == half:
        # every transverse factor vanishes on a wall
        return GreensEval(0.0, 0, 0.0, "direct-sum" if t > 0 else "small-separation")
    if t == 0.0 and y1 == y2:
        raise SingularKernelError(
            f"G2 diverges at coincident points (x={x1!r}, y={y1!r}); integrate around it"
        )

    def weight(n):
        return mode_factors(n, y1, b) * mode_factors(n, y2, b)

    if _geometric_terms(t, tol) <= DIRECT_SUM_MAX_TERMS:
        value, n_last, bound = _accumulate(
            lambda n: _g(n, t) * weight(n), lambda N: geometric_tail(t, N), tol, 0.0, n_max
        )
        return GreensEval(value, n_last, bound, "direct-sum")

    alpha = math.pi * abs(y1 - y2) / b
    beta = math.pi * (y1 + y2 + b) / b
    h1 = math.exp(-math.pi * t) / math.pi
    s1 = math.cos(math.pi * y1 / b) * math.cos(math.pi * y2 / b)
    closed = 0.5 * float(_log_kernel(alpha, t) - _log_kernel(beta, t)) - h1 * s1
    rest, n_last, bound = _accumulate(
        lambda n: _r(n, t) * weight(n),
        lambda N: min(algebraic_tail(N), geometric_tail(t, N)),
        tol, closed, n_max,
    )
    return GreensEval(closed + rest, n_last, bound, "small-separation")


def g2_zero_unreduced(x1: float, y1: float, x2: float, y2: float, cfg: StripConfig,
                      n_terms: int = 400) -> float:
    """G2 with the step-function weighted exponentials written out term by term.

    exp(-pi k (x1 + x2)/b) * [H(x1 - x2) exp(2 pi k x2/b) + H(x2 - x1) exp(2 pi k x1/b)]
    with H(0) = 1/2; exponents are combined before exponentiation.
    """
    b = cfg.b
    n = np.arange(2, n_terms + 1, dtype=float)
    k = np.sqrt(n * n - 1.0)
    weight = mode_factors(n, y1, b) * mode_factors(n, y2, b)
    total = np.zeros_like(k)
    for step, near in ((np.heaviside(x1 - x2, 0.5), x2), (np.heaviside(x2 - x1, 0.5), x1)):
        # the switched-off branch grows like exp(pi k |x1 - x2| / b); never evaluate it
        if step > 0:
            total += step * np.exp(-math.pi * k * (x1 + x2) / b + 2.0 * math.pi * k * near / b)
    return float(np.sum(total / (math.pi * k) * weight))


def g2_kernel(x1, y1, x2, y2, cfg: StripConfig, n_terms: int = 64) -> np.ndarray:
    """Vectorized G2 for quadrature nodes (never on the singular point).

    Uses the small-separation representation with a fixed number of
    remainder modes; its truncation error is at most algebraic_tail(n_terms).
    """
    b = cfg.b
    x1, y1, x2, y2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x1, y1, x2, y2)))
    t = np.abs(x1 - x2) / b
    alpha = math.pi * np.abs(y1 - y2) / b
    beta = math.pi * (y1 + y2 + b) / b
    with np.errstate(divide="ignore"):
        closed = 0.5 * (_log_kernel(alpha, t) - _log_kernel(beta, t))
    closed = closed - np.exp(-math.pi * t) / math.pi * (
        np.cos(math.pi * y1 / b) * np.cos(math.pi * y2 / b)
    )
    n = np.arange(2, n_terms + 1, dtype=float)
    k = np.sqrt(n * n - 1.0)
    tn = t[..., None]
    r = (np.exp(-math.pi * k * tn) / k - np.exp(-math.pi * n * tn) / n) / math.pi
    rest = np.sum(r * mode_factors(n, y1, b) * mode_factors(n, y2, b), axis=-1)
    return closed + rest


# ============ y-summed mode sum and its closed forms ============

def g2_mode_sum(dx: float, cfg: StripConfig, tol: Optional[float] = None) -> GreensEval:
    """sum_{n>=2} exp(-pi k_n dx/b) / (pi k_n) with a certified tail"""
    tol = settings.GREENS_TOL if tol is None else tol
    if dx <= 0:
        raise SingularKernelError("the mode sum diverges at dx <= 0")
    t = dx / cfg.b
    if _geometric_terms(t, tol) <= DIRECT_SUM_MAX_TERMS:
        value, n_last, bound = _accumulate(
            lambda n: _g(n, t), lambda N: geometric_tail(t, N), tol, 0.0, None
        )
        return GreensEval(value, n_last, bound, "direct-sum")
    q = math.exp(-math.pi * t)
    closed = -(math.log(-math.expm1(-math.pi * t)) + q) / math.pi
    rest, n_last, bound = _accumulate(
        lambda n: _r(n, t),
        lambda N: min(algebraic_tail(N), geometric_tail(t, N)),
        tol, closed, None,
    )
    return GreensEval(closed + rest, n_last, bound, "small-separation")


def g2_series_smallsep(dx: float, cfg: StripConfig, order: int = 8) -> float:
    """Small-separation expansion of the mode sum.

    -1/pi + 3t/2 - log(pi t)/pi + sum_{k=1..order} c_k (zeta(2k+1) - 1) / pi,
    c_k = binom(2k, k) / 4^k, from 1/sqrt(n^2 - 1) = sum_k c_k n^-(2k+1).
    Valid for t = dx/b < 1e-2.
    """
    if dx <= 0:
        raise DomainError("dx must be positive")
    if order < 0:
        raise DomainError("order must be >= 0")
    t = dx / cfg.b
    if t > SMALLSEP_MAX_T:
        logger.warning("small-separation expansion used at dx/b = %.3g > %.0e", t, SMALLSEP_MAX_T)
    value = -1.0 / math.pi + 1.5 * t - math.log(math.pi * t) / math.pi
    for k in range(1, order + 1):
        c_k = binom(2 * k, k) / 4.0 ** k
        value += c_k * (float(mpmath.zeta(2 * k + 1)) - 1.0) / math.pi
    return value


def g2_polylog(dx: float, cfg: StripConfig) -> float:
    """Second-order polylog resummation of the mode sum (q = exp(-pi dx/b))"""
    if dx <= 0:
        raise DomainError("dx must be positive")
    b = cfg.b
    q = mpmath.exp(-mpmath.pi * dx / b)
    value = -(q + mpmath.log(1 - q)) / mpmath.pi + (
        -q * (b + mpmath.pi * dx) + mpmath.pi * dx * mpmath.polylog(2, q)
        + b * mpmath.polylog(3, q)
    ) / (2 * mpmath.pi * b)
    return float(value)


# ============ Transverse projections of a density ============

@dataclass(frozen=True)
class TransverseProjections:
    """tau[i, n-1] = int S_1(y) S_n(y) sigma(x_i, y) dy and the Parseval residual

    residual[i] = (b/2) int S_1^2 sigma^2 dy - sum_n tau[i, n-1]^2 >= 0 bounds
    the squared weight of the discarded modes.
    """
    x: np.ndarray
    tau: np.ndarray
    residual: np.ndarray


_leggauss = lru_cache(maxsize=16)(leggauss)


class TransverseProjector:
    """Gauss-Legendre projector onto the first n_max transverse modes.

    The y rule is split at the field's declared jumps and built once, so the
    projector can be called at many x without rebuilding it.
    """

    def __init__(self, field: DensityField, cfg: StripConfig, n_max: int):
        if n_max < 1:
            raise DomainError("n_max must be >= 1")
        self.field = field
        self.cfg = cfg
        self.n_max = n_max
        half = 0.5 * cfg.b
        cuts = [-half, *sorted(p for p in set(field.split_points_y) if -half < p < half), half]
        t, w = _leggauss(max(64, 2 * n_max + 32))
        self.y = np.concatenate([0.5 * (lo + hi) + 0.5 * (hi - lo) * t
                                 for lo, hi in zip(cuts[:-1], cuts[1:])])
        self.w = np.concatenate([0.5 * (hi - lo) * w for lo, hi in zip(cuts[:-1], cuts[1:])])
        self.modes = mode_factors(np.arange(1, n_max + 1, dtype=float), self.y, cfg.b)

    def __call__(self, x) -> TransverseProjections:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        s1 = self.modes[:, 0]
        sig = self.field.sigma(x[:, None], self.y[None, :])
        tau = (sig * (self.w * s1)) @ self.modes
        norm = 0.5 * self.cfg.b * (sig ** 2 * (self.w * s1 ** 2)).sum(axis=1)
        residual = np.clip(norm - (tau ** 2).sum(axis=1), 0.0, None)
        return TransverseProjections(x=x, tau=tau, residual=residual)


def transverse_projections(field: DensityField, cfg: StripConfig, x, n_max: int) -> TransverseProjections:
    return TransverseProjector(field, cfg, n_max)(x)
