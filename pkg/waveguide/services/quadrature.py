# waveguide/services/quadrature.py
"""
Adaptive quadrature over the strip cross-section and over pairs of strip points

Tensor Gauss-Kronrod (7/15) panels with bisection of the worst panel.
Integrands receive numpy arrays and may return an extra trailing axis of
components; the error of a panel is then the largest component error.
"""

from __future__ import annotations

import heapq
import itertools
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from waveguide.core.config import settings
from waveguide.core.errors import DomainError
from waveguide.models import StripConfig

logger = logging.getLogger(__name__)

Interval = Tuple[float, float]
Panel = Tuple[Interval, ...]

# QUADPACK qk15 tables: nonnegative Kronrod abscissae on [-1, 1] (descending)
# and their weights; Gauss weights for the odd-indexed abscissae.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
W_KRONROD = np.concatenate([_WGK[:-1], _WGK[::-1]])
W_GAUSS = np.zeros(15)
W_GAUSS[[1, 3, 5]] = _WG[:3]
W_GAUSS[7] = _WG[3]
W_GAUSS[[13, 11, 9]] = _WG[:3]


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = field(default_factory=lambda: settings.QUAD_REL_TOL_2D)
    abs_tol: float = field(default_factory=lambda: settings.QUAD_ABS_TOL)
    max_subdivisions: int = field(default_factory=lambda: settings.QUAD_MAX_SUBDIVISIONS)
    split_points_x: Tuple[float, ...] = ()
    split_points_y: Tuple[float, ...] = ()

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise DomainError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be >= 1")

    def with_splits(self, x: Sequence[float] = (), y: Sequence[float] = ()) -> QuadratureSpec:
        return replace(
            self,
            split_points_x=tuple(sorted(set(self.split_points_x) | set(x))),
            split_points_y=tuple(sorted(set(self.split_points_y) | set(y))),
        )

    def tolerance(self, value) -> float:
        return max(self.abs_tol, self.rel_tol * float(np.max(np.abs(value))))


@dataclass(frozen=True)
class QuadResult:
    """Result of an adaptive integration"""
    value: float | np.ndarray
    err_estimate: float
    n_evals: int
    converged: bool
    n_panels: int = 1


@dataclass
class _Estimate:
    value: np.ndarray
    err: float
    axis: int
    n_evals: int
    # every inner integral behind this panel met its own tolerance
    inner_converged: bool = True


# ============ Panel rules ============

def _breaks(window: Interval, splits: Sequence[float]) -> List[float]:
    lo, hi = window
    inner = sorted(p for p in set(splits) if lo < p < hi)
    return [lo, *inner, hi]


def _initial_panels(*breaks: List[float]) -> List[Panel]:
    per_axis = [list(zip(b[:-1], b[1:])) for b in breaks]
    return [tuple(p) for p in itertools.product(*per_axis)]


def _nodes(panel: Panel) -> Tuple[List[np.ndarray], List[float]]:
    coords, halves = [], []
    for lo, hi in panel:
        half = 0.5 * (hi - lo)
        coords.append(0.5 * (lo + hi) + half * NODES)
        halves.append(half)
    return coords, halves


def _contract(values: np.ndarray, weights: Sequence[np.ndarray]) -> np.ndarray:
    out = values
    for w in weights:
        out = np.tensordot(w, out, axes=(0, 0))
    return out


def _rule(values: np.ndarray, halves: Sequence[float],
          node_err: Optional[np.ndarray] = None) -> Tuple[np.ndarray, float, int]:
    """Kronrod value, |Kronrod - Gauss| error and the axis that dominates it"""
    d = len(halves)
    jac = float(np.prod(halves))
    kron = _contract(values, [W_KRONROD] * d) * jac
    gauss = _contract(values, [W_GAUSS] * d) * jac
    err = float(np.max(np.abs(kron - gauss)))
    axis = 0
    if d > 1:
        per_axis = []
        for k in range(d):
            w = [W_KRONROD] * d
            w[k] = W_GAUSS
            per_axis.append(float(np.max(np.abs(_contract(values, w) * jac - kron))))
        axis = int(np.argmax(per_axis))
    if node_err is not None:
        err += float(np.max(_contract(node_err, [W_KRONROD] * d) * jac))
    return kron, err, axis


def _as_values(raw, shape: Tuple[int, ...]) -> np.ndarray:
    v = np.asarray(raw, dtype=float)
    if v.ndim < len(shape):
        v = np.broadcast_to(v, shape)
    return v


def _bisect(panel: Panel, axis: int) -> Tuple[Panel, Panel]:
    lo, hi = panel[axis]
    mid = 0.5 * (lo + hi)
    left = list(panel)
    right = list(panel)
    left[axis] = (lo, mid)
    right[axis] = (mid, hi)
    return tuple(left), tuple(right)


def _adaptive(estimate: Callable[[Panel], _Estimate], panels: List[Panel],
              spec: QuadratureSpec, label: str) -> QuadResult:
    """Bisect the largest-error panel until the summed error meets spec"""
    counter = itertools.count()
    done = {}
    heap = []
    n_evals = 0
    for p in panels:
        est = estimate(p)
        n_evals += est.n_evals
        done[p] = est
        heapq.heappush(heap, (-est.err, next(counter), p))

    def totals():
        # deterministic reduction: panels summed in coordinate order
        keys = sorted(done)
        value = sum((done[k].value for k in keys), start=np.zeros_like(done[keys[0]].value))
        return value, sum(done[k].err for k in keys)

    value, err = totals()
    subdivisions = 0
    while err > spec.tolerance(value) and subdivisions < spec.max_subdivisions:
        _, _, worst = heapq.heappop(heap)
        axis = done.pop(worst).axis
        for child in _bisect(worst, axis):
            est = estimate(child)
            n_evals += est.n_evals
            done[child] = est
            heapq.heappush(heap, (-est.err, next(counter), child))
        subdivisions += 1
        value, err = totals()

    inner_ok = all(est.inner_converged for est in done.values())
    converged = err <= spec.tolerance(value) and inner_ok
    if not converged:
        logger.warning("%s: not converged after %d subdivisions (err %.3e%s)",
                       label, subdivisions, err, "" if inner_ok else ", inner pass unconverged")
    else:
        logger.debug("%s: %d panels, err %.3e, %d evals", label, len(done), err, n_evals)
    if np.ndim(value) == 0:
        value = float(value)
    return QuadResult(value=value, err_estimate=float(err), n_evals=n_evals,
                      converged=converged, n_panels=len(done))


# ============ Public integrators ============

def integrate_line(f: Callable[[np.ndarray], np.ndarray], window: Interval,
                   spec: QuadratureSpec) -> QuadResult:
    """Integral of f(x) over window, split at spec.split_points_x"""
    _check_window(window)

    def estimate(panel: Panel) -> _Estimate:
        (xs,), halves = _nodes(panel)
        vals = _as_values(f(xs), (15,))
        value, err, _ = _rule(vals, halves)
        return _Estimate(value, err, 0, 15)

    return _adaptive(estimate, _initial_panels(_breaks(window, spec.split_points_x)),
                     spec, "integrate_line")


def integrate_strip(f: Callable[[np.ndarray, np.ndarray], np.ndarray], window_x: Interval,
                    spec: QuadratureSpec, cfg: StripConfig) -> QuadResult:
    """Integral of f(x, y) over window_x x [-b/2, b/2]"""
    _check_window(window_x)
    y_window = (-0.5 * cfg.b, 0.5 * cfg.b)

    def estimate(panel: Panel) -> _Estimate:
        (xs, ys), halves = _nodes(panel)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        vals = _as_values(f(X, Y), (15, 15))
        value, err, axis = _rule(vals, halves)
        return _Estimate(value, err, axis, 225)

    panels = _initial_panels(_breaks(window_x, spec.split_points_x),
                             _breaks(y_window, spec.split_points_y))
    return _adaptive(estimate, panels, spec, "integrate_strip")


def integrate_pair(k: Callable[..., np.ndarray], windows: Tuple[Interval, Interval],
                   spec: QuadratureSpec, cfg: StripConfig,
                   inner_spec: Optional[QuadratureSpec] = None) -> QuadResult:
    """Iterated integral of k(x1, y1, x2, y2) over two strip windows.

    The inner pass over (x2, y2) is forced to split at x2 = x1 and y2 = y1,
    so kinks in |x1 - x2| and the integrable log singularity of the kernel
    sit on panel edges and are never sampled. Inner errors are folded into the outer
    panel error; an unconverged inner pass on a surviving panel leaves the
    result unconverged.
    """
    w1, w2 = windows
    _check_window(w1)
    _check_window(w2)
    inner_spec = inner_spec or replace(spec, rel_tol=0.1 * spec.rel_tol,
                                       abs_tol=0.1 * spec.abs_tol)
    y_window = (-0.5 * cfg.b, 0.5 * cfg.b)
    y_breaks = _breaks(y_window, spec.split_points_y)

    def inner(x1: float, y1: float) -> QuadResult:
        def g(X2, Y2):
            return k(x1, y1, X2, Y2)
        s = inner_spec.with_splits(x=(x1,), y=(y1,))
        return integrate_strip(g, w2, s, cfg)

    def estimate(panel: Panel) -> _Estimate:
        (xs, ys), halves = _nodes(panel)
        vals, errs, n, ok = [], [], 0, True
        for x1 in xs:
            for y1 in ys:
                r = inner(float(x1), float(y1))
                vals.append(np.asarray(r.value, dtype=float))
                errs.append(r.err_estimate)
                n += r.n_evals
                ok = ok and r.converged
        vals = np.stack(vals).reshape((15, 15) + vals[0].shape)
        errs = np.asarray(errs).reshape(15, 15)
        value, err, axis = _rule(vals, halves, node_err=errs)
        return _Estimate(value, err, axis, n, ok)

    panels = _initial_panels(_breaks(w1, spec.split_points_x), y_breaks)
    return _adaptive(estimate, panels, spec, "integrate_pair")


def integrate_line_pair(k: Callable[[float, np.ndarray], np.ndarray],
                        windows: Tuple[Interval, Interval], spec: QuadratureSpec,
                        inner_spec: Optional[QuadratureSpec] = None) -> QuadResult:
    """Iterated integral of k(x1, x2) over two x-windows, split at x2 = x1"""
    w1, w2 = windows
    _check_window(w1)
    _check_window(w2)
    inner_spec = inner_spec or replace(spec, rel_tol=0.1 * spec.rel_tol,
                                       abs_tol=0.1 * spec.abs_tol)

    def estimate(panel: Panel) -> _Estimate:
        (xs,), halves = _nodes(panel)
        vals, errs, n, ok = [], [], 0, True
        for x1 in xs:
            x1 = float(x1)
            r = integrate_line(lambda X2: k(x1, X2), w2, inner_spec.with_splits(x=(x1,)))
            vals.append(np.asarray(r.value, dtype=float))
            errs.append(r.err_estimate)
            n += r.n_evals
            ok = ok and r.converged
        value, err, _ = _rule(np.stack(vals), halves, node_err=np.asarray(errs))
        return _Estimate(value, err, 0, n, ok)

    return _adaptive(estimate, _initial_panels(_breaks(w1, spec.split_points_x)),
                     spec, "integrate_line_pair")


def _check_window(window: Interval) -> None:
    lo, hi = window
    if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
        raise DomainError(f"integration window must be finite and ordered, got {window}")
