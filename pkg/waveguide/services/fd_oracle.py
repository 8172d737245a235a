# waveguide/services/fd_oracle.py
"""
Finite-difference oracle for -Laplace(phi) = E (1 + sigma) phi on the
truncated strip [-L, L] x [-b/2, b/2] with Dirichlet walls.

5-point stiffness on interior nodes, diagonal mass from cell-averaged
density (so jumps in sigma keep second-order convergence), lowest
eigenpair by shifted inverse iteration on a sparse LU factorization.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import sparse
from scipy.sparse.linalg import splu

from waveguide.core.config import settings
from waveguide.core.errors import ConvergenceError, DomainError, ShiftPlacementError
from waveguide.models import DensityField, StripConfig
from waveguide.services.perturbation import moment

logger = logging.getLogger(__name__)

MIN_POINTS = 16
# Decay margin: L >= 3 * support half-width + 3 b
MARGIN_SUPPORT, MARGIN_WIDTH = 3.0, 3.0
_CELL_GAUSS = 3
_SHIFT_RETRIES = 3


def decay_margin(field: DensityField, cfg: StripConfig) -> float:
    """Smallest admissible truncation half-length"""
    lo, hi = field.support_x
    return MARGIN_SUPPORT * max(abs(lo), abs(hi)) + MARGIN_WIDTH * cfg.b


@dataclass(frozen=True)
class GridSpec:
    L: float
    nx: int
    ny: int
    shift: Optional[float] = None

    def __post_init__(self):
        if self.L <= 0:
            raise DomainError("L must be positive")
        if self.nx < MIN_POINTS or self.ny < MIN_POINTS:
            raise DomainError(f"nx and ny must be >= {MIN_POINTS}")

    def hx(self) -> float:
        return 2.0 * self.L / (self.nx + 1)

    def hy(self, cfg: StripConfig) -> float:
        return cfg.b / (self.ny + 1)

    def nodes(self, cfg: StripConfig) -> Tuple[np.ndarray, np.ndarray]:
        x = -self.L + self.hx() * np.arange(1, self.nx + 1)
        y = -0.5 * cfg.b + self.hy(cfg) * np.arange(1, self.ny + 1)
        return x, y

    def refined(self) -> GridSpec:
        """Halve both spacings"""
        return GridSpec(L=self.L, nx=2 * self.nx + 1, ny=2 * self.ny + 1, shift=self.shift)

    def check_margin(self, field: DensityField, cfg: StripConfig) -> None:
        need = decay_margin(field, cfg)
        if self.L < need:
            raise DomainError(f"L = {self.L} below the decay margin {need:.3g}")


@dataclass(frozen=True)
class EigenResult:
    e_min: float
    vector: np.ndarray = dc_field(repr=False)
    iterations: int = 0
    residual_norm: float = 0.0
    threshold: float = 0.0
    grid: Optional[GridSpec] = None
    shift: float = 0.0
    localization: float = 0.0

    @property
    def bound(self) -> bool:
        """Below the discrete continuum edge"""
        return self.e_min < self.threshold


def discrete_threshold(cfg: StripConfig, grid: GridSpec) -> float:
    """Lowest transverse eigenvalue of the 3-point Dirichlet Laplacian"""
    hy = grid.hy(cfg)
    return 4.0 / hy ** 2 * math.sin(math.pi * hy / (2.0 * cfg.b)) ** 2


# ============ Assembly ============

def _second_difference(n: int, h: float) -> sparse.csr_matrix:
    return sparse.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(n, n), format="csr") / h ** 2


def stiffness(cfg: StripConfig, grid: GridSpec) -> sparse.csr_matrix:
    """-Laplace on interior nodes, unknowns ordered row-major (x outer, y inner)"""
    tx = _second_difference(grid.nx, grid.hx())
    ty = _second_difference(grid.ny, grid.hy(cfg))
    return (sparse.kron(tx, sparse.identity(grid.ny)) +
            sparse.kron(sparse.identity(grid.nx), ty)).tocsr()


def _cell_rule(centers: np.ndarray, h: float,
               splits: Sequence[float]) -> Tuple[sparse.csr_matrix, np.ndarray]:
    """Averaging operator over dual cells and the quadrature nodes it acts on"""
    t, w = leggauss(_CELL_GAUSS)
    nodes, weights, owner = [], [], []
    for i, c in enumerate(centers):
        lo, hi = c - 0.5 * h, c + 0.5 * h
        cuts = [lo, *sorted(p for p in splits if lo < p < hi), hi]
        for a, b in zip(cuts[:-1], cuts[1:]):
            nodes.append(0.5 * (a + b) + 0.5 * (b - a) * t)
            weights.append(0.5 * (b - a) * w / h)
            owner.append(np.full(_CELL_GAUSS, i))
    nodes = np.concatenate(nodes)
    avg = sparse.csr_matrix(
        (np.concatenate(weights), (np.concatenate(owner), np.arange(nodes.size))),
        shape=(centers.size, nodes.size),
    )
    return avg, nodes


def cell_density(cfg: StripConfig, field: DensityField, grid: GridSpec) -> np.ndarray:
    """1 + sigma averaged over each dual cell, shape (nx, ny)"""
    x, y = grid.nodes(cfg)
    ax, qx = _cell_rule(x, grid.hx(), field.split_points_x)
    ay, qy = _cell_rule(y, grid.hy(cfg), field.split_points_y)
    sig = field.sigma(qx[:, None], qy[None, :])
    return 1.0 + ax @ (ay @ sig.T).T


# ============ Eigen-solver ============

def _perturbative_guess(cfg: StripConfig, density: np.ndarray, grid: GridSpec, thr: float) -> float:
    """Second-order estimate measured from the discrete edge thr"""
    _, y = grid.nodes(cfg)
    weight = np.cos(math.pi * y / cfg.b) ** 2
    m1 = float(((density - 1.0) * weight).sum()) * grid.hx() * grid.hy(cfg)
    return thr - math.pi ** 4 * m1 ** 2 / cfg.b ** 6


def initial_shift(guess: float, threshold: float) -> float:
    return min(guess, threshold) - 0.5 * max(threshold - guess, 1e-3 * threshold)


def _inverse_iteration(K, M, shift: float, start: np.ndarray, tol: float,
                       max_iter: int) -> Tuple[float, np.ndarray, int, float]:
    lu = splu((K - shift * M).tocsc())
    v = start / np.linalg.norm(start)
    theta, rel = math.nan, math.inf
    for it in range(1, max_iter + 1):
        w = lu.solve(M @ v)
        v = w / np.linalg.norm(w)
        Kv, Mv = K @ v, M @ v
        theta = float(v @ Kv) / float(v @ Mv)
        rel = float(np.linalg.norm(Kv - theta * Mv)) / (abs(theta) * float(np.linalg.norm(Mv)))
        if rel <= tol:
            return theta, v, it, rel
    raise ConvergenceError(
        f"inverse iteration: residual {rel:.3e} after {max_iter} iterations (shift {shift:.6g})"
    )


def lowest_mode(cfg: StripConfig, field: DensityField, grid: GridSpec,
                tol: Optional[float] = None, max_iter: Optional[int] = None,
                start: Optional[np.ndarray] = None) -> EigenResult:
    """Smallest eigenpair of K phi = E M phi on the truncated strip.

    start, shape (nx, ny), replaces the default Gaussian starting vector.
    """
    tol = settings.FD_TOL if tol is None else tol
    max_iter = settings.FD_MAX_ITER if max_iter is None else max_iter
    grid.check_margin(field, cfg)

    density = cell_density(cfg, field, grid)
    if float(density.min()) <= 0.0:
        raise DomainError("1 + sigma is not positive on the grid")
    K = stiffness(cfg, grid)
    M = sparse.diags(density.ravel(), format="csr")
    thr = discrete_threshold(cfg, grid)

    x, y = grid.nodes(cfg)
    if start is None or float(np.abs(start).max()) == 0.0:
        start = np.outer(np.exp(-(x / max(grid.L / 4.0, cfg.b)) ** 2), np.cos(math.pi * y / cfg.b))
    start = np.abs(np.asarray(start, dtype=float)).ravel()

    guess = _perturbative_guess(cfg, density, grid, thr)
    # K >= thr * I >= (thr / max density) * M bounds every eigenvalue from below
    floor = (1.0 - 1e-3) * thr / float(density.max())
    shift = grid.shift if grid.shift is not None else max(initial_shift(guess, thr), floor)
    step = 0.5 * max(thr - guess, 1e-3 * thr)
    for attempt in range(_SHIFT_RETRIES + 1):
        theta, v, iters, rel = _inverse_iteration(K, M, shift, start, tol, max_iter)
        v = v / v[np.argmax(np.abs(v))]
        if float(v.min()) >= -1e-8:
            break
        msg = f"mode at E={theta:.8g} changes sign (shift {shift:.6g}); not the ground state"
        if attempt == _SHIFT_RETRIES:
            raise ShiftPlacementError(msg)
        logger.warning("%s; retrying with a lower shift", msg)
        shift -= 2.0 ** (attempt + 1) * step

    vec = v.reshape(grid.nx, grid.ny)
    far = np.abs(x) >= 0.5 * grid.L
    localization = float(np.abs(vec[far]).max()) if np.any(far) else 0.0
    logger.debug("lowest mode E=%.10g after %d iterations (shift %.6g, rel %.2e)",
                 theta, iters, shift, rel)
    return EigenResult(
        e_min=theta, vector=vec, iterations=iters, residual_norm=rel, threshold=thr,
        grid=grid, shift=shift, localization=localization,
    )


# ============ Convergence studies ============

@dataclass(frozen=True)
class Extrapolation:
    energy: float
    error_bar: float
    order: float
    extrapolated: bool
    raw: Tuple[float, ...]


def refine(results: Sequence[EigenResult]) -> Extrapolation:
    """Richardson extrapolation in h^2 over nested grids at fixed L (coarse first)"""
    if len(results) < 2:
        raise DomainError("refine needs at least two grids")
    e = np.array([r.e_min for r in results])
    raw = tuple(float(v) for v in e)
    d = np.diff(e)
    if np.any(d == 0) or not (np.all(d > 0) or np.all(d < 0)):
        logger.warning("non-monotone refinement sequence %s; not extrapolating", raw)
        return Extrapolation(energy=raw[-1], error_bar=float(np.max(np.abs(d))),
                             order=math.nan, extrapolated=False, raw=raw)

    ratios = []
    for coarse, fine in zip(results[:-1], results[1:]):
        if coarse.grid is not None and fine.grid is not None:
            ratios.append(coarse.grid.hx() / fine.grid.hx())
        else:
            ratios.append(2.0)
    ratios = np.array(ratios)
    r2 = ratios ** 2
    extrap = (r2 * e[1:] - e[:-1]) / (r2 - 1.0)

    order = math.nan
    if len(e) >= 3:
        order = float(math.log(abs(d[-2] / d[-1])) / math.log(ratios[-1]))
        spread = abs(extrap[-1] - extrap[-2])
    else:
        spread = abs(d[-1]) / (r2[-1] - 1.0)
    error_bar = max(float(spread), 1e-12 * abs(float(extrap[-1])))
    return Extrapolation(energy=float(extrap[-1]), error_bar=error_bar, order=order,
                         extrapolated=True, raw=raw)


def refinement_study(cfg: StripConfig, field: DensityField, grid: GridSpec, levels: int,
                     tol: Optional[float] = None) -> Tuple[List[EigenResult], Extrapolation]:
    results = []
    g = grid
    for _ in range(levels):
        results.append(lowest_mode(cfg, field, g, tol))
        g = g.refined()
    return results, refine(results)


def truncation_sweep(cfg: StripConfig, field: DensityField, Ls: Sequence[float],
                     points_per_length: float, ny: int, tol: Optional[float] = None) -> List[EigenResult]:
    """Lowest mode for each truncation length at fixed resolution.

    Lengths below the decay margin are skipped with a warning.
    """
    need = decay_margin(field, cfg)
    out = []
    for L in Ls:
        if L < need:
            logger.warning("truncation sweep: skipping L = %g below the decay margin %.3g", L, need)
            continue
        nx = max(MIN_POINTS, int(round(2.0 * L * points_per_length)) - 1)
        out.append(lowest_mode(cfg, field, GridSpec(L=L, nx=nx, ny=ny), tol))
    return out


@dataclass(frozen=True)
class LengthStudy:
    """Lowest modes over growing L at fixed spacing; converged once |dE| <= e_tol"""
    results: Tuple[EigenResult, ...]
    converged: bool
    change: float
    decay_length: float

    @property
    def final(self) -> EigenResult:
        return self.results[-1]

    @property
    def bound(self) -> bool:
        # e_min only decreases with L, so one level below the edge settles it
        return any(r.bound for r in self.results)


def decay_length(cfg: StripConfig, field: DensityField, m1: Optional[float] = None) -> float:
    """1 / p1 of the weak-field state, b^3 / (pi^2 M1); infinite when M1 <= 0"""
    if m1 is None:
        m1 = moment(cfg, field).value
    if m1 <= 0.0:
        return math.inf
    return cfg.b ** 3 / (math.pi ** 2 * m1)


def _snap(L: float, points_per_length: float) -> Tuple[float, int]:
    """(L, nx) at or above L with x spacing exactly 1 / points_per_length.

    nx is odd, so every node sits on a multiple of the spacing and
    successive truncations nest.
    """
    n = max(MIN_POINTS, int(math.ceil(2.0 * L * points_per_length - 1e-9)) - 1)
    n += 1 - n % 2
    return (n + 1) / (2.0 * points_per_length), n


def _carry(prev: EigenResult, grid: GridSpec, cfg: StripConfig) -> np.ndarray:
    """Previous eigenvector on the new x nodes, zero beyond the old truncation"""
    x_old, _ = prev.grid.nodes(cfg)
    x_new, _ = grid.nodes(cfg)
    cols = [np.interp(x_new, x_old, col, left=0.0, right=0.0) for col in prev.vector.T]
    return np.stack(cols, axis=1)


def length_study(cfg: StripConfig, field: DensityField, points_per_length: float, ny: int,
                 Ls: Sequence[float] = (), tol: Optional[float] = None,
                 e_tol: Optional[float] = None, L_max: Optional[float] = None,
                 growth: Optional[float] = None) -> LengthStudy:
    """Grow the truncation until e_min settles.

    Starts from the lengths in Ls (those above the decay margin), then
    multiplies L by growth, jumping ahead to the weak-field decay length
    when that is longer, until successive e_min differ by at most
    e_tol * pi^2/b^2 or L reaches L_max. Every level keeps the same
    x spacing and the same y grid.
    """
    e_tol = settings.FD_LENGTH_TOL if e_tol is None else e_tol
    L_max = settings.FD_LENGTH_MAX if L_max is None else L_max
    growth = settings.FD_LENGTH_GROWTH if growth is None else growth
    if growth <= 1.0:
        raise DomainError("length growth factor must exceed 1")
    need = decay_margin(field, cfg)
    if L_max < need:
        raise DomainError(f"L_max = {L_max} below the decay margin {need:.3g}")
    decay = decay_length(cfg, field)

    schedule = sorted(L for L in Ls if need <= L <= L_max) or [max(need, min(decay, L_max))]
    budget = e_tol * cfg.threshold()
    results: List[EigenResult] = []
    change, converged = math.inf, False
    L = schedule[0]
    while True:
        L_grid, nx = _snap(L, points_per_length)
        grid = GridSpec(L=L_grid, nx=nx, ny=ny)
        start = _carry(results[-1], grid, cfg) if results else None
        results.append(lowest_mode(cfg, field, grid, tol, start=start))
        if len(results) >= 2:
            change = abs(results[-2].e_min - results[-1].e_min)
            if change <= budget:
                converged = True
                break
        if grid.L >= L_max:
            break
        if len(results) < len(schedule):
            L = max(schedule[len(results)], grid.L * (1.0 + 1e-9))
        else:
            L = min(max(grid.L * growth, min(decay, L_max)), L_max)

    if not converged:
        logger.warning("truncation study: e_min still moving by %.3e at L = %g (budget %.3e)",
                       change, results[-1].grid.L, budget)
    logger.debug("truncation study: %d lengths, final L = %g, change %.3e",
                 len(results), results[-1].grid.L, change)
    return LengthStudy(results=tuple(results), converged=converged, change=change,
                       decay_length=decay)


def write_eigenvector(path: Path, result: EigenResult, cfg: StripConfig) -> Path:
    """Dense grid export: header 'b L nx ny', then one row per x node"""
    grid = result.grid
    if grid is None:
        raise DomainError("eigen result carries no grid")
    path = Path(path)
    header = f"b={cfg.b!r} L={grid.L!r} nx={grid.nx} ny={grid.ny}"
    np.savetxt(path, result.vector, fmt="%.17g", header=header)
    return path
