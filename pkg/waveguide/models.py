"""
Pydantic models for the waveguide solvers
Strip geometry, density profiles and the versioned run configuration
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Annotated, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError, model_validator
from scipy.stats import qmc

from waveguide.core.config import settings
from waveguide.core.errors import DomainError

# |sigma| below this outside support_x counts as "localized"
TAIL_TOLERANCE = 1e-12

Smoothness = Literal["piecewise-constant", "smooth"]


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


# ============ Geometry ============

class StripConfig(_Frozen):
    """Infinite strip |y| <= b/2 with Dirichlet walls"""
    b: float = Field(gt=0, description="strip width")

    def threshold(self) -> float:
        """Bottom of the continuum, pi^2/b^2 (transverse mode n = 1)"""
        return math.pi ** 2 / self.b ** 2

    def scaled(self, lam: float) -> StripConfig:
        return StripConfig(b=lam * self.b)


def threshold(cfg: StripConfig) -> float:
    return cfg.threshold()


# ============ Density profiles ============

class _Profile(_Frozen):
    """Common interface of every DensityField realization.

    ``sigma(x, y)`` broadcasts over numpy arrays and is pure, so a single
    instance can be shared by concurrent workers.
    """

    def sigma(self, x, y) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    @property
    def support_x(self) -> Tuple[float, float]:  # pragma: no cover - abstract
        raise NotImplementedError

    @property
    def smoothness_hint(self) -> Smoothness:  # pragma: no cover - abstract
        raise NotImplementedError

    @property
    def split_points_x(self) -> Tuple[float, ...]:
        return ()

    @property
    def split_points_y(self) -> Tuple[float, ...]:
        return ()

    def lower_bound(self) -> float:
        """A number <= min sigma, used for the positivity check"""
        raise NotImplementedError  # pragma: no cover

    def max_abs(self) -> float:
        """A number >= max |sigma|"""
        raise NotImplementedError  # pragma: no cover

    def scaled(self, lam: float):  # pragma: no cover - abstract
        raise NotImplementedError


class SlabProfile(_Profile):
    profile: Literal["slab"] = "slab"
    sigma0: float = Field(gt=-1, description="slab amplitude")
    delta: float = Field(gt=0, description="slab width")

    def sigma(self, x, y) -> np.ndarray:
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        # closed interval: the jump returns the interior value
        return np.where(np.abs(x) <= 0.5 * self.delta, self.sigma0, 0.0)

    @property
    def support_x(self) -> Tuple[float, float]:
        return (-0.5 * self.delta, 0.5 * self.delta)

    @property
    def smoothness_hint(self) -> Smoothness:
        return "piecewise-constant"

    @property
    def split_points_x(self) -> Tuple[float, ...]:
        return self.support_x

    def lower_bound(self) -> float:
        return min(0.0, self.sigma0)

    def max_abs(self) -> float:
        return abs(self.sigma0)

    def scaled(self, lam: float) -> SlabProfile:
        return SlabProfile(sigma0=self.sigma0, delta=lam * self.delta)


class GaussianProfile(_Profile):
    profile: Literal["gaussian"] = "gaussian"
    amplitude: float = Field(gt=-1)
    x0: float = 0.0
    y0: float = 0.0
    wx: float = Field(gt=0)
    wy: float = Field(gt=0)

    def sigma(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        arg = ((x - self.x0) / self.wx) ** 2 + ((y - self.y0) / self.wy) ** 2
        return self.amplitude * np.exp(-0.5 * arg)

    @property
    def support_x(self) -> Tuple[float, float]:
        a = abs(self.amplitude)
        if a <= TAIL_TOLERANCE:
            half = self.wx
        else:
            half = self.wx * math.sqrt(2.0 * math.log(a / TAIL_TOLERANCE))
        return (self.x0 - half, self.x0 + half)

    @property
    def smoothness_hint(self) -> Smoothness:
        return "smooth"

    def lower_bound(self) -> float:
        return min(0.0, self.amplitude)

    def max_abs(self) -> float:
        return abs(self.amplitude)

    def scaled(self, lam: float) -> GaussianProfile:
        return GaussianProfile(
            amplitude=self.amplitude, x0=lam * self.x0, y0=lam * self.y0,
            wx=lam * self.wx, wy=lam * self.wy,
        )


class BoxProfile(_Profile):
    """Rectangular patch [x_lo, x_hi] x [y_lo, y_hi] of constant amplitude"""
    profile: Literal["box"] = "box"
    amplitude: float = Field(gt=-1)
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    @model_validator(mode="after")
    def _ordered(self) -> BoxProfile:
        if not (self.x_lo < self.x_hi and self.y_lo < self.y_hi):
            raise ValueError("box needs x_lo < x_hi and y_lo < y_hi")
        return self

    def sigma(self, x, y) -> np.ndarray:
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        inside = (x >= self.x_lo) & (x <= self.x_hi) & (y >= self.y_lo) & (y <= self.y_hi)
        return np.where(inside, self.amplitude, 0.0)

    @property
    def support_x(self) -> Tuple[float, float]:
        return (self.x_lo, self.x_hi)

    @property
    def smoothness_hint(self) -> Smoothness:
        return "piecewise-constant"

    @property
    def split_points_x(self) -> Tuple[float, ...]:
        return (self.x_lo, self.x_hi)

    @property
    def split_points_y(self) -> Tuple[float, ...]:
        return (self.y_lo, self.y_hi)

    def lower_bound(self) -> float:
        return min(0.0, self.amplitude)

    def max_abs(self) -> float:
        return abs(self.amplitude)

    def scaled(self, lam: float) -> BoxProfile:
        return BoxProfile(
            amplitude=self.amplitude, x_lo=lam * self.x_lo, x_hi=lam * self.x_hi,
            y_lo=lam * self.y_lo, y_hi=lam * self.y_hi,
        )


class SumProfile(_Profile):
    """Superposition of profiles"""
    profile: Literal["sum"] = "sum"
    terms: List["DensitySpec"] = Field(min_length=1)

    @model_validator(mode="after")
    def _positive(self) -> SumProfile:
        if self.lower_bound() <= -1.0:
            raise ValueError(
                "negative parts of the terms add up to <= -1; density may be nonpositive"
            )
        return self

    def sigma(self, x, y) -> np.ndarray:
        total = self.terms[0].sigma(x, y)
        for term in self.terms[1:]:
            total = total + term.sigma(x, y)
        return total

    @property
    def support_x(self) -> Tuple[float, float]:
        lows, highs = zip(*(t.support_x for t in self.terms))
        return (min(lows), max(highs))

    @property
    def smoothness_hint(self) -> Smoothness:
        if all(t.smoothness_hint == "smooth" for t in self.terms):
            return "smooth"
        return "piecewise-constant"

    @property
    def split_points_x(self) -> Tuple[float, ...]:
        return tuple(sorted({p for t in self.terms for p in t.split_points_x}))

    @property
    def split_points_y(self) -> Tuple[float, ...]:
        return tuple(sorted({p for t in self.terms for p in t.split_points_y}))

    def lower_bound(self) -> float:
        return sum(t.lower_bound() for t in self.terms)

    def max_abs(self) -> float:
        return sum(t.max_abs() for t in self.terms)

    def scaled(self, lam: float) -> SumProfile:
        return SumProfile(terms=[t.scaled(lam) for t in self.terms])


DensitySpec = Annotated[
    Union[SlabProfile, GaussianProfile, BoxProfile, SumProfile],
    Field(discriminator="profile"),
]
SumProfile.model_rebuild()

# Any realized profile is a DensityField
DensityField = Union[SlabProfile, GaussianProfile, BoxProfile, SumProfile]
_FIELD_ADAPTER = TypeAdapter(DensitySpec)


def _domain_error(exc: ValidationError) -> DomainError:
    first = exc.errors()[0]
    loc = ".".join(str(p) for p in first["loc"]) or "density"
    return DomainError(f"{loc}: {first['msg']}")


def make_slab(sigma0: float, delta: float) -> SlabProfile:
    """Slab of amplitude sigma0 on |x| <= delta/2"""
    try:
        return SlabProfile(sigma0=sigma0, delta=delta)
    except ValidationError as exc:
        raise _domain_error(exc) from None


def build_field(spec: dict) -> DensityField:
    """Turn a plain density spec (e.g. parsed JSON) into a DensityField"""
    try:
        return _FIELD_ADAPTER.validate_python(spec)
    except ValidationError as exc:
        raise _domain_error(exc) from None


def scaled(field: DensityField, lam: float) -> DensityField:
    """Geometric rescaling x, y, widths -> lam * (...); amplitudes unchanged"""
    return field.scaled(lam)


@dataclass(frozen=True)
class FieldCheck:
    """Outcome of sampling a field against its declarations"""
    n_samples: int
    min_density: float
    max_outside: float
    positive: bool
    support_ok: bool


def check_field(field: DensityField, cfg: StripConfig, n_samples: int = 10_000,
                seed: int = 0) -> FieldCheck:
    """Sample sigma at Sobol points inside and around support_x.

    The sampled box extends one support width plus one strip width on each
    side so that about half the points land in the declared tail.
    """
    lo, hi = field.support_x
    pad = (hi - lo) + cfg.b
    sampler = qmc.Sobol(d=2, scramble=True, seed=seed)
    m = max(1, math.ceil(math.log2(n_samples)))
    pts = sampler.random_base2(m)[:n_samples]
    pts = qmc.scale(pts, [lo - pad, -0.5 * cfg.b], [hi + pad, 0.5 * cfg.b])
    x, y = pts[:, 0], pts[:, 1]
    s = field.sigma(x, y)
    outside = (x < lo) | (x > hi)
    max_outside = float(np.max(np.abs(s[outside]))) if np.any(outside) else 0.0
    min_density = float(np.min(1.0 + s))
    return FieldCheck(
        n_samples=len(x),
        min_density=min_density,
        max_outside=max_outside,
        positive=min_density > 0.0,
        support_ok=max_outside <= TAIL_TOLERANCE,
    )


# ============ Run configuration ============

SCHEMA_VERSION = 1


class Tolerances(_Frozen):
    quad_rel_2d: float = Field(default_factory=lambda: settings.QUAD_REL_TOL_2D, gt=0)
    quad_rel_4d: float = Field(default_factory=lambda: settings.QUAD_REL_TOL_4D, gt=0)
    quad_abs: float = Field(default_factory=lambda: settings.QUAD_ABS_TOL, gt=0)
    max_subdivisions: int = Field(default_factory=lambda: settings.QUAD_MAX_SUBDIVISIONS, ge=1)
    greens: float = Field(default_factory=lambda: settings.GREENS_TOL, gt=0)
    slab_residual: float = Field(default_factory=lambda: settings.SLAB_RESIDUAL_TOL, gt=0)
    fd: float = Field(default_factory=lambda: settings.FD_TOL, gt=0)
    fd_length: float = Field(default_factory=lambda: settings.FD_LENGTH_TOL, gt=0)


class OracleGrid(_Frozen):
    """Finite-difference study: base grid, refinements and truncation sweep"""
    L: float = Field(default=12.0, gt=0)
    nx: int = Field(default=99, ge=16)
    ny: int = Field(default=19, ge=16)
    refinements: int = Field(default=3, ge=2)
    l_sweep: List[float] = Field(default_factory=lambda: [6.0, 9.0, 12.0])
    l_max: float = Field(default_factory=lambda: settings.FD_LENGTH_MAX, gt=0)


class GreensPoint(_Frozen):
    x1: float
    y1: float
    x2: float
    y2: float


class RunConfig(_Frozen):
    schema_version: Literal[1] = SCHEMA_VERSION
    strip: StripConfig
    density: DensitySpec
    eta: float = 1.0
    tolerances: Tolerances = Field(default_factory=Tolerances)
    grid: OracleGrid = Field(default_factory=OracleGrid)
    slab_sweep: List[float] = Field(default_factory=lambda: [0.02, 0.04, 0.08])
    greens_point: Optional[GreensPoint] = None
    output: Literal["human", "records"] = "human"
