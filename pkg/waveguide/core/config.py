"""Numerical defaults"""
from pathlib import Path

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Library-wide numerical defaults, overridable via WAVEGUIDE_* env vars"""

    model_config = SettingsConfigDict(
        env_prefix="WAVEGUIDE_",
        env_file=".env",
        extra="ignore",
    )

    # Quadrature
    QUAD_REL_TOL_2D: float = 1e-8
    QUAD_REL_TOL_4D: float = 1e-5
    QUAD_ABS_TOL: float = 1e-12
    QUAD_MAX_SUBDIVISIONS: int = 2000

    # Green's correlator tail
    GREENS_TOL: float = 1e-10

    # Slab transcendental equation
    SLAB_RESIDUAL_TOL: float = 1e-12

    # Finite-difference oracle
    FD_TOL: float = 1e-9
    FD_MAX_ITER: int = 500
    # Truncation study: grow L by FD_LENGTH_GROWTH until |dE| <= FD_LENGTH_TOL * pi^2/b^2
    FD_LENGTH_TOL: float = 1e-6
    FD_LENGTH_GROWTH: float = 1.5
    FD_LENGTH_MAX: float = 120.0

    # Rendering / logging
    TEMPLATES_DIR: Path = Path(__file__).resolve().parents[2] / "templates"
    LOG_LEVEL: str = "WARNING"


settings = Settings()
