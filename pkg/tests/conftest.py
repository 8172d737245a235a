from __future__ import annotations

import json
from pathlib import Path

import pytest

from waveguide.models import BoxProfile, StripConfig, SumProfile, make_slab


@pytest.fixture
def unit_strip() -> StripConfig:
    return StripConfig(b=1.0)


@pytest.fixture
def slab():
    return make_slab(0.1, 0.5)


@pytest.fixture
def balanced():
    """Two full-height boxes of opposite sign: M1 = 0 by construction"""
    return SumProfile(terms=[
        BoxProfile(amplitude=0.1, x_lo=-1.0, x_hi=-0.5, y_lo=-0.5, y_hi=0.5),
        BoxProfile(amplitude=-0.1, x_lo=0.5, x_hi=1.0, y_lo=-0.5, y_hi=0.5),
    ])


@pytest.fixture
def write_config(tmp_path: Path):
    def _write(density: dict, **extra) -> Path:
        doc = {"schema_version": 1, "strip": {"b": 1.0}, "density": density, **extra}
        path = tmp_path / "run.json"
        path.write_text(json.dumps(doc), encoding="utf-8")
        return path
    return _write
