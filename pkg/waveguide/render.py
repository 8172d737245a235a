# waveguide/render.py
"""Report rendering: jinja2 templates for people, key=value records for machines"""
from __future__ import annotations

import math
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Tuple

import numpy as np
from jinja2 import Environment, FileSystemLoader, StrictUndefined, select_autoescape

from waveguide.core.config import settings


# -----------------------------
# Human reports
# -----------------------------
def _fmt(value: Any, digits: int = 10) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "n/a"
        return f"{value:.{digits}g}"
    return str(value)


def _sci(value: Any, digits: int = 2) -> str:
    if isinstance(value, float):
        return f"{value:.{digits}e}"
    return str(value)


def _jinja_env(templates_dir: Path) -> Environment:
    env = Environment(
        loader=FileSystemLoader(str(templates_dir)),
        autoescape=select_autoescape(enabled_extensions=(), default_for_string=False),
        undefined=StrictUndefined,
        trim_blocks=True,
        lstrip_blocks=True,
        keep_trailing_newline=True,
    )
    env.filters["fmt"] = _fmt
    env.filters["sci"] = _sci
    return env


def render_report(name: str, context: Mapping[str, Any],
                  templates_dir: Optional[Path] = None) -> str:
    """Render templates/<name>.txt.j2"""
    env = _jinja_env(templates_dir or settings.TEMPLATES_DIR)
    return env.get_template(f"{name}.txt.j2").render(**context)


# -----------------------------
# Machine records
# -----------------------------
def _record_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        # repr round-trips exactly through float()
        return repr(float(value))
    if isinstance(value, np.bool_):
        return _record_value(bool(value))
    return str(value)


def format_records(records: Iterable[Tuple[str, Any]]) -> str:
    lines = []
    for key, value in records:
        if "=" in key or "\n" in key:
            raise ValueError(f"invalid record key {key!r}")
        lines.append(f"{key}={_record_value(value)}")
    return "\n".join(lines) + "\n"


def parse_records(text: str) -> Dict[str, Any]:
    """Inverse of format_records: numbers come back as int/float, the rest as str"""
    out: Dict[str, Any] = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, _, raw = line.partition("=")
        out[key] = _parse_value(raw)
    return out


def _parse_value(raw: str) -> Any:
    if raw in ("true", "false"):
        return raw == "true"
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            continue
    return raw
