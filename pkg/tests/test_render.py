from __future__ import annotations

import math

import numpy as np
import pytest

from waveguide.render import format_records, parse_records, render_report
from waveguide.services.greens import GreensEval


def test_record_formatting():
    text = format_records([("e", 0.1), ("n", 3), ("ok", True), ("v", "bound"),
                           ("x", np.float64(1 / 3)), ("flag", np.bool_(False))])
    assert text == "e=0.1\nn=3\nok=true\nv=bound\nx=0.3333333333333333\nflag=false\n"


def test_parse_records_types():
    rec = parse_records("a=1\nb=2.5e-07\nc=true\nd=unbound at this order\n\ne=nan\n")
    assert rec["a"] == 1 and isinstance(rec["a"], int)
    assert rec["b"] == 2.5e-07
    assert rec["c"] is True
    assert rec["d"] == "unbound at this order"
    assert math.isnan(rec["e"])


def test_record_keys_are_checked():
    with pytest.raises(ValueError):
        format_records([("a=b", 1.0)])


def test_greens_template():
    ev = GreensEval(value=1.25e-3, n_terms_used=257, tail_bound=1e-30, regime="direct-sum")
    point = {"x1": 0.0, "y1": 0.1, "x2": 1.0, "y2": -0.2}
    out = render_report("greens", {"cfg": {"b": 1.0}, "point": point, "ev": ev})
    assert "direct-sum" in out
    assert "257" in out
