from __future__ import annotations

import json
import math
from pathlib import Path

import pytest

from waveguide.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, cmd_energy, load_config, main
from waveguide.core.errors import ConfigError
from waveguide.render import format_records, parse_records

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
SLAB = {"profile": "slab", "sigma0": 0.1, "delta": 0.5}
GAUSSIAN = {"profile": "gaussian", "amplitude": 0.15, "y0": 0.1, "wx": 0.3, "wy": 0.2}


def run_records(capsys, *argv) -> tuple[int, dict]:
    code = main([*argv, "--format", "records"])
    return code, parse_records(capsys.readouterr().out)


def test_energy_records(capsys, write_config):
    code, rec = run_records(capsys, "energy", "--config", str(write_config(SLAB)))
    assert code == EXIT_OK
    assert rec["total"] == pytest.approx(9.8137309, abs=1e-6)
    assert rec["verdict"] == "bound"
    assert rec["converged"] is True
    assert rec["variational_bound_exists"] is True
    assert rec["rayleigh_w"] >= 9.8139


def test_records_round_trip_exactly(write_config):
    report = cmd_energy(load_config(write_config(GAUSSIAN)))
    parsed = parse_records(format_records(report.records))
    assert list(parsed) == [k for k, _ in report.records]
    for key, value in report.records:
        assert parsed[key] == value


def test_empty_field_stays_at_threshold(capsys, write_config):
    code, rec = run_records(capsys, "energy", "--config",
                            str(write_config({"profile": "slab", "sigma0": 0.0, "delta": 0.5})))
    assert code == EXIT_OK
    assert rec["total"] == math.pi ** 2
    assert rec["verdict"] == "unbound at this order"
    assert rec["variational_bound_exists"] is False
    assert "rayleigh_w" not in rec


def test_balanced_config_is_undetermined(capsys):
    code, rec = run_records(capsys, "energy", "--config", str(CONFIGS / "balanced.json"))
    assert code == EXIT_OK
    assert rec["verdict"] == "undetermined"
    assert abs(rec["e2"]) < 1e-10
    assert abs(rec["e3"]) < 1e-8


def test_energy_human_report(capsys):
    assert main(["energy", "--config", str(CONFIGS / "slab.json"), "--format", "human"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "verdict" in out and "bound" in out
    assert "Rayleigh quotient" in out


def test_slab_command(capsys):
    code, rec = run_records(capsys, "slab", "--config", str(CONFIGS / "slab.json"))
    assert code == EXIT_OK
    assert 9.8139 <= rec["energy"] <= 9.8141
    assert rec["series_energy_2"] == pytest.approx(-math.pi ** 4 / 16)
    assert rec["sweep_slope"] == pytest.approx(6.0, abs=0.3)
    assert rec["a1"] == rec["a3"]


def test_slab_human_report(capsys):
    assert main(["slab", "--config", str(CONFIGS / "slab.json"), "--format", "human"]) == EXIT_OK
    assert "log-log slope" in capsys.readouterr().out


@pytest.mark.parametrize("density", [
    {"profile": "slab", "sigma0": -0.1, "delta": 0.5},
    {"profile": "slab", "sigma0": 0.0, "delta": 0.5},
    GAUSSIAN,
])
def test_slab_command_rejects(capsys, write_config, density):
    assert main(["slab", "--config", str(write_config(density))]) == EXIT_CONFIG


def test_greens_command(capsys, write_config):
    code, rec = run_records(capsys, "greens", "--config", str(write_config(SLAB)),
                            "--point", "0", "0.25", "10", "0.25")
    assert code == EXIT_OK
    assert rec["regime"] == "direct-sum"
    assert rec["value"] == pytest.approx(
        math.exp(-10 * math.pi * math.sqrt(3)) / (math.pi * math.sqrt(3)), rel=1e-9)
    assert rec["tail_bound"] <= 1e-10


def test_greens_point_from_config(capsys, write_config):
    path = write_config(SLAB, greens_point={"x1": 0.0, "y1": 0.1, "x2": 0.001, "y2": 0.1})
    code, rec = run_records(capsys, "greens", "--config", str(path))
    assert code == EXIT_OK
    assert rec["regime"] == "small-separation"


def test_greens_errors(capsys, write_config):
    path = str(write_config(SLAB))
    assert main(["greens", "--config", path]) == EXIT_CONFIG
    assert main(["greens", "--config", path, "--point", "0", "0.1", "0", "0.1"]) == EXIT_CONFIG


def test_invalid_configs(tmp_path, capsys):
    bad_json = tmp_path / "bad.json"
    bad_json.write_text("{ not json", encoding="utf-8")
    no_strip = tmp_path / "no_strip.json"
    no_strip.write_text(json.dumps({"density": SLAB}), encoding="utf-8")
    future = tmp_path / "future.json"
    future.write_text(json.dumps({"schema_version": 2, "strip": {"b": 1.0}, "density": SLAB}),
                      encoding="utf-8")
    for path in (bad_json, no_strip, future, tmp_path / "missing.json"):
        assert main(["energy", "--config", str(path)]) == EXIT_CONFIG


def test_load_config_names_the_field(tmp_path):
    path = tmp_path / "neg.json"
    path.write_text(json.dumps({"strip": {"b": -1.0}, "density": SLAB}), encoding="utf-8")
    with pytest.raises(ConfigError, match="strip.b"):
        load_config(path)


def test_tolerance_overrides(capsys, write_config):
    path = str(write_config(SLAB))
    assert main(["greens", "--config", path, "--point", "0", "0", "1", "0",
                 "--tol-greens", "1e-8", "--log-level", "info"]) == EXIT_OK
    assert main(["greens", "--config", path, "--point", "0", "0", "1", "0",
                 "--tol-greens", "-1"]) == EXIT_CONFIG


def test_argument_errors(capsys):
    assert main(["transmogrify"]) == EXIT_CONFIG
    assert main(["energy"]) == EXIT_CONFIG
    assert main(["--version"]) == EXIT_OK


def test_unconverged_run_exits_numeric(capsys, write_config):
    path = write_config(GAUSSIAN, tolerances={
        "quad_rel_2d": 1e-14, "quad_abs": 1e-15, "max_subdivisions": 1,
    })
    code, rec = run_records(capsys, "energy", "--config", str(path))
    assert code == EXIT_NUMERIC
    assert rec["converged"] is False


@pytest.mark.slow
def test_oracle_command(capsys, tmp_path):
    vector = tmp_path / "phi.txt"
    code = main(["oracle", "--config", str(CONFIGS / "slab.json"), "--format", "records",
                 "--eigenvector", str(vector)])
    rec = parse_records(capsys.readouterr().out)
    assert code == EXIT_OK
    assert rec["rel_error_vs_exact"] <= 1e-3
    assert rec["bound"] is True
    assert vector.read_text().startswith("# b=1.0 L=12.0 nx=399 ny=79")


@pytest.mark.slow
@pytest.mark.parametrize("name, settles", [
    ("slab.json", True),
    ("gaussian.json", True),
    # M1 = 0: any bound state decays far beyond the default l_max
    ("balanced.json", False),
])
def test_oracle_runs_on_shipped_configs(capsys, name, settles):
    code, rec = run_records(capsys, "oracle", "--config", str(CONFIGS / name))
    assert rec["length_converged"] is settles
    assert code == (EXIT_OK if settles else EXIT_NUMERIC)
    if settles:
        assert rec["bound"] is True
        assert rec["length_change"] <= 1e-6 * math.pi ** 2


def test_every_shipped_config_is_covered():
    assert sorted(p.name for p in CONFIGS.glob("*.json")) == ["balanced.json", "gaussian.json", "slab.json"]


def test_oracle_flags_unsettled_length(capsys, write_config):
    grid = {"L": 4.0, "nx": 31, "ny": 16, "refinements": 2, "l_sweep": [4.0], "l_max": 8.0}
    path = write_config({"profile": "slab", "sigma0": 0.0, "delta": 0.5}, grid=grid)
    code, rec = run_records(capsys, "oracle", "--config", str(path))
    assert code == EXIT_NUMERIC
    assert rec["length_converged"] is False
    assert rec["bound"] is False
    assert rec["length_final"] >= 8.0
    assert rec["decay_length"] == math.inf
    assert rec["sweep_0_L"] == pytest.approx(4.0)
