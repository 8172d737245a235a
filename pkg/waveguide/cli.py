# waveguide/cli.py
"""
Command-line front end

    python -m waveguide.cli energy --config run.json
    python -m waveguide.cli slab   --config run.json --format records
    python -m waveguide.cli oracle --config run.json --tol-fd 1e-10
    python -m waveguide.cli greens --config run.json --point 0 0.25 0.1 0.25

Exit codes: 0 converged, 2 configuration or domain error, 3 flagged
non-convergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from waveguide import __version__
from waveguide.core.config import settings
from waveguide.core.errors import (
    BracketError,
    ConfigError,
    ConvergenceError,
    ShiftPlacementError,
    WaveguideError,
)
from waveguide.models import GreensPoint, RunConfig, SlabProfile, check_field
from waveguide.render import format_records, render_report
from waveguide.services.fd_oracle import (
    GridSpec,
    length_study,
    refinement_study,
    write_eigenvector,
)
from waveguide.services.greens import g2_zero
from waveguide.services.perturbation import assemble
from waveguide.services.quadrature import QuadratureSpec
from waveguide.services.slab_oracle import series_error_sweep, slab_series, solve_slab
from waveguide.services.variational import rayleigh_quotient, variational_estimate

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

# --tol-* flag -> Tolerances field
TOLERANCE_FLAGS = {
    "tol_quad_2d": "quad_rel_2d",
    "tol_quad_4d": "quad_rel_4d",
    "tol_quad_abs": "quad_abs",
    "tol_greens": "greens",
    "tol_slab": "slab_residual",
    "tol_fd": "fd",
    "tol_fd_length": "fd_length",
}


@dataclass
class Report:
    name: str
    context: Dict[str, Any]
    records: List[Tuple[str, Any]] = dc_field(default_factory=list)
    converged: bool = True


# ============ Config ============

def load_config(path: Path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors()
        )
        raise ConfigError(f"{path}: {problems}") from None


def apply_overrides(run: RunConfig, args: argparse.Namespace) -> RunConfig:
    update = {
        field_name: getattr(args, flag)
        for flag, field_name in TOLERANCE_FLAGS.items()
        if getattr(args, flag, None) is not None
    }
    if update:
        try:
            tolerances = run.tolerances.model_validate({**run.tolerances.model_dump(), **update})
        except ValidationError as exc:
            raise ConfigError(f"tolerance override: {exc.errors()[0]['msg']}") from None
        run = run.model_copy(update={"tolerances": tolerances})
    return run


def _specs(run: RunConfig) -> Tuple[QuadratureSpec, QuadratureSpec]:
    tol = run.tolerances
    spec_2d = QuadratureSpec(rel_tol=tol.quad_rel_2d, abs_tol=tol.quad_abs,
                             max_subdivisions=tol.max_subdivisions)
    spec_4d = QuadratureSpec(rel_tol=tol.quad_rel_4d, abs_tol=tol.quad_abs,
                             max_subdivisions=tol.max_subdivisions)
    return spec_2d, spec_4d


def _checked_field(run: RunConfig):
    field = run.density
    check = check_field(field, run.strip)
    if not check.positive:
        raise ConfigError(f"density: 1 + sigma reaches {check.min_density:.3g} <= 0")
    if not check.support_ok:
        logger.warning("density exceeds the tail tolerance outside support_x (max %.3e)",
                       check.max_outside)
    return field


# ============ Commands ============

def cmd_energy(run: RunConfig, method: str = "modal") -> Report:
    cfg = run.strip
    field = _checked_field(run)
    spec_2d, spec_4d = _specs(run)
    pe = assemble(cfg, field, run.eta, spec_2d, spec_4d, run.tolerances.greens, method)
    var = variational_estimate(cfg, field, spec_2d)
    quotient = rayleigh_quotient(cfg, field, var.a, spec_2d) if var.bound_exists else None

    records = [
        ("e0", pe.e0), ("m1", pe.m1), ("e2", pe.e2), ("e3", pe.e3),
        ("eta", pe.eta), ("total", pe.total),
        *((f"err_{k}", v) for k, v in pe.err_estimates.items()),
        ("i_a", pe.i_a), ("i_b", pe.i_b), ("verdict", pe.verdict),
        ("variational_a", var.a), ("variational_w", var.w),
        ("variational_bound_exists", var.bound_exists),
    ]
    if quotient is not None:
        records.append(("rayleigh_w", quotient.value))
    converged = pe.converged and var.converged and (quotient is None or quotient.converged)
    records.append(("converged", converged))
    context = {"cfg": cfg, "field": field, "pe": pe, "var": var, "quotient": quotient,
               "converged": converged}
    return Report("energy", context, records, converged)


def cmd_slab(run: RunConfig) -> Report:
    cfg = run.strip
    slab = run.density
    if not isinstance(slab, SlabProfile):
        raise ConfigError("density.profile: the slab command needs a 'slab' density")
    sol = solve_slab(cfg, slab, run.tolerances.slab_residual)
    p2sq, p1, energy = slab_series(cfg, slab, 5)
    sweep = series_error_sweep(cfg, slab.delta, run.slab_sweep, 5, run.tolerances.slab_residual)

    records: List[Tuple[str, Any]] = [
        ("sigma0", sol.sigma0), ("delta", sol.delta), ("b", sol.b),
        ("p2", sol.p2), ("p1", sol.p1), ("energy", sol.energy), ("residual", sol.residual),
        ("a1", sol.amplitudes[0]), ("a2", sol.amplitudes[1]), ("a3", sol.amplitudes[2]),
    ]
    records += [(f"series_p2sq_{k}", c) for k, c in enumerate(p2sq)]
    records += [(f"series_p1_{k}", c) for k, c in enumerate(p1)]
    records += [(f"series_energy_{k}", c) for k, c in enumerate(energy)]
    for i, (s, err) in enumerate(zip(sweep.sigmas, sweep.errors)):
        records += [(f"sweep_sigma_{i}", float(s)), (f"sweep_error_{i}", err)]
    records.append(("sweep_slope", sweep.slope))
    context = {"cfg": cfg, "sol": sol, "p2sq": p2sq, "p1": p1, "energy": energy, "sweep": sweep}
    return Report("slab", context, records, True)


def cmd_oracle(run: RunConfig, eigenvector: Optional[Path] = None) -> Report:
    cfg = run.strip
    field = _checked_field(run)
    g = run.grid
    tol = run.tolerances.fd
    base = GridSpec(L=g.L, nx=g.nx, ny=g.ny)
    results, ext = refinement_study(cfg, field, base, g.refinements, tol)
    points_per_length = (g.nx + 1) / (2.0 * g.L)
    study = length_study(cfg, field, points_per_length, g.ny, g.l_sweep, tol,
                         run.tolerances.fd_length, g.l_max)
    sweep = study.results

    spec_2d, spec_4d = _specs(run)
    pe = assemble(cfg, field, run.eta, spec_2d, spec_4d, run.tolerances.greens)
    exact = None
    if isinstance(field, SlabProfile) and field.sigma0 > 0:
        exact = solve_slab(cfg, field, run.tolerances.slab_residual).energy
    finest = results[-1]
    if eigenvector is not None:
        write_eigenvector(eigenvector, finest, cfg)

    records: List[Tuple[str, Any]] = []
    for i, r in enumerate(results):
        records += [(f"grid_{i}_nx", r.grid.nx), (f"grid_{i}_ny", r.grid.ny),
                    (f"grid_{i}_e_min", r.e_min), (f"grid_{i}_threshold", r.threshold)]
    for i, r in enumerate(sweep):
        records += [(f"sweep_{i}_L", r.grid.L), (f"sweep_{i}_e_min", r.e_min)]
    records += [
        ("extrapolated", ext.extrapolated), ("energy", ext.energy),
        ("error_bar", ext.error_bar), ("order", ext.order),
        ("threshold", cfg.threshold()), ("perturbative_total", pe.total),
        ("bound", finest.bound or study.bound), ("localization", finest.localization),
        ("length_converged", study.converged), ("length_final", study.final.grid.L),
        ("length_change", study.change), ("decay_length", study.decay_length),
    ]
    if exact is not None:
        records += [("slab_exact", exact), ("rel_error_vs_exact", abs(ext.energy - exact) / exact)]
    converged = pe.converged and study.converged
    context = {"cfg": cfg, "results": results, "ext": ext, "sweep": sweep, "study": study, "pe": pe,
               "exact": exact, "finest": finest}
    return Report("oracle", context, records, converged)


def cmd_greens(run: RunConfig, point: Optional[Sequence[float]] = None) -> Report:
    if point is not None:
        p = GreensPoint(x1=point[0], y1=point[1], x2=point[2], y2=point[3])
    elif run.greens_point is not None:
        p = run.greens_point
    else:
        raise ConfigError("greens_point: required (in the config or via --point)")
    ev = g2_zero(p.x1, p.y1, p.x2, p.y2, run.strip, run.tolerances.greens)
    records = [("x1", p.x1), ("y1", p.y1), ("x2", p.x2), ("y2", p.y2),
               ("value", ev.value), ("n_terms_used", ev.n_terms_used),
               ("tail_bound", ev.tail_bound), ("regime", ev.regime)]
    return Report("greens", {"cfg": run.strip, "point": p, "ev": ev}, records, True)


# ============ Entry point ============

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, required=True, help="JSON run configuration")
    common.add_argument("--format", choices=("human", "records"), default=None,
                        help="output format (default: the config's 'output')")
    common.add_argument("--log-level", default=None, type=str.upper,
                        choices=("DEBUG", "INFO", "WARNING", "ERROR"),
                        help="logging level (default: WAVEGUIDE_LOG_LEVEL or WARNING)")
    for flag, field_name in TOLERANCE_FLAGS.items():
        common.add_argument("--" + flag.replace("_", "-"), dest=flag, type=float, default=None,
                            help=f"override tolerances.{field_name}")

    parser = argparse.ArgumentParser(prog="waveguide",
                                     description="Weakly bound states of a heterogeneous waveguide")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    energy = sub.add_parser("energy", parents=[common], help="perturbative and variational energy")
    energy.add_argument("--method", choices=("modal", "direct"), default="modal")
    sub.add_parser("slab", parents=[common], help="exact slab root and its weak-slab series")
    oracle = sub.add_parser("oracle", parents=[common], help="finite-difference eigenvalue oracle")
    oracle.add_argument("--eigenvector", type=Path, default=None,
                        help="write the finest-grid eigenvector here")
    greens = sub.add_parser("greens", parents=[common], help="point-evaluate G2")
    greens.add_argument("--point", type=float, nargs=4, metavar=("X1", "Y1", "X2", "Y2"))
    return parser


def _dispatch(args: argparse.Namespace, run: RunConfig) -> Report:
    if args.command == "energy":
        return cmd_energy(run, args.method)
    if args.command == "slab":
        return cmd_slab(run)
    if args.command == "oracle":
        return cmd_oracle(run, args.eigenvector)
    return cmd_greens(run, args.point)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG

    logging.basicConfig(
        level=(args.log_level or settings.LOG_LEVEL).upper(),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    try:
        run = apply_overrides(load_config(args.config), args)
        report = _dispatch(args, run)
    except (ConvergenceError, ShiftPlacementError, BracketError) as exc:
        logger.error("%s", exc)
        return EXIT_NUMERIC
    except WaveguideError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG

    fmt = args.format or run.output
    if fmt == "records":
        sys.stdout.write(format_records(report.records))
    else:
        sys.stdout.write(render_report(report.name, report.context))
    if not report.converged:
        logger.error("%s: flagged non-convergence", report.name)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
