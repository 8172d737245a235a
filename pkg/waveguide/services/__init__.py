# waveguide/services/__init__.py
from waveguide.services.fd_oracle import (
    EigenResult,
    Extrapolation,
    GridSpec,
    lowest_mode,
    refine,
    refinement_study,
    truncation_sweep,
    write_eigenvector,
)
from waveguide.services.greens import (
    GreensEval,
    TransverseProjections,
    g2_mode_sum,
    g2_polylog,
    g2_series_smallsep,
    g2_zero,
    g2_zero_unreduced,
    transverse_projections,
)
from waveguide.services.perturbation import (
    PerturbativeEnergy,
    assemble,
    first_order,
    second_order,
    third_order,
)
from waveguide.services.quadrature import (
    QuadratureSpec,
    QuadResult,
    integrate_line,
    integrate_line_pair,
    integrate_pair,
    integrate_strip,
)
from waveguide.services.slab_oracle import (
    SeriesSweep,
    SlabSolution,
    evaluate_series,
    series_error_sweep,
    slab_series,
    slab_wavefunction,
    solve_slab,
)
from waveguide.services.variational import (
    VariationalResult,
    rayleigh_quotient,
    variational_estimate,
)

__all__ = [
    "EigenResult", "Extrapolation", "GridSpec", "lowest_mode", "refine", "refinement_study",
    "truncation_sweep", "write_eigenvector",
    "GreensEval", "TransverseProjections", "g2_mode_sum", "g2_polylog", "g2_series_smallsep",
    "g2_zero", "g2_zero_unreduced", "transverse_projections",
    "PerturbativeEnergy", "assemble", "first_order", "second_order", "third_order",
    "QuadratureSpec", "QuadResult", "integrate_line", "integrate_line_pair", "integrate_pair",
    "integrate_strip",
    "SeriesSweep", "SlabSolution", "evaluate_series", "series_error_sweep", "slab_series",
    "slab_wavefunction", "solve_slab",
    "VariationalResult", "rayleigh_quotient", "variational_estimate",
]
