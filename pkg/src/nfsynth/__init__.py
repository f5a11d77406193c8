"""Synthesis of acoustic sources with controllable near fields.

Library layout:

- :mod:`nfsynth.specfun` -- spherical harmonics, Bessel/Hankel functions
- :mod:`nfsynth.geometry` -- regions, sphere quadrature, sample sets
- :mod:`nfsynth.potentials` -- Helmholtz kernel, layer potentials, propagators
- :mod:`nfsynth.inverse` -- Tikhonov solves and Morozov parameter selection
- :mod:`nfsynth.scenario` -- end-to-end pipelines and diagnostics
- :mod:`nfsynth.gridio` / :mod:`nfsynth.configio` -- file formats
- :mod:`nfsynth.cli` -- command-line driver
"""

from .errors import (
    ConfigurationError,
    DataError,
    DomainError,
    GeometryError,
    NfsynthError,
)
from .geometry import (
    BallExterior,
    QuadratureRule,
    RegionSpec,
    SampleSet,
    SectorShell,
    SphereSurface,
    cartesian_slice_grid,
    sector_shell_boundary,
    sector_shell_interior_grid,
    sphere_rule,
)
from .inverse import (
    SolveReport,
    TikhonovProblem,
    morozov_select,
    mu_for_region,
    solve_fixed_alpha,
)
from .potentials import (
    DensityCoefficients,
    Propagator,
    WaveContext,
    assemble_propagator,
    boundary_traces,
    evaluate_field,
    evaluate_field_gradient,
    green_free,
    green_free_grad_y,
    multipole_column,
    multipole_field,
)
from .scenario import (
    MetricsReport,
    ScenarioConfig,
    ScenarioResult,
    TargetField,
    builtin_scenario,
    builtin_scenarios,
    far_field_decay,
    metrics_from_density,
    pointwise_relative_error,
    radiated_power,
    radiation_residual_ratio,
    run_scenario,
    target_samples,
    time_snapshots,
)
from .specfun import (
    HarmonicIndex,
    sph_bessel_j,
    sph_bessel_y,
    sph_hankel1,
    sph_harm,
    sph_harm_derivatives,
    sph_harm_matrix,
)

__version__ = "0.1.0"
