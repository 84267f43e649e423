"""Spectral simulator for stochastically forced incompressible flow on the unit sphere.

The package is organised in layers:

* :mod:`sphereflow.grid` / :mod:`sphereflow.spectral` — Gauss-Legendre
  quadrature and the orthonormal spherical-harmonic basis with stream-function
  velocity synthesis/analysis.
* :mod:`sphereflow.operators` — dissipation variants, Coriolis term,
  advection trilinear form, calibrated embedding constants.
* :mod:`sphereflow.noise` — reproducible two-sided noise paths and the exact
  stationary Ornstein-Uhlenbeck auxiliary process.
* :mod:`sphereflow.solver` — exponential integrators for the shifted
  vorticity equation, energy diagnostics, decay certificates.
* :mod:`sphereflow.attractor` — absorbing radii, pullback contraction
  experiments, invariant-measure probes.
* :mod:`sphereflow.serialize` / :mod:`sphereflow.config` /
  :mod:`sphereflow.cli` — on-disk formats, TOML run configuration, and the
  ``sphereflow`` command-line tool.
"""

from .attractor import (
    AbsorbingRadii,
    absorbing_radii,
    absorption_check,
    class_R_decay,
    deterministic_r11,
    measure_ensemble,
    measure_report,
    measure_time_average,
    ou_history,
    pullback_experiment,
)
from .config import (
    ConfigError,
    MeasureOptions,
    PullbackOptions,
    RunConfig,
    SimulateOptions,
)
from .grid import GridSpec, QuadratureGrid, build_grid, integrate_scalar
from .noise import (
    NoisePath,
    NoiseSpec,
    OUState,
    RoughNoiseWarning,
    mode_rates,
    ou_init_from_path,
    ou_init_stationary,
    ou_step,
    radonifying_report,
)
from .operators import (
    CalibratedConstants,
    OperatorVariant,
    apply_A,
    calibrate_constants,
    coriolis_rates,
    dual_norm,
    nonlinear_tendency,
    stokes_rates,
    trilinear_b,
    variant_lambda1,
)
from .solver import (
    BlowupError,
    IntegratorConfig,
    ModelConfig,
    RunRecord,
    SimState,
    Simulator,
    certificate_margins,
    direct_u_oracle,
    energy_balance_residuals,
    gronwall_constant,
    rds_phi,
)
from .spectral import (
    ScalarSpectrum,
    SpectralBasis,
    default_basis,
    enstrophy,
    hodge_project,
    l4_norm,
    quartic_basis,
    random_stream,
    velocity_l2,
)

__version__ = "0.1.0"

__all__ = [
    "AbsorbingRadii",
    "BlowupError",
    "CalibratedConstants",
    "ConfigError",
    "GridSpec",
    "IntegratorConfig",
    "MeasureOptions",
    "ModelConfig",
    "NoisePath",
    "NoiseSpec",
    "OUState",
    "OperatorVariant",
    "PullbackOptions",
    "QuadratureGrid",
    "RoughNoiseWarning",
    "RunConfig",
    "RunRecord",
    "ScalarSpectrum",
    "SimState",
    "SimulateOptions",
    "Simulator",
    "SpectralBasis",
    "absorbing_radii",
    "absorption_check",
    "apply_A",
    "build_grid",
    "calibrate_constants",
    "certificate_margins",
    "class_R_decay",
    "coriolis_rates",
    "default_basis",
    "deterministic_r11",
    "direct_u_oracle",
    "dual_norm",
    "energy_balance_residuals",
    "enstrophy",
    "gronwall_constant",
    "hodge_project",
    "integrate_scalar",
    "l4_norm",
    "measure_ensemble",
    "measure_report",
    "measure_time_average",
    "mode_rates",
    "nonlinear_tendency",
    "ou_history",
    "ou_init_from_path",
    "ou_init_stationary",
    "ou_step",
    "pullback_experiment",
    "quartic_basis",
    "radonifying_report",
    "random_stream",
    "rds_phi",
    "stokes_rates",
    "trilinear_b",
    "variant_lambda1",
    "velocity_l2",
    "__version__",
]
