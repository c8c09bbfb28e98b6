"""Numerical laboratory for an explicit norm-inflation construction for the
3D Boussinesq system: exact trigonometric field algebra, closed-form first
Picard iterates, a dealiased pseudo-spectral integrator, and bound
verification sweeps."""

from .fields import (
    BesovEstimate,
    LinfEstimate,
    Mode,
    TGridSpec,
    TrigField,
    advect,
    besov_norm,
    divergence,
    gradient,
    heat,
    leray_project,
    linf_norm,
    linf_norm_multi,
)
from .lacunary import (
    ETA,
    ConstructionReport,
    LacunaryParams,
    WaveTriple,
    make_frequencies,
    make_initial_data,
    params_from_rule,
    verify_construction,
)
from .picard import (
    DuhamelKernel,
    PicardState,
    b1_parts,
    bilinear,
    data_norm_bounds,
    duhamel_integral,
    first_iterates,
    remainder_bound_M,
    remainder_bound_z,
    rho10_amplitude,
    rho10_coefficient,
    rho11_sup_bound,
    rho12_sup_bound,
    rho1_parts,
    theta_sup_bound,
)

from .spectral import (
    GridField,
    ResidualReport,
    ResolutionCheck,
    SimConfig,
    SimTrajectory,
    SimulationError,
    load_snapshot,
    residual_decompose,
    save_snapshot,
    simulate,
    to_grid,
    validate_resolution,
)
from .verify import (
    BoundReport,
    InflationRow,
    SweepResult,
    WitnessReport,
    bilinear_probe,
    certified_lower_bound,
    check_data_norms,
    check_lacunary_sums,
    check_rho1_bounds,
    gradient_probe,
    inflation_experiment,
    operator_norm_probes,
    resonant_besov_factor,
    rule_exponents,
    theorem_witness,
    theta_besov_bound,
)

__version__ = "0.1.0"

__all__ = [
    "BesovEstimate",
    "BoundReport",
    "ConstructionReport",
    "DuhamelKernel",
    "ETA",
    "GridField",
    "InflationRow",
    "LacunaryParams",
    "LinfEstimate",
    "Mode",
    "PicardState",
    "ResidualReport",
    "ResolutionCheck",
    "SimConfig",
    "SimTrajectory",
    "SimulationError",
    "SweepResult",
    "TGridSpec",
    "TrigField",
    "WaveTriple",
    "WitnessReport",
    "advect",
    "b1_parts",
    "besov_norm",
    "bilinear",
    "bilinear_probe",
    "certified_lower_bound",
    "check_data_norms",
    "check_lacunary_sums",
    "check_rho1_bounds",
    "data_norm_bounds",
    "divergence",
    "duhamel_integral",
    "first_iterates",
    "gradient",
    "gradient_probe",
    "heat",
    "inflation_experiment",
    "leray_project",
    "linf_norm",
    "linf_norm_multi",
    "load_snapshot",
    "make_frequencies",
    "make_initial_data",
    "operator_norm_probes",
    "params_from_rule",
    "remainder_bound_M",
    "remainder_bound_z",
    "residual_decompose",
    "resonant_besov_factor",
    "rho10_amplitude",
    "rho10_coefficient",
    "rho11_sup_bound",
    "rho12_sup_bound",
    "rho1_parts",
    "rule_exponents",
    "save_snapshot",
    "simulate",
    "theorem_witness",
    "theta_besov_bound",
    "theta_sup_bound",
    "to_grid",
    "validate_resolution",
    "verify_construction",
]
