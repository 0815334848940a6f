"""Transport of single spin-flip excitations along a Heisenberg chain.

A moving, truncated parabolic magnetic field acts as a trap for the
excitation. The package builds the single-excitation Hamiltonian, synthesizes
trap trajectories (adiabatic ramps and finite-time shortcuts derived by
invariant-based inverse engineering), propagates wavepackets with a
norm-preserving Chebyshev integrator, checks the dynamics against the
continuum-oscillator oracle, and orchestrates the fidelity, speed-limit, and
disorder experiments with deterministic CSV output.
"""

from .chain import (
    HBAR,
    ChainSpec,
    DisorderSpec,
    MappingValidityWarning,
    TrapConfig,
    build_static_hamiltonian,
    check_mapping_validity,
    disorder_stream_seed,
    field_profile,
    magnon_sigma,
    resolve_truncation_radius,
    sample_disordered_couplings,
    static_bands,
    validate_geometry,
)
from .control import (
    AuxiliaryAnsatz,
    BoundaryCondition,
    BoundaryReport,
    ControlProtocol,
    ControlSingularityError,
    inverse_engineer,
    linear_ramp,
    make_protocol,
    polynomial_xc,
    sta_polynomial,
    time_reversed,
    verify_boundary_conditions,
)
from .experiments import (
    ConfigError,
    DisorderSettings,
    PlanSettings,
    ProtocolSettings,
    RunConfig,
    SweepSettings,
    dump_config,
    fit_speed_limit,
    load_config,
    parse_config,
    quadratic_loss_fit,
    run_disorder_ensemble,
    run_dt_map,
    run_evolution,
    run_field_dump,
    run_tf_sweep,
    save_config,
    transition_time,
)
from .oracle import ClassicalState, classical_trajectory, continuum_fidelity, ehrenfest_deviation
from .propagator import (
    ConvergenceError,
    FidelityTrace,
    NonFiniteStateError,
    NormDriftError,
    PropagationPlan,
    evolve,
    evolve_batch_final,
    evolve_fidelity,
    warm_kernel,
)
from .states import WaveState, fidelity, gaussian_packet, local_magnetization, packet_center

__version__ = "0.1.0"

__all__ = [
    "HBAR",
    "AuxiliaryAnsatz",
    "BoundaryCondition",
    "BoundaryReport",
    "ChainSpec",
    "ClassicalState",
    "ConfigError",
    "ControlProtocol",
    "ControlSingularityError",
    "ConvergenceError",
    "DisorderSettings",
    "DisorderSpec",
    "FidelityTrace",
    "MappingValidityWarning",
    "NonFiniteStateError",
    "NormDriftError",
    "PlanSettings",
    "PropagationPlan",
    "ProtocolSettings",
    "RunConfig",
    "SweepSettings",
    "TrapConfig",
    "WaveState",
    "build_static_hamiltonian",
    "check_mapping_validity",
    "classical_trajectory",
    "continuum_fidelity",
    "disorder_stream_seed",
    "dump_config",
    "ehrenfest_deviation",
    "evolve",
    "evolve_batch_final",
    "evolve_fidelity",
    "fidelity",
    "field_profile",
    "fit_speed_limit",
    "gaussian_packet",
    "inverse_engineer",
    "linear_ramp",
    "load_config",
    "local_magnetization",
    "magnon_sigma",
    "make_protocol",
    "packet_center",
    "parse_config",
    "polynomial_xc",
    "quadratic_loss_fit",
    "resolve_truncation_radius",
    "run_disorder_ensemble",
    "run_dt_map",
    "run_evolution",
    "run_field_dump",
    "run_tf_sweep",
    "sample_disordered_couplings",
    "save_config",
    "sta_polynomial",
    "static_bands",
    "time_reversed",
    "transition_time",
    "validate_geometry",
    "verify_boundary_conditions",
    "warm_kernel",
]
