"""Numerical laboratory for a coupled cubic Klein-Gordon system.

Radial finite-difference discretization of two cubic Klein-Gordon
fields coupled through a quartic interaction, together with the scalar
functionals, ground-state solvers, blow-up classifiers and time
integration used to probe finite-time blow-up against global existence.
"""

from .grid import (
    OMEGA3,
    RadialField,
    RadialGrid,
    build_grid,
    ddr,
    dirichlet_form,
    field_from_csv,
    field_to_csv,
    inner_l2,
    integrate,
    laplacian3d,
    norm_h1_sq,
    norm_l2_sq,
    schwarz_rearrange,
)
from .dynamics import (
    BlowUpDetected,
    Completed,
    SimOptions,
    SimResult,
    StepFailure,
    StepFailureError,
    levine_indicator,
    levine_met,
    levine_streak_start,
    rhs,
    sim_result_to_json,
    simulate,
    step_leapfrog,
)
from .functionals import (
    SNAPSHOT_COLUMNS,
    CouplingParams,
    FunctionalSnapshot,
    State,
    action,
    e1,
    energy,
    energy_decomposition_gap,
    energy_scale,
    evaluate_snapshot,
    g_threshold,
    gamma_identity_gap,
    kinetic_energy_sq,
    mass,
    mass_derivative,
    mass_second_derivative,
    nehari,
    projection,
    quartic_coupling,
    snapshots_from_csv,
    snapshots_to_csv,
    state_from_csv,
    state_to_csv,
)

from .groundstate import (
    GroundState,
    MinimizeOptions,
    d_candidates,
    groundstate_to_csv,
    groundstate_to_json,
    minimize_d,
    nehari_scale,
    scalar_ode_residual,
    scalar_profile,
    shoot_scalar,
)
from .data_factory import (
    BumpSpec,
    bump_data,
    cutoff_chi,
    scaled_groundstate_data,
    zero_energy_data,
)
from .classify import (
    Finding,
    Verdict,
    check_negative_energy,
    check_potential_well,
    check_projection_bound,
    classify,
    verdict_to_json,
)
from .experiment import (
    ConfigError,
    ExperimentConfig,
    ExperimentReport,
    build_config,
    build_initial_state,
    config_with,
    load_config,
    parse_config_text,
    run_experiment,
    run_sweep,
)

__version__ = "0.1.0"
