mod config;
mod props;
mod scenario;

pub use config::{Checks, Expected, FdSpec, GeneratorSpec, Numerics, Probe, Scenario};
pub use props::{polygon_hausdorff, run_property_suite, suite_text, Fault};
pub use props::{
    prop_argmax_determinism, prop_bsde_comparison, prop_bsde_contraction_stability, prop_bsde_heat,
    prop_bsde_stopped, prop_common_random_numbers, prop_ellipticity, prop_fd_consistency,
    prop_fd_monotonicity, prop_fd_structure, prop_growth_transform, prop_hausdorff,
    prop_markovian_vs_constants, prop_moments, prop_psd_sqrt_lipschitz, prop_reproducible,
    prop_sublinearity, prop_value_search,
};
pub use scenario::{
    evaluate_scenario, exit_code_for, fd_setup, regularity_pairs, run_scenario, ProbeResult, PropLine, ScenarioReport, FD_TOL, MC_FLOOR,
    ORACLE_REL_TOL,
};
