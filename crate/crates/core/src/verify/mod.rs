//! Independent checks of the analytic solution: Monte Carlo pricing of
//! threshold strategies and ODE residual scans. Works in `f64`.

pub mod checks;
pub mod consistency;
pub mod mc;
pub mod ode;
pub mod rng;

pub use checks::{
    combined_std_err, killing_identity_check, perturbation_optimality, z_score, KillingReport,
    PerturbationReport, PerturbationRow, ThresholdKind,
};
pub use consistency::{consistency_check, ConsistencyReport};
pub use mc::{
    default_horizon, simulate_npv, simulate_post_entry, McConfig, McError, McEstimate,
    PostEntryForm, Stage, ThresholdStrategy,
};
pub use ode::{ode_residual_scan, ScanError, MIN_SCAN_POINTS};
