//! Numerical studies: truncation-error orders, a priori properties,
//! self-convergence and benchmark runs.

mod oracle;

pub use oracle::{reference_operator_apply, Gaussian, ReferenceOperator, SmoothFunction};
mod lte;

pub use lte::{least_squares_slope, lte_study, observed_order, recipe_lte_study, LteLevel, LteReport, Recipe};
mod equicontinuity;
mod properties;

pub use equicontinuity::{equicontinuity_estimate, time_modulus, EquicontinuityEstimate};
pub use properties::{
    property_suite, random_pairs, PairOptions, PairedData, PropertyCheck, PropertyReport, MASS_TOLERANCE,
};
mod convergence;

pub use convergence::{
    heat_kernel_check, heat_solution, self_convergence_study, stefan_experiment, stefan_initial, trajectory_distance,
    ConvergenceLevel, ConvergenceReport, StefanParams, StefanRun, StepRule,
};
