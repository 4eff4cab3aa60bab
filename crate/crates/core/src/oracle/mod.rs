//! Independent references and Monte Carlo harnesses used to verify the
//! estimator. Nothing here calls estimator internals except the public cost
//! and pipeline entry points under test.

mod instance;
mod montecarlo;
mod search;
pub mod suites;

pub use instance::{true_gamma, GroundTruthInstance};
pub use montecarlo::{
    monte_carlo_coverage, trial_seeds, wraparound_probability_check, CoverageConfig,
    CoverageResult, WraparoundCheck,
};
pub use search::{
    brute_force_ml, grid_search_angles, grid_search_with, BruteForceMl, GridSearchConfig,
    GridSearchResult, DEFAULT_RESOLUTION,
};
