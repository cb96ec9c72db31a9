//! Inequality measures and quasi-equilibrium analytics.

pub mod measures;
pub mod quasi_eq;

pub use measures::{
    bootstrap_gini_se, cv_of, gautschi_bounds, gini2_of, gini_of, mean_of, report, Distribution,
    InequalityError, InequalityReport, Source,
};
pub use quasi_eq::{quasi_eq_density, second_moment_condition, second_moment_condition_at, MomentCondition, QuasiEquilibrium};
