//! Deterministic moment dynamics.

pub mod cv;
pub mod dynamics;
pub mod solver;
pub mod wealth;

pub use cv::{adaptive_simpson, cv_closed_form_p12, cv_longtime_band, CvBand};
pub use dynamics::{
    cv2_rhs, cv_rhs_mixed, cv_rhs_p12, cv_rows, frozen_cv2, integrate_cv, integrate_means, integrate_moments,
    lv_invariant, lv_rhs, moment_rows, regime, variance_rhs_mixed, variance_rhs_p12, CvState, MomentState,
};
pub use solver::{integrate, uniform_times, Method, OdeError, OdeSolverConfig, OdeSystem, Trajectory};
pub use wealth::{wealth_cv, wealth_cv_explicit, wealth_cv_numeric, WealthParams, WealthState};
