//! Finite-volume Fokker-Planck solver.

pub mod scheme;
pub mod solver;

pub use scheme::{bernoulli, Coefficients, LambdaRule};
pub use solver::{
    coefficients, default_x_max, fp_coefficients_p12, fp_coefficients_p1_loans, initial_state, nodal_reference,
    run_fp, step_fp, steady_state, wealth_coefficients, FpError, FpMoments, FpOptions, FpRun, FpSnapshot, FpState,
};
