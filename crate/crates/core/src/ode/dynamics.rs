//! Mean, variance and coefficient-of-variation systems.

use serde::Serialize;

use super::solver::{integrate, OdeError, OdeSolverConfig, OdeSystem, Trajectory};
use crate::params::{InitialConditions, ModelParams, RiskMode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentState {
    pub t: f64,
    pub m_f: f64,
    pub m_g: f64,
    pub v_f: f64,
    pub v_g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CvState {
    pub t: f64,
    pub c_f: f64,
    pub c_g: f64,
}

impl MomentState {
    pub fn cv(&self) -> CvState {
        CvState { t: self.t, c_f: self.v_f.max(0.0).sqrt() / self.m_f, c_g: self.v_g.max(0.0).sqrt() / self.m_g }
    }
}

fn check_positive(m_f: f64, m_g: f64) -> Result<(), OdeError> {
    if m_f > 0.0 && m_g > 0.0 {
        Ok(())
    } else {
        Err(OdeError::NonPositiveState { state: vec![m_f, m_g] })
    }
}

/// Regime of the coupled moment systems; only p in {1/2, 1} for loans has one.
pub fn regime(p: &ModelParams) -> Result<RiskMode, OdeError> {
    p.risk_mode().ok_or_else(|| {
        OdeError::Unsupported(format!(
            "no moment closure for risk_f = {:?}, risk_g = {:?}",
            p.risk_f, p.risk_g
        ))
    })
}

pub fn lv_rhs(p: &ModelParams, m_f: f64, m_g: f64) -> Result<(f64, f64), OdeError> {
    check_positive(m_f, m_g)?;
    Ok(lv(p, m_f, m_g))
}

#[inline]
fn lv(p: &ModelParams, m_f: f64, m_g: f64) -> (f64, f64) {
    let delta = p.gamma * p.mu - p.nu;
    (p.alpha * m_f - p.beta * m_f * m_g, -delta * m_g + p.gamma * m_f * m_g)
}

/// First integral of the mean dynamics.
pub fn lv_invariant(p: &ModelParams, m_f: f64, m_g: f64) -> Result<f64, OdeError> {
    check_positive(m_f, m_g)?;
    let delta = p.derived_delta();
    Ok(p.gamma * m_f - delta * m_f.ln() + p.beta * m_g - p.alpha * m_g.ln())
}

pub fn variance_rhs_p12(p: &ModelParams, s: &MomentState) -> (f64, f64) {
    (
        -2.0 * (p.beta * s.m_g + p.alpha * p.chi) * s.v_f + p.sigma_f * s.m_f * s.m_g,
        -2.0 * (p.gamma * (p.mu - s.m_f) + p.nu * p.theta) * s.v_g + p.sigma_g * s.m_f * s.m_g,
    )
}

/// The noise coefficient inside the p = 1 loans damping.
fn mixed_sigma(p: &ModelParams) -> f64 {
    if p.eqvarnew_sigma_override {
        p.sigma_g
    } else {
        p.sigma_f
    }
}

pub fn variance_rhs_mixed(p: &ModelParams, s: &MomentState) -> (f64, f64) {
    let vf = variance_rhs_p12(p, s).0;
    let shrink = 1.0 - mixed_sigma(p) / (2.0 * p.gamma);
    let vg = -2.0 * (p.gamma * (p.mu - shrink * s.m_f) + p.nu * p.theta) * s.v_g
        + p.sigma_g * s.m_f * s.m_g * s.m_g;
    (vf, vg)
}

/// Squared-CV right-hand sides, `(d c_f^2/dt, d c_g^2/dt)`.
pub fn cv2_rhs(p: &ModelParams, mode: RiskMode, m_f: f64, m_g: f64, cf2: f64, cg2: f64) -> (f64, f64) {
    let df = -2.0 * p.alpha * (p.chi + 1.0) * cf2 + p.sigma_f * m_g / m_f;
    let dg = match mode {
        RiskMode::HalfHalf => -2.0 * p.nu * (p.theta + 1.0) * cg2 + p.sigma_g * m_f / m_g,
        RiskMode::HalfOne => {
            -(2.0 * p.nu * (p.theta + 1.0) + p.sigma_g * m_f) * cg2 + p.sigma_g * m_f
        }
    };
    (df, dg)
}

fn cv_from_squared(c: f64, dc2: f64) -> Result<f64, OdeError> {
    if c > 0.0 {
        Ok(dc2 / (2.0 * c))
    } else {
        Err(OdeError::NonPositiveState { state: vec![c] })
    }
}

/// `(dc_f/dt, dc_g/dt)` for p = 1/2 in both populations. Needs c > 0.
pub fn cv_rhs_p12(p: &ModelParams, m_f: f64, m_g: f64, c_f: f64, c_g: f64) -> Result<(f64, f64), OdeError> {
    check_positive(m_f, m_g)?;
    let (a, b) = cv2_rhs(p, RiskMode::HalfHalf, m_f, m_g, c_f * c_f, c_g * c_g);
    Ok((cv_from_squared(c_f, a)?, cv_from_squared(c_g, b)?))
}

/// `(dc_f/dt, dc_g/dt)` with p = 1 for loans. Needs c > 0.
pub fn cv_rhs_mixed(p: &ModelParams, m_f: f64, m_g: f64, c_f: f64, c_g: f64) -> Result<(f64, f64), OdeError> {
    check_positive(m_f, m_g)?;
    let (a, b) = cv2_rhs(p, RiskMode::HalfOne, m_f, m_g, c_f * c_f, c_g * c_g);
    Ok((cv_from_squared(c_f, a)?, cv_from_squared(c_g, b)?))
}

/// Stationary squared CVs at frozen means.
pub fn frozen_cv2(p: &ModelParams, mode: RiskMode, m_f: f64, m_g: f64) -> (f64, f64) {
    let f = p.sigma_f * m_g / (2.0 * p.alpha * (p.chi + 1.0) * m_f);
    let g = match mode {
        RiskMode::HalfHalf => p.sigma_g * m_f / (2.0 * p.nu * (p.theta + 1.0) * m_g),
        RiskMode::HalfOne => p.sigma_g * m_f / (2.0 * p.nu * (p.theta + 1.0) + p.sigma_g * m_f),
    };
    (f, g)
}

pub struct MeanSystem<'a> {
    pub params: &'a ModelParams,
}

impl OdeSystem<2> for MeanSystem<'_> {
    fn rhs(&self, _t: f64, y: &[f64; 2]) -> [f64; 2] {
        let (a, b) = lv(self.params, y[0], y[1]);
        [a, b]
    }

    fn admissible(&self, y: &[f64; 2]) -> bool {
        y[0] > 0.0 && y[1] > 0.0
    }
}

/// State `(m_f, m_g, v_f, v_g)`.
pub struct MomentSystem<'a> {
    pub params: &'a ModelParams,
    pub mode: RiskMode,
}

impl OdeSystem<4> for MomentSystem<'_> {
    fn rhs(&self, t: f64, y: &[f64; 4]) -> [f64; 4] {
        let (a, b) = lv(self.params, y[0], y[1]);
        let s = MomentState { t, m_f: y[0], m_g: y[1], v_f: y[2], v_g: y[3] };
        let (c, d) = match self.mode {
            RiskMode::HalfHalf => variance_rhs_p12(self.params, &s),
            RiskMode::HalfOne => variance_rhs_mixed(self.params, &s),
        };
        [a, b, c, d]
    }

    fn admissible(&self, y: &[f64; 4]) -> bool {
        y[0] > 0.0 && y[1] > 0.0 && y[2] >= 0.0 && y[3] >= 0.0
    }
}

/// State `(m_f, m_g, c_f^2, c_g^2)`.
pub struct CvSystem<'a> {
    pub params: &'a ModelParams,
    pub mode: RiskMode,
}

impl OdeSystem<4> for CvSystem<'_> {
    fn rhs(&self, _t: f64, y: &[f64; 4]) -> [f64; 4] {
        let (a, b) = lv(self.params, y[0], y[1]);
        let (c, d) = cv2_rhs(self.params, self.mode, y[0], y[1], y[2], y[3]);
        [a, b, c, d]
    }

    fn admissible(&self, y: &[f64; 4]) -> bool {
        y[0] > 0.0 && y[1] > 0.0 && y[2] >= 0.0 && y[3] >= 0.0
    }
}

fn check_ic(ic: &InitialConditions) -> Result<(), OdeError> {
    ic.validate().map_err(|e| OdeError::InvalidConfig(e.to_string()))
}

pub fn integrate_means(
    p: &ModelParams,
    ic: &InitialConditions,
    cfg: &OdeSolverConfig,
) -> Result<Trajectory<2>, OdeError> {
    check_ic(ic)?;
    integrate(&MeanSystem { params: p }, [ic.m_f0, ic.m_g0], cfg)
}

/// Means and variances; the regime comes from the risk exponents of `p`.
pub fn integrate_moments(
    p: &ModelParams,
    ic: &InitialConditions,
    cfg: &OdeSolverConfig,
) -> Result<Trajectory<4>, OdeError> {
    check_ic(ic)?;
    let mode = regime(p)?;
    let (v_f, v_g) = ic.initial_variances();
    integrate(&MomentSystem { params: p, mode }, [ic.m_f0, ic.m_g0, v_f, v_g], cfg)
}

/// Means and squared CVs.
pub fn integrate_cv(
    p: &ModelParams,
    ic: &InitialConditions,
    cfg: &OdeSolverConfig,
) -> Result<Trajectory<4>, OdeError> {
    check_ic(ic)?;
    let mode = regime(p)?;
    integrate(&CvSystem { params: p, mode }, [ic.m_f0, ic.m_g0, ic.c_f0.powi(2), ic.c_g0.powi(2)], cfg)
}

/// Full moment rows (means, variances) sampled from a squared-CV trajectory.
pub fn cv_rows(traj: &Trajectory<4>, times: &[f64]) -> Result<Vec<MomentState>, OdeError> {
    times
        .iter()
        .map(|&t| {
            let y = traj.eval(t)?;
            Ok(MomentState {
                t,
                m_f: y[0],
                m_g: y[1],
                v_f: y[2].max(0.0) * y[0] * y[0],
                v_g: y[3].max(0.0) * y[1] * y[1],
            })
        })
        .collect()
}

pub fn moment_rows(traj: &Trajectory<4>, times: &[f64]) -> Result<Vec<MomentState>, OdeError> {
    times
        .iter()
        .map(|&t| {
            let y = traj.eval(t)?;
            Ok(MomentState { t, m_f: y[0], m_g: y[1], v_f: y[2], v_g: y[3] })
        })
        .collect()
}
