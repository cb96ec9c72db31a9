//! Quasi-equilibrium densities at frozen means and the loans moment condition.

use serde::Serialize;

use super::measures::InequalityError;
use crate::density::Analytic;
use crate::ode::Trajectory;
use crate::params::{ModelParams, Risk, Species};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuasiEquilibrium {
    pub species: Species,
    pub risk: Risk,
    pub density: Analytic,
    /// Power-law exponent of the density tail (inverse-Gamma regime only).
    pub pareto_index: Option<f64>,
}

impl QuasiEquilibrium {
    pub fn cv(&self) -> Option<f64> {
        Some(self.density.variance()?.sqrt() / self.density.mean()?)
    }
}

/// The density annihilating the frozen-mean Fokker-Planck operator.
pub fn quasi_eq_density(
    p: &ModelParams,
    species: Species,
    risk: Risk,
    m_f: f64,
    m_g: f64,
) -> Result<QuasiEquilibrium, InequalityError> {
    let bad = |what: &str| InequalityError::NoClosedForm(what.to_string());
    if !(m_f > 0.0 && m_g > 0.0) {
        return Err(bad("nonpositive means"));
    }
    let (density, pareto_index) = match (species, risk) {
        (Species::Deposits, Risk::Half) => {
            if p.sigma_f == 0.0 {
                return Err(bad("deposits quasi-equilibrium with sigma_f = 0 is a point mass"));
            }
            let d = p.sigma_f * m_g;
            let shape = 2.0 * p.alpha * (p.chi + 1.0) * m_f / d;
            let rate = 2.0 * (p.beta * m_g + p.alpha * p.chi) / d;
            (Analytic::Gamma { shape, rate }, None)
        }
        (Species::Loans, Risk::Half) => {
            if p.sigma_g == 0.0 {
                return Err(bad("loans quasi-equilibrium with sigma_g = 0 is a point mass"));
            }
            let d = p.sigma_g * m_f;
            let shape = 2.0 * p.nu * (p.theta + 1.0) * m_g / d;
            let rate = 2.0 * (p.gamma * (p.mu - m_f) + p.nu * p.theta) / d;
            if rate <= 0.0 {
                return Err(bad("loans drift does not confine: gamma (mu - m_f) + nu theta <= 0"));
            }
            (Analytic::Gamma { shape, rate }, None)
        }
        (Species::Loans, Risk::One) => {
            if p.sigma_g == 0.0 {
                return Err(bad("loans quasi-equilibrium with sigma_g = 0 is a point mass"));
            }
            let s = p.sigma_g * m_f;
            let index = (2.0 * p.gamma * (p.mu - 1.0) + 2.0 * p.theta * p.nu + s) / s + 1.0;
            let scale = 2.0 * p.nu * (p.theta + 1.0) * m_g / s;
            (Analytic::InverseGamma { shape: index - 1.0, scale }, Some(index))
        }
        (Species::Deposits, Risk::One) => {
            return Err(bad("deposits with p = 1"));
        }
    };
    Ok(QuasiEquilibrium { species, risk, density, pareto_index })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentCondition {
    pub holds: bool,
    /// `2 gamma (mu - 1) + theta nu - sigma_g sup m_f`; positive when it holds.
    pub margin: f64,
    pub sup_m_f: f64,
}

pub fn second_moment_condition_at(p: &ModelParams, sup_m_f: f64) -> MomentCondition {
    let margin = 2.0 * p.gamma * (p.mu - 1.0) + p.theta * p.nu - p.sigma_g * sup_m_f;
    MomentCondition { holds: margin > 0.0, margin, sup_m_f }
}

/// Checks `sigma_g sup_t m_f(t) < 2 gamma (mu - 1) + theta nu` along a mean trajectory.
pub fn second_moment_condition<const N: usize>(p: &ModelParams, means: &Trajectory<N>) -> MomentCondition {
    let mut sup = f64::NEG_INFINITY;
    let ts = means.step_times();
    for w in ts.windows(2) {
        for k in 0..8 {
            let t = w[0] + (w[1] - w[0]) * k as f64 / 8.0;
            sup = sup.max(means.eval(t).map(|y| y[0]).unwrap_or(f64::NEG_INFINITY));
        }
    }
    if let Some(&t) = ts.last() {
        sup = sup.max(means.eval(t).map(|y| y[0]).unwrap_or(sup));
    }
    second_moment_condition_at(p, sup)
}
