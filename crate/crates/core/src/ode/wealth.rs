//! CV of the single-population wealth model with inverse-Gamma steady state.

use serde::{Deserialize, Serialize};

use super::solver::{integrate, OdeError, OdeSolverConfig, OdeSystem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WealthParams {
    /// Steady-state mean.
    pub m: f64,
    /// Noise coefficient; the variance is finite only for sigma < 2.
    pub sigma: f64,
}

impl WealthParams {
    pub fn new(m: f64, sigma: f64) -> Result<Self, OdeError> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(OdeError::InvalidConfig(format!("wealth mean m = {m} must be positive")));
        }
        if !(0.0..2.0).contains(&sigma) {
            return Err(OdeError::InvalidConfig(format!(
                "sigma = {sigma} outside [0, 2): infinite-variance regime"
            )));
        }
        Ok(WealthParams { m, sigma })
    }

    pub fn mean_at(&self, m_h0: f64, t: f64) -> f64 {
        self.m + (m_h0 - self.m) * (-t).exp()
    }

    /// Long-time limit of the squared CV.
    pub fn limit_cv2(&self) -> f64 {
        2.0 / (2.0 - self.sigma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WealthState {
    pub t: f64,
    pub m_h: f64,
    pub c_h: f64,
}

struct WealthCv {
    w: WealthParams,
    m_h0: f64,
}

impl OdeSystem<1> for WealthCv {
    fn rhs(&self, t: f64, y: &[f64; 1]) -> [f64; 1] {
        let q = 2.0 * self.w.m / self.w.mean_at(self.m_h0, t);
        [-(q - self.w.sigma) * y[0] + q]
    }

    fn admissible(&self, y: &[f64; 1]) -> bool {
        y[0] >= 0.0
    }
}

fn same_mean(w: &WealthParams, m_h0: f64) -> bool {
    ((m_h0 - w.m) / w.m).abs() <= 1e-13
}

/// Explicit solution, valid when the mean starts at its steady value.
pub fn wealth_cv_explicit(w: &WealthParams, c_h0: f64, t: f64) -> f64 {
    let lim = w.limit_cv2();
    (lim + (c_h0 * c_h0 - lim) * (-(2.0 - w.sigma) * t).exp()).sqrt()
}

/// Numerical solution at each of `times` (sorted, nonnegative).
pub fn wealth_cv_numeric(
    w: &WealthParams,
    m_h0: f64,
    c_h0: f64,
    times: &[f64],
    tol: f64,
) -> Result<Vec<WealthState>, OdeError> {
    let t_end = times.iter().cloned().fold(0.0, f64::max);
    if t_end == 0.0 {
        return Ok(times.iter().map(|&t| WealthState { t, m_h: m_h0, c_h: c_h0 }).collect());
    }
    let traj = integrate(&WealthCv { w: *w, m_h0 }, [c_h0 * c_h0], &OdeSolverConfig::adaptive(t_end, tol))?;
    times
        .iter()
        .map(|&t| {
            let c2 = traj.eval(t)?[0];
            Ok(WealthState { t, m_h: w.mean_at(m_h0, t), c_h: c2.max(0.0).sqrt() })
        })
        .collect()
}

/// `c_h(t)`, routed to the explicit formula when `m_h0 == m` (relative 1e-13).
pub fn wealth_cv(w: &WealthParams, m_h0: f64, c_h0: f64, t: f64) -> Result<f64, OdeError> {
    if !(m_h0 > 0.0) || c_h0 < 0.0 || t < 0.0 {
        return Err(OdeError::InvalidConfig(format!("m_h0 = {m_h0}, c_h0 = {c_h0}, t = {t}")));
    }
    if t == 0.0 {
        return Ok(c_h0);
    }
    if same_mean(w, m_h0) {
        Ok(wealth_cv_explicit(w, c_h0, t))
    } else {
        Ok(wealth_cv_numeric(w, m_h0, c_h0, &[t], 1e-11)?[0].c_h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limit_value() {
        let w = WealthParams::new(1.0, 0.5).unwrap();
        assert!((w.limit_cv2().sqrt() - 1.154_700_538_379_251_5).abs() < 1e-15);
        assert!((wealth_cv(&w, 1.0, 0.3, 40.0).unwrap() - 1.154_700_538_379_251_5).abs() < 1e-12);
    }

    #[test]
    fn zero_sigma_relaxes_to_one() {
        let w = WealthParams::new(2.0, 0.0).unwrap();
        let c = wealth_cv(&w, 2.0, 3.0, 30.0).unwrap();
        assert!((c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_at_zero_and_domain() {
        let w = WealthParams::new(1.0, 0.5).unwrap();
        assert_eq!(wealth_cv(&w, 1.7, 0.4, 0.0).unwrap(), 0.4);
        assert!(WealthParams::new(1.0, 2.0).is_err());
        assert!(WealthParams::new(1.0, -0.1).is_err());
    }

    #[test]
    fn both_paths_agree() {
        let w = WealthParams::new(1.5, 0.5).unwrap();
        let times: Vec<f64> = (1..=100).map(|i| 0.15 * i as f64).collect();
        let num = wealth_cv_numeric(&w, 1.5, 0.4, &times, 1e-11).unwrap();
        for s in num {
            assert!((s.c_h - wealth_cv_explicit(&w, 0.4, s.t)).abs() < 1e-8, "t = {}", s.t);
        }
    }

    #[test]
    fn off_equilibrium_mean_still_converges() {
        let w = WealthParams::new(1.0, 0.5).unwrap();
        let c = wealth_cv(&w, 3.0, 0.2, 40.0).unwrap();
        assert!((c - w.limit_cv2().sqrt()).abs() < 1e-8);
    }
}
