//! Explicit Runge-Kutta integrators with continuous output.
//!
//! Dormand-Prince 5(4) with the standard 5th order interpolant, and classic
//! fixed-step RK4 with a cubic Hermite interpolant. Both store every accepted
//! step so a [`Trajectory`] can be evaluated anywhere in `[0, t_end]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub trait OdeSystem<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N]) -> [f64; N];

    /// Accepted iterates must satisfy this; violating steps are halved.
    fn admissible(&self, _y: &[f64; N]) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Method {
    Rk4 { dt: f64 },
    Dopri45 { rtol: f64, atol: f64 },
}

impl Default for Method {
    fn default() -> Self {
        Method::Dopri45 { rtol: 1e-9, atol: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeSolverConfig {
    #[serde(default)]
    pub method: Method,
    pub t_end: f64,
}

impl OdeSolverConfig {
    pub fn adaptive(t_end: f64, tol: f64) -> Self {
        OdeSolverConfig { method: Method::Dopri45 { rtol: tol, atol: tol }, t_end }
    }

    pub fn rk4(t_end: f64, dt: f64) -> Self {
        OdeSolverConfig { method: Method::Rk4 { dt }, t_end }
    }

    pub fn validate(&self) -> Result<(), OdeError> {
        let ok = self.t_end.is_finite()
            && self.t_end > 0.0
            && match self.method {
                Method::Rk4 { dt } => dt.is_finite() && dt > 0.0,
                Method::Dopri45 { rtol, atol } => rtol > 0.0 && atol > 0.0,
            };
        if ok {
            Ok(())
        } else {
            Err(OdeError::InvalidConfig(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("step size {h:e} underflowed at t = {t}")]
    StepUnderflow { t: f64, h: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("nonpositive state {state:?}")]
    NonPositiveState { state: Vec<f64> },
    #[error("invalid solver configuration {0}")]
    InvalidConfig(String),
    #[error("series covers [{start}, {end}] but t = {t} was requested")]
    OutOfRange { t: f64, start: f64, end: f64 },
    #[error("{0}")]
    Unsupported(String),
    #[error("orbit too short: {0}")]
    TooShort(String),
}

/// One accepted step with its interpolation coefficients.
#[derive(Debug, Clone)]
struct Segment<const N: usize> {
    t0: f64,
    h: f64,
    rc: [[f64; N]; 5],
}

impl<const N: usize> Segment<N> {
    fn eval(&self, t: f64) -> [f64; N] {
        let th = ((t - self.t0) / self.h).clamp(0.0, 1.0);
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = &self.rc;
        std::array::from_fn(|i| r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i]))))
    }

    fn end(&self) -> f64 {
        self.t0 + self.h
    }
}

/// Continuous solution over `[0, t_end]`.
#[derive(Debug, Clone)]
pub struct Trajectory<const N: usize> {
    y0: [f64; N],
    segments: Vec<Segment<N>>,
    pub rhs_evals: usize,
    pub rejected: usize,
}

impl<const N: usize> Trajectory<N> {
    pub fn t_start(&self) -> f64 {
        self.segments.first().map_or(0.0, |s| s.t0)
    }

    pub fn t_end(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.end())
    }

    pub fn n_steps(&self) -> usize {
        self.segments.len()
    }

    /// Accepted step end points, including the start.
    pub fn step_times(&self) -> Vec<f64> {
        let mut ts = vec![self.t_start()];
        ts.extend(self.segments.iter().map(|s| s.end()));
        ts
    }

    pub fn initial(&self) -> [f64; N] {
        self.y0
    }

    pub fn covers(&self, t: f64) -> bool {
        let tol = 1e-12 * self.t_end().abs().max(1.0);
        t >= self.t_start() - tol && t <= self.t_end() + tol
    }

    /// Dense output at `t`.
    pub fn eval(&self, t: f64) -> Result<[f64; N], OdeError> {
        if !self.covers(t) {
            return Err(OdeError::OutOfRange { t, start: self.t_start(), end: self.t_end() });
        }
        if self.segments.is_empty() {
            return Ok(self.y0);
        }
        let idx = self.segments.partition_point(|s| s.end() < t).min(self.segments.len() - 1);
        Ok(self.segments[idx].eval(t))
    }

    pub fn sample(&self, times: &[f64]) -> Result<Vec<[f64; N]>, OdeError> {
        times.iter().map(|&t| self.eval(t)).collect()
    }

    /// Step intervals `(t0, t1)`; the interpolant is smooth inside each one.
    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.segments.iter().map(|s| (s.t0, s.end()))
    }
}

/// `n + 1` equally spaced output times on `[0, t_end]`.
pub fn uniform_times(t_end: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| if i == n { t_end } else { t_end * i as f64 / n as f64 }).collect()
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
}

fn finite<const N: usize>(y: &[f64; N]) -> bool {
    y.iter().all(|v| v.is_finite())
}

pub fn integrate<S: OdeSystem<N>, const N: usize>(
    sys: &S,
    y0: [f64; N],
    cfg: &OdeSolverConfig,
) -> Result<Trajectory<N>, OdeError> {
    cfg.validate()?;
    if !finite(&y0) {
        return Err(OdeError::NonFinite { t: 0.0 });
    }
    if !sys.admissible(&y0) {
        return Err(OdeError::NonPositiveState { state: y0.to_vec() });
    }
    match cfg.method {
        Method::Rk4 { dt } => rk4(sys, y0, dt, cfg.t_end),
        Method::Dopri45 { rtol, atol } => dopri45(sys, y0, rtol, atol, cfg.t_end),
    }
}

fn hermite<const N: usize>(y0: &[f64; N], y1: &[f64; N], f0: &[f64; N], f1: &[f64; N], h: f64) -> [[f64; N]; 5] {
    let r2: [f64; N] = std::array::from_fn(|i| y1[i] - y0[i]);
    let r3: [f64; N] = std::array::from_fn(|i| h * f0[i] - r2[i]);
    let r4: [f64; N] = std::array::from_fn(|i| r2[i] - h * f1[i] - r3[i]);
    [*y0, r2, r3, r4, [0.0; N]]
}

fn rk4<S: OdeSystem<N>, const N: usize>(
    sys: &S,
    y0: [f64; N],
    dt: f64,
    t_end: f64,
) -> Result<Trajectory<N>, OdeError> {
    let n = (t_end / dt).ceil().max(1.0) as usize;
    let h_nom = t_end / n as f64;
    let h_min = 1e-14 * t_end;
    let mut traj = Trajectory { y0, segments: Vec::with_capacity(n), rhs_evals: 1, rejected: 0 };
    let mut y = y0;
    let mut t = 0.0;
    let mut k1 = sys.rhs(t, &y);
    for i in 1..=n {
        let target = if i == n { t_end } else { i as f64 * h_nom };
        // normally one step; split only when an iterate leaves the admissible set
        let mut h = target - t;
        while t < target {
            h = h.min(target - t);
            if h < h_min {
                return Err(OdeError::StepUnderflow { t, h });
            }
            let k2 = sys.rhs(t + 0.5 * h, &axpy(&y, 0.5 * h, &[(1.0, &k1)]));
            let k3 = sys.rhs(t + 0.5 * h, &axpy(&y, 0.5 * h, &[(1.0, &k2)]));
            let k4 = sys.rhs(t + h, &axpy(&y, h, &[(1.0, &k3)]));
            let y1 = axpy(&y, h / 6.0, &[(1.0, &k1), (2.0, &k2), (2.0, &k3), (1.0, &k4)]);
            traj.rhs_evals += 3;
            if !finite(&y1) {
                return Err(OdeError::NonFinite { t: t + h });
            }
            if !sys.admissible(&y1) {
                traj.rejected += 1;
                h *= 0.5;
                continue;
            }
            let t1 = if t + h >= target { target } else { t + h };
            let k_end = sys.rhs(t1, &y1);
            traj.rhs_evals += 1;
            traj.segments.push(Segment { t0: t, h: t1 - t, rc: hermite(&y, &y1, &k1, &k_end, t1 - t) });
            t = t1;
            y = y1;
            k1 = k_end;
            h = target - t;
        }
    }
    Ok(traj)
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// dense output
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn initial_step<S: OdeSystem<N>, const N: usize>(
    sys: &S,
    y0: &[f64; N],
    f0: &[f64; N],
    rtol: f64,
    atol: f64,
    t_end: f64,
) -> f64 {
    let sc: [f64; N] = std::array::from_fn(|i| atol + rtol * y0[i].abs());
    let rms = |v: &[f64; N]| (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / N as f64).sqrt();
    let d0 = rms(y0);
    let d1 = rms(f0);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(t_end);
    let y1 = axpy(y0, h0, &[(1.0, f0)]);
    let f1 = sys.rhs(h0, &y1);
    let df: [f64; N] = std::array::from_fn(|i| f1[i] - f0[i]);
    let d2 = rms(&df) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(t_end)
}

fn dopri45<S: OdeSystem<N>, const N: usize>(
    sys: &S,
    y0: [f64; N],
    rtol: f64,
    atol: f64,
    t_end: f64,
) -> Result<Trajectory<N>, OdeError> {
    let h_min = 1e-14 * t_end;
    let mut traj = Trajectory { y0, segments: Vec::new(), rhs_evals: 0, rejected: 0 };
    let mut t = 0.0;
    let mut y = y0;
    let mut k1 = sys.rhs(t, &y);
    let mut h = initial_step(sys, &y, &k1, rtol, atol, t_end);
    traj.rhs_evals += 2;
    while t < t_end {
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        if h < h_min && !last {
            return Err(OdeError::StepUnderflow { t, h });
        }
        let k2 = sys.rhs(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
        let k3 = sys.rhs(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = sys.rhs(t + C4 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = sys.rhs(t + C5 * h, &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = sys.rhs(
            t + h,
            &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let y1 = axpy(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        traj.rhs_evals += 5;
        let admissible = finite(&y1) && sys.admissible(&y1);
        if !admissible {
            traj.rejected += 1;
            h *= 0.5;
            if h < h_min {
                return Err(OdeError::StepUnderflow { t, h });
            }
            continue;
        }
        let k7 = sys.rhs(t + h, &y1);
        traj.rhs_evals += 1;
        let mut acc = 0.0;
        for i in 0..N {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = atol + rtol * y[i].abs().max(y1[i].abs());
            acc += (e / sc).powi(2);
        }
        let err = (acc / N as f64).sqrt();
        if !err.is_finite() {
            return Err(OdeError::NonFinite { t: t + h });
        }
        let fac = if err == 0.0 { 10.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 10.0) };
        if err <= 1.0 {
            let t1 = if last { t_end } else { t + h };
            let r2: [f64; N] = std::array::from_fn(|i| y1[i] - y[i]);
            let r3: [f64; N] = std::array::from_fn(|i| h * k1[i] - r2[i]);
            let r4: [f64; N] = std::array::from_fn(|i| r2[i] - h * k7[i] - r3[i]);
            let r5: [f64; N] = std::array::from_fn(|i| {
                h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
            });
            traj.segments.push(Segment { t0: t, h: t1 - t, rc: [y, r2, r3, r4, r5] });
            t = t1;
            y = y1;
            k1 = k7;
            h *= fac;
        } else {
            traj.rejected += 1;
            h *= fac.min(1.0);
            if h < h_min {
                return Err(OdeError::StepUnderflow { t, h });
            }
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay(f64);
    impl OdeSystem<1> for Decay {
        fn rhs(&self, _t: f64, y: &[f64; 1]) -> [f64; 1] {
            [-self.0 * y[0]]
        }
    }

    struct Oscillator;
    impl OdeSystem<2> for Oscillator {
        fn rhs(&self, _t: f64, y: &[f64; 2]) -> [f64; 2] {
            [y[1], -y[0]]
        }
    }

    struct Positive;
    impl OdeSystem<1> for Positive {
        // y' = -40 y^2: a full RK4 step of 0.1 from y = 1 overshoots below zero
        fn rhs(&self, _t: f64, y: &[f64; 1]) -> [f64; 1] {
            [-40.0 * y[0] * y[0]]
        }
        fn admissible(&self, y: &[f64; 1]) -> bool {
            y[0] > 0.0
        }
    }

    #[test]
    fn dopri_exponential_and_dense_output() {
        let traj = integrate(&Decay(1.3), [2.0], &OdeSolverConfig::adaptive(5.0, 1e-10)).unwrap();
        for i in 0..=500 {
            let t = 5.0 * i as f64 / 500.0;
            let exact = 2.0 * (-1.3 * t).exp();
            assert!((traj.eval(t).unwrap()[0] - exact).abs() < 1e-8, "t = {t}");
        }
        assert!(traj.eval(5.0 + 1e-3).is_err());
    }

    #[test]
    fn dopri_oscillator_phase() {
        let traj = integrate(&Oscillator, [1.0, 0.0], &OdeSolverConfig::adaptive(20.0, 1e-10)).unwrap();
        let y = traj.eval(20.0).unwrap();
        assert!((y[0] - 20f64.cos()).abs() < 1e-7);
        assert!((y[1] + 20f64.sin()).abs() < 1e-7);
        // interpolated midpoints are as accurate as nodes
        let ts = traj.step_times();
        for w in ts.windows(2) {
            let tm = 0.5 * (w[0] + w[1]);
            assert!((traj.eval(tm).unwrap()[0] - tm.cos()).abs() < 1e-7);
        }
    }

    #[test]
    fn rk4_fourth_order() {
        let err = |dt: f64| {
            let traj = integrate(&Oscillator, [1.0, 0.0], &OdeSolverConfig::rk4(10.0, dt)).unwrap();
            (traj.eval(10.0).unwrap()[0] - 10f64.cos()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }

    #[test]
    fn inadmissible_steps_are_halved() {
        let traj = integrate(&Positive, [1.0], &OdeSolverConfig::rk4(1.0, 0.1)).unwrap();
        assert!(traj.rejected > 0);
        let y = traj.eval(1.0).unwrap()[0];
        assert!(y > 0.0 && (y - 1.0 / 41.0).abs() < 5e-3, "{y}");
    }

    #[test]
    fn bad_config_rejected() {
        assert!(integrate(&Decay(1.0), [1.0], &OdeSolverConfig::rk4(1.0, 0.0)).is_err());
        assert!(integrate(&Decay(1.0), [1.0], &OdeSolverConfig::adaptive(-1.0, 1e-6)).is_err());
    }

    #[test]
    fn config_json_shape() {
        let cfg: OdeSolverConfig =
            serde_json::from_str(r#"{"method":{"kind":"rk4","dt":0.01},"t_end":5}"#).unwrap();
        assert_eq!(cfg, OdeSolverConfig::rk4(5.0, 0.01));
        let cfg: OdeSolverConfig = serde_json::from_str(r#"{"t_end":5}"#).unwrap();
        assert_eq!(cfg.method, Method::default());
    }
}
