//! Closed-form CV quadrature and the long-time oscillation band.

use serde::Serialize;

use super::solver::{OdeError, Trajectory};
use crate::params::{ModelParams, RiskMode};

/// Adaptive Simpson on `[a, b]` to relative tolerance `rtol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rtol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let scale = whole.abs().max(f64::MIN_POSITIVE);
    rec(f, a, b, fa, fm, fb, whole, rtol * scale, 40)
}

fn means_at<const N: usize>(traj: &Trajectory<N>, t: f64) -> (f64, f64) {
    let y = traj.eval(t).expect("caller checked coverage");
    (y[0], y[1])
}

/// `c^2(t) = c0^2 e^{-2at} + sigma * int_0^t rho(s) e^{-2a(t-s)} ds` for both populations,
/// where the first two components of `means` are `(m_f, m_g)`.
pub fn cv_closed_form_p12<const N: usize>(
    p: &ModelParams,
    means: &Trajectory<N>,
    c_f0: f64,
    c_g0: f64,
    t: f64,
) -> Result<(f64, f64), OdeError> {
    assert!(N >= 2);
    if t < 0.0 || !means.covers(0.0) || !means.covers(t) {
        return Err(OdeError::OutOfRange { t, start: means.t_start(), end: means.t_end() });
    }
    if t == 0.0 {
        return Ok((c_f0, c_g0));
    }
    let a_f = p.alpha * (p.chi + 1.0);
    let a_g = p.nu * (p.theta + 1.0);
    let mut int_f = 0.0;
    let mut int_g = 0.0;
    // integrate step by step: the dense interpolant is smooth inside each step
    for (t0, t1) in means.intervals() {
        if t0 >= t {
            break;
        }
        let t1 = t1.min(t);
        int_f += adaptive_simpson(
            &|s| {
                let (mf, mg) = means_at(means, s);
                mg / mf * (-2.0 * a_f * (t - s)).exp()
            },
            t0,
            t1,
            1e-10,
        );
        int_g += adaptive_simpson(
            &|s| {
                let (mf, mg) = means_at(means, s);
                mf / mg * (-2.0 * a_g * (t - s)).exp()
            },
            t0,
            t1,
            1e-10,
        );
    }
    let cf2 = c_f0 * c_f0 * (-2.0 * a_f * t).exp() + p.sigma_f * int_f;
    let cg2 = c_g0 * c_g0 * (-2.0 * a_g * t).exp() + p.sigma_g * int_g;
    Ok((cf2.sqrt(), cg2.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CvBand {
    pub lower_f: f64,
    pub upper_f: f64,
    pub lower_g: f64,
    pub upper_g: f64,
    /// Detected orbit period; `None` for a fixed-point orbit.
    pub period: Option<f64>,
}

impl CvBand {
    pub fn contains_f(&self, c: f64, rel: f64) -> bool {
        c >= self.lower_f * (1.0 - rel) && c <= self.upper_f * (1.0 + rel)
    }

    pub fn contains_g(&self, c: f64, rel: f64) -> bool {
        c >= self.lower_g * (1.0 - rel) && c <= self.upper_g * (1.0 + rel)
    }
}

/// Upward crossings of `m_f` through its fixed-point value.
pub fn upward_crossings<const N: usize>(p: &ModelParams, means: &Trajectory<N>) -> Vec<f64> {
    let (m_star, _) = p.fixed_point();
    let g = |t: f64| means_at(means, t).0 - m_star;
    let mut out = Vec::new();
    for (t0, t1) in means.intervals() {
        // a few probes per step in case one step spans a full swing
        let n = 4;
        let mut a = t0;
        let mut ga = g(a);
        for k in 1..=n {
            let b = if k == n { t1 } else { t0 + (t1 - t0) * k as f64 / n as f64 };
            let gb = g(b);
            if ga < 0.0 && gb >= 0.0 {
                let (mut lo, mut hi) = (a, b);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if g(mid) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-14 * hi.max(1.0) {
                        break;
                    }
                }
                let tc = 0.5 * (lo + hi);
                if out.last().map_or(true, |&last: &f64| tc - last > 1e-9) {
                    out.push(tc);
                }
            }
            a = b;
            ga = gb;
        }
    }
    out
}

/// Min and max of `f` on `[a, b]`: dense sampling then golden-section polishing.
fn extrema<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let n = 2000;
    let xs: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let (imin, _) = vals.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    let (imax, _) = vals.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let polish = |i: usize, sign: f64| {
        let lo = xs[i.saturating_sub(1)];
        let hi = xs[(i + 1).min(n)];
        let h = |x: f64| sign * f(x);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let (mut x0, mut x1) = (lo, hi);
        let mut c = x1 - phi * (x1 - x0);
        let mut d = x0 + phi * (x1 - x0);
        for _ in 0..100 {
            if h(c) < h(d) {
                x1 = d;
            } else {
                x0 = c;
            }
            c = x1 - phi * (x1 - x0);
            d = x0 + phi * (x1 - x0);
            if x1 - x0 < 1e-13 * x1.abs().max(1.0) {
                break;
            }
        }
        let best = sign * h(0.5 * (x0 + x1));
        // never worse than the sampled value
        if sign > 0.0 { best.min(vals[i]) } else { best.max(vals[i]) }
    };
    (polish(imin, 1.0), polish(imax, -1.0))
}

/// Bounds between which the CVs oscillate once the initial transient is gone.
pub fn cv_longtime_band<const N: usize>(p: &ModelParams, means: &Trajectory<N>) -> Result<CvBand, OdeError> {
    assert!(N >= 2);
    let mode = super::dynamics::regime(p)?;
    let a_f = 2.0 * p.alpha * (p.chi + 1.0);
    let a_g = 2.0 * p.nu * (p.theta + 1.0);
    let (m_star, g_star) = p.fixed_point();
    let y0 = means.initial();
    let at_fixed = ((y0[0] - m_star) / m_star).abs() < 1e-12 && ((y0[1] - g_star) / g_star).abs() < 1e-12;

    let (window, period) = if at_fixed {
        ((means.t_start(), means.t_start()), None)
    } else {
        let cross = upward_crossings(p, means);
        if cross.len() < 2 {
            return Err(OdeError::TooShort(format!(
                "{} upward crossing(s) of m_f = {m_star} in [{}, {}]",
                cross.len(),
                means.t_start(),
                means.t_end()
            )));
        }
        let (t1, t2) = (cross[cross.len() - 2], cross[cross.len() - 1]);
        ((t1, t2), Some(t2 - t1))
    };
    let ratio = |t: f64| {
        let (mf, mg) = means_at(means, t);
        mg / mf
    };
    let (r, big_r) = if period.is_none() {
        let v = y0[1] / y0[0];
        (v, v)
    } else {
        extrema(&ratio, window.0, window.1)
    };
    let lower_f = (p.sigma_f * r / a_f).sqrt();
    let upper_f = (p.sigma_f * big_r / a_f).sqrt();
    let (lower_g, upper_g) = match mode {
        RiskMode::HalfHalf => ((p.sigma_g / big_r / a_g).sqrt(), (p.sigma_g / r / a_g).sqrt()),
        RiskMode::HalfOne => {
            let (lo, hi) = if period.is_none() {
                (y0[0], y0[0])
            } else {
                extrema(&|t| means_at(means, t).0, window.0, window.1)
            };
            let q = |m: f64| (p.sigma_g * m / (a_g + p.sigma_g * m)).sqrt();
            (q(lo), q(hi))
        }
    };
    Ok(CvBand { lower_f, upper_f, lower_g, upper_g, period })
}
