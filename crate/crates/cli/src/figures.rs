//! Figure datasets and the measurable relationships their captions describe.

use kinlv_core::ode::{cv_rows, frozen_cv2, integrate_cv, uniform_times, OdeError, OdeSolverConfig};
use kinlv_core::{InitialConditions, ModelParams, RiskMode};
use serde::Serialize;

use crate::svg::{Panel, Series};

/// End of the figure runs.
pub const T_END: f64 = 50.0;
/// Start of the post-transient window.
pub const T_TRANSIENT: f64 = 20.0;
pub const SAMPLES: usize = 5000;
/// Largest accepted time-averaged relative gap between solver and quasi-equilibrium CVs.
pub const QE_GAP_MAX: f64 = 0.10;
/// |zero-lag correlation| between detrended CV and mean series must exceed this.
pub const SYNC_MIN: f64 = 0.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CvRun {
    pub mode: RiskMode,
    pub t: Vec<f64>,
    pub m_f: Vec<f64>,
    pub m_g: Vec<f64>,
    pub c_f: Vec<f64>,
    pub c_g: Vec<f64>,
}

impl CvRun {
    pub fn new(p: &ModelParams, ic: &InitialConditions, mode: RiskMode, t_end: f64, n: usize, tol: f64) -> Result<Self, OdeError> {
        let p = p.with_risk_mode(mode);
        let traj = integrate_cv(&p, ic, &OdeSolverConfig::adaptive(t_end, tol))?;
        let rows = cv_rows(&traj, &uniform_times(t_end, n))?;
        let mut run = CvRun { mode, t: vec![], m_f: vec![], m_g: vec![], c_f: vec![], c_g: vec![] };
        for r in rows {
            let c = r.cv();
            run.t.push(r.t);
            run.m_f.push(r.m_f);
            run.m_g.push(r.m_g);
            run.c_f.push(c.c_f);
            run.c_g.push(c.c_g);
        }
        Ok(run)
    }

    /// Quasi-equilibrium CVs at the instantaneous means.
    pub fn quasi_eq(&self, p: &ModelParams) -> (Vec<f64>, Vec<f64>) {
        self.m_f
            .iter()
            .zip(&self.m_g)
            .map(|(&mf, &mg)| {
                let (a, b) = frozen_cv2(p, self.mode, mf, mg);
                (a.sqrt(), b.sqrt())
            })
            .unzip()
    }
}

fn window<'a>(t: &'a [f64], y: &'a [f64], from: f64) -> impl Iterator<Item = f64> + 'a {
    t.iter().zip(y).filter(move |(t, _)| **t >= from).map(|(_, y)| *y)
}

/// `(max - min) / mean` over `t >= from`.
pub fn relative_amplitude(t: &[f64], y: &[f64], from: f64) -> f64 {
    let v: Vec<f64> = window(t, y, from).collect();
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    (hi - lo) / (v.iter().sum::<f64>() / v.len() as f64)
}

pub fn window_mean(t: &[f64], y: &[f64], from: f64) -> f64 {
    let v: Vec<f64> = window(t, y, from).collect();
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn window_extrema(t: &[f64], y: &[f64], from: f64) -> (f64, f64) {
    window(t, y, from).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)))
}

fn detrend(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len() as f64;
    let (mt, my) = (t.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = t.iter().zip(y).map(|(a, b)| (a - mt) * (b - my)).sum();
    let sxx: f64 = t.iter().map(|a| (a - mt).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    t.iter().zip(y).map(|(a, b)| b - my - slope * (a - mt)).collect()
}

/// Pearson correlation at zero lag of the linearly detrended series over `t >= from`.
pub fn zero_lag_correlation(t: &[f64], a: &[f64], b: &[f64], from: f64) -> f64 {
    let idx: Vec<usize> = (0..t.len()).filter(|&i| t[i] >= from).collect();
    let tw: Vec<f64> = idx.iter().map(|&i| t[i]).collect();
    let da = detrend(&tw, &idx.iter().map(|&i| a[i]).collect::<Vec<_>>());
    let db = detrend(&tw, &idx.iter().map(|&i| b[i]).collect::<Vec<_>>());
    let num: f64 = da.iter().zip(&db).map(|(x, y)| x * y).sum();
    let den = (da.iter().map(|x| x * x).sum::<f64>() * db.iter().map(|y| y * y).sum::<f64>()).sqrt();
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Time average of `|c - c_eq| / c_eq` over `t >= from`.
pub fn mean_relative_gap(t: &[f64], c: &[f64], c_eq: &[f64], from: f64) -> f64 {
    let gaps: Vec<f64> = (0..t.len()).filter(|&i| t[i] >= from).map(|i| ((c[i] - c_eq[i]) / c_eq[i]).abs()).collect();
    gaps.iter().sum::<f64>() / gaps.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    fn above(name: &str, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, threshold, pass: value > threshold }
    }

    fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, threshold, pass: value <= threshold }
    }
}

#[derive(Debug, Clone)]
pub struct Figure {
    pub which: u8,
    pub header: Vec<&'static str>,
    pub columns: Vec<Vec<f64>>,
    pub panels: Vec<Panel>,
    pub checks: Vec<Check>,
}

fn series(name: &str, t: &[f64], y: &[f64]) -> Series {
    Series { name: name.into(), xs: t.to_vec(), ys: y.to_vec() }
}

fn panel(title: &str, y_label: &str, series: Vec<Series>) -> Panel {
    Panel { title: title.into(), x_label: "t".into(), y_label: y_label.into(), series }
}

fn synchrony_checks(r: &CvRun) -> Vec<Check> {
    let from = T_TRANSIENT;
    vec![
        Check::above("|corr(c_f, m_f)|", zero_lag_correlation(&r.t, &r.c_f, &r.m_f, from).abs(), SYNC_MIN),
        Check::above("|corr(c_g, m_g)|", zero_lag_correlation(&r.t, &r.c_g, &r.m_g, from).abs(), SYNC_MIN),
    ]
}

fn means_and_cvs(which: u8, title: &str, r: CvRun) -> Figure {
    let checks = synchrony_checks(&r);
    let panels = vec![
        panel(&format!("{title}: means"), "mean", vec![series("m_f", &r.t, &r.m_f), series("m_g", &r.t, &r.m_g)]),
        panel(&format!("{title}: coefficients of variation"), "CV", vec![series("c_f", &r.t, &r.c_f), series("c_g", &r.t, &r.c_g)]),
    ];
    Figure {
        which,
        header: vec!["t", "m_f", "m_g", "c_f", "c_g"],
        columns: vec![r.t, r.m_f, r.m_g, r.c_f, r.c_g],
        panels,
        checks,
    }
}

/// Ratio of post-transient CV extremes between the full-noise and reduced-noise runs.
pub fn band_shrink(full: &CvRun, reduced: &CvRun) -> [f64; 4] {
    let (lf, hf) = window_extrema(&full.t, &full.c_f, T_TRANSIENT);
    let (lg, hg) = window_extrema(&full.t, &full.c_g, T_TRANSIENT);
    let (rlf, rhf) = window_extrema(&reduced.t, &reduced.c_f, T_TRANSIENT);
    let (rlg, rhg) = window_extrema(&reduced.t, &reduced.c_g, T_TRANSIENT);
    [lf / rlf, hf / rhf, lg / rlg, hg / rhg]
}

pub fn figure(which: u8, p: &ModelParams, ic: &InitialConditions, sigma_scale: f64, tol: f64) -> Result<Figure, crate::CliError> {
    let run = |p: &ModelParams, mode| CvRun::new(p, ic, mode, T_END, SAMPLES, tol);
    Ok(match which {
        1 => means_and_cvs(1, "p = 1/2 in both populations", run(p, RiskMode::HalfHalf)?),
        2 => means_and_cvs(2, "p = 1/2 deposits, p = 1 loans", run(p, RiskMode::HalfOne)?),
        3 => {
            let reduced = p.with_sigma_scale(sigma_scale)?;
            let (hh, ho) = (run(&reduced, RiskMode::HalfHalf)?, run(&reduced, RiskMode::HalfOne)?);
            let (full_hh, full_ho) = (run(p, RiskMode::HalfHalf)?, run(p, RiskMode::HalfOne)?);
            let expect = (1.0 / sigma_scale).sqrt();
            let mut checks = Vec::new();
            for (mode, full, red) in [("half-half", &full_hh, &hh), ("half-one", &full_ho, &ho)] {
                let ratios = band_shrink(full, red);
                let worst = ratios.iter().map(|r| (r / expect - 1.0).abs()).fold(0.0, f64::max);
                checks.push(Check::at_most(&format!("{mode}: max |band ratio / sqrt(1/scale) - 1|"), worst, 0.05));
            }
            let panels = vec![
                panel("reduced noise, p = 1/2 both", "CV", vec![series("c_f", &hh.t, &hh.c_f), series("c_g", &hh.t, &hh.c_g)]),
                panel("reduced noise, p = 1 loans", "CV", vec![series("c_f", &ho.t, &ho.c_f), series("c_g", &ho.t, &ho.c_g)]),
            ];
            Figure {
                which,
                header: vec!["t", "m_f", "m_g", "c_f_half_half", "c_g_half_half", "c_f_half_one", "c_g_half_one"],
                columns: vec![hh.t.clone(), hh.m_f.clone(), hh.m_g.clone(), hh.c_f, hh.c_g, ho.c_f, ho.c_g],
                panels,
                checks,
            }
        }
        4 => {
            let hh = run(p, RiskMode::HalfHalf)?;
            let ho = run(p, RiskMode::HalfOne)?;
            let (ef, eg) = hh.quasi_eq(p);
            let (_, eg_ho) = ho.quasi_eq(&p.with_risk_mode(RiskMode::HalfOne));
            let checks = vec![
                Check::at_most("half-half c_f quasi-equilibrium gap", mean_relative_gap(&hh.t, &hh.c_f, &ef, T_TRANSIENT), QE_GAP_MAX),
                Check::at_most("half-half c_g quasi-equilibrium gap", mean_relative_gap(&hh.t, &hh.c_g, &eg, T_TRANSIENT), QE_GAP_MAX),
            ];
            let panels = vec![
                panel("deposits CV vs quasi-equilibrium", "CV", vec![series("c_f", &hh.t, &hh.c_f), series("c_f eq", &hh.t, &ef)]),
                panel("loans CV vs quasi-equilibrium", "CV", vec![
                    series("c_g (1/2)", &hh.t, &hh.c_g),
                    series("c_g eq (1/2)", &hh.t, &eg),
                    series("c_g (1)", &ho.t, &ho.c_g),
                    series("c_g eq (1)", &ho.t, &eg_ho),
                ]),
            ];
            Figure {
                which,
                header: vec!["t", "c_f", "c_g", "c_f_eq", "c_g_eq", "c_g_half_one", "c_g_eq_half_one"],
                columns: vec![hh.t.clone(), hh.c_f, hh.c_g, ef, eg, ho.c_g, eg_ho],
                panels,
                checks,
            }
        }
        _ => return Err(crate::CliError::Validation(format!("--which {which}: expected 1, 2, 3 or 4"))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn correlation_of_shifted_sines() {
        let t: Vec<f64> = (0..2000).map(|i| i as f64 * 0.01).collect();
        let a: Vec<f64> = t.iter().map(|x| x.sin() + 0.1 * x).collect();
        let b: Vec<f64> = t.iter().map(|x| 3.0 * x.sin() - 2.0).collect();
        let c: Vec<f64> = t.iter().map(|x| x.cos()).collect();
        assert!(zero_lag_correlation(&t, &a, &b, 0.0) > 0.99);
        assert!(zero_lag_correlation(&t, &a, &c, 0.0).abs() < 0.1);
    }

    #[test]
    fn amplitude_and_gap() {
        let t = [0.0, 1.0, 2.0, 3.0];
        assert!((relative_amplitude(&t, &[9.0, 1.0, 3.0, 2.0], 1.0) - 1.0).abs() < 1e-15);
        assert!((mean_relative_gap(&t, &[1.0, 1.1, 0.9, 1.0], &[1.0; 4], 1.0) - 0.2 / 3.0).abs() < 1e-15);
    }
}
