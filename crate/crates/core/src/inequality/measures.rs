//! CV, Gini and squared Gini on analytic, gridded and sampled distributions.
//!
//! Grids are read as point masses `f_i dx` at the cell centres and samples as
//! the empirical measure (weights 1/n), so every measure here is the exact
//! value for one discrete probability measure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

use crate::density::Analytic;
use crate::grid::GridDensity;
use crate::special::gamma_ratio;
use crate::stats::{neumaier, Neumaier};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InequalityError {
    #[error("distribution has zero mean")]
    ZeroMean,
    #[error("empty input")]
    EmptyInput,
    #[error("moment does not exist for {0}")]
    MomentUndefined(String),
    #[error("no closed form for {0}")]
    NoClosedForm(String),
    #[error("shape a = {0} must exceed 2")]
    ShapeTooSmall(f64),
}

#[derive(Debug, Clone, Copy)]
pub enum Distribution<'a> {
    Analytic(Analytic),
    Grid(&'a GridDensity),
    Sample(&'a [f64]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Analytic,
    Grid,
    Sample,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Analytic => "analytic",
            Source::Grid => "grid",
            Source::Sample => "sample",
        }
    }
}

impl Distribution<'_> {
    pub fn source(&self) -> Source {
        match self {
            Distribution::Analytic(_) => Source::Analytic,
            Distribution::Grid(_) => Source::Grid,
            Distribution::Sample(_) => Source::Sample,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityReport {
    pub t: f64,
    pub cv: f64,
    pub gini: f64,
    pub gini2: f64,
    pub source: Source,
    /// Bootstrap standard error of the Gini index (samples only).
    pub se: Option<f64>,
}

/// Weights and nodes of a grid as a discrete measure.
fn grid_masses(g: &GridDensity) -> Vec<(f64, f64)> {
    let dx = g.mesh.dx();
    g.values.iter().enumerate().map(|(i, v)| (g.mesh.center(i), v * dx)).collect()
}

fn sample_mean(xs: &[f64]) -> Result<f64, InequalityError> {
    if xs.is_empty() {
        return Err(InequalityError::EmptyInput);
    }
    Ok(neumaier(xs.iter().copied()) / xs.len() as f64)
}

fn nonzero(m: f64) -> Result<f64, InequalityError> {
    if m == 0.0 || !m.is_finite() {
        Err(InequalityError::ZeroMean)
    } else {
        Ok(m)
    }
}

pub fn mean_of(dist: &Distribution) -> Result<f64, InequalityError> {
    match dist {
        Distribution::Analytic(a) => a.mean().ok_or_else(|| InequalityError::MomentUndefined(format!("{a:?}"))),
        Distribution::Grid(g) => {
            if g.values.is_empty() || g.mass() == 0.0 {
                return Err(InequalityError::EmptyInput);
            }
            Ok(g.mean())
        }
        Distribution::Sample(xs) => sample_mean(xs),
    }
}

/// Standard deviation over absolute mean.
pub fn cv_of(dist: &Distribution) -> Result<f64, InequalityError> {
    let m = nonzero(mean_of(dist)?)?;
    let var = match dist {
        Distribution::Analytic(a) => {
            a.variance().ok_or_else(|| InequalityError::MomentUndefined(format!("{a:?}")))?
        }
        Distribution::Grid(g) => g.variance(),
        Distribution::Sample(xs) => neumaier(xs.iter().map(|x| (x - m) * (x - m))) / xs.len() as f64,
    };
    Ok(var.max(0.0).sqrt() / m.abs())
}

/// Gini index `E|X - Y| / (2 |mean|)`.
pub fn gini_of(dist: &Distribution) -> Result<f64, InequalityError> {
    let m = nonzero(mean_of(dist)?)?;
    match dist {
        Distribution::Analytic(a) => analytic_gini(a),
        Distribution::Sample(xs) => {
            let mut s = xs.to_vec();
            s.sort_by(f64::total_cmp);
            Ok(sorted_sample_gini(&s, m))
        }
        Distribution::Grid(g) => {
            // 1 - (1/m) int (1 - F)^2 dx, exact for the lumped measure when F is a step function
            let masses = grid_masses(g);
            let total = neumaier(masses.iter().map(|&(_, w)| w));
            let dx = g.mesh.dx();
            let mut acc = Neumaier::default();
            acc.add(masses[0].0);
            let mut cum = Neumaier::default();
            for &(_, w) in &masses[..masses.len() - 1] {
                cum.add(w);
                let tail = 1.0 - cum.value() / total;
                acc.add(tail * tail * dx);
            }
            Ok(1.0 - acc.value() / m)
        }
    }
}

fn sorted_sample_gini(sorted: &[f64], mean: f64) -> f64 {
    let n = sorted.len() as f64;
    let s = neumaier(sorted.iter().enumerate().map(|(k, x)| (2.0 * k as f64 + 1.0 - n) * x));
    s / (n * n * mean)
}

fn analytic_gini(a: &Analytic) -> Result<f64, InequalityError> {
    Ok(match *a {
        Analytic::Gamma { shape, .. } => gamma_ratio(shape + 0.5, shape + 1.0) / PI.sqrt(),
        Analytic::InverseGamma { shape, .. } => {
            if shape <= 1.0 {
                return Err(InequalityError::MomentUndefined(format!("{a:?}")));
            }
            gamma_ratio(shape - 0.5, shape) / PI.sqrt()
        }
        Analytic::Normal { mean, sd } => sd / (PI.sqrt() * mean.abs()),
        Analytic::Uniform { low, high } => (high - low) / (3.0 * (high + low)),
        Analytic::LogNormal { sigma, .. } => statrs::function::erf::erf(0.5 * sigma),
        Analytic::Point { .. } => 0.0,
    })
}

/// Squared Gini `sqrt(E|X - Y|^2 / 2) / |mean|`, computed without `cv_of`.
pub fn gini2_of(dist: &Distribution) -> Result<f64, InequalityError> {
    let m = nonzero(mean_of(dist)?)?;
    let half_msd = match dist {
        Distribution::Analytic(a) => {
            let raw2 = a
                .raw_second_moment()
                .ok_or_else(|| InequalityError::MomentUndefined(format!("{a:?}")))?;
            raw2 - m * m
        }
        Distribution::Grid(g) => {
            // direct double sum over pairs of cells
            let masses = grid_masses(g);
            let total = neumaier(masses.iter().map(|&(_, w)| w));
            let mut acc = Neumaier::default();
            for (i, &(xi, wi)) in masses.iter().enumerate() {
                if wi == 0.0 {
                    continue;
                }
                let mut row = Neumaier::default();
                for &(xj, wj) in &masses[..i] {
                    row.add(wj * (xi - xj) * (xi - xj));
                }
                acc.add(wi * row.value());
            }
            // pairs i > j counted once; the full double sum is twice that
            acc.value() / (total * total)
        }
        Distribution::Sample(xs) => {
            // shifted power sums: E(x-c)^2 - (E(x-c))^2
            let c = xs[0];
            let n = xs.len() as f64;
            let s1 = neumaier(xs.iter().map(|x| x - c)) / n;
            let s2 = neumaier(xs.iter().map(|x| (x - c) * (x - c))) / n;
            s2 - s1 * s1
        }
    };
    Ok(half_msd.max(0.0).sqrt() / m.abs())
}

/// Bracket of the inverse-Gamma Gini index of shape `a` in terms of its CV.
pub fn gautschi_bounds(a: f64, cv: f64) -> Result<(f64, f64), InequalityError> {
    if !(a > 2.0) {
        return Err(InequalityError::ShapeTooSmall(a));
    }
    let s = PI.sqrt();
    Ok((cv * ((a - 2.0) / a).sqrt() / s, cv * ((a - 1.0) / a).sqrt() / s))
}

/// Bootstrap standard error of the sample Gini (multinomial resampling).
pub fn bootstrap_gini_se(xs: &[f64], resamples: usize, seed: u64) -> Result<f64, InequalityError> {
    if xs.len() < 2 {
        return Err(InequalityError::EmptyInput);
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let ginis: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let mut counts = vec![0u32; n];
            for _ in 0..n {
                counts[rng.random_range(0..n)] += 1;
            }
            // weighted version of the sorted formula
            let nf = n as f64;
            let mut before = 0.0;
            let mut num = Neumaier::default();
            let mut tot = Neumaier::default();
            for (x, &c) in sorted.iter().zip(&counts) {
                if c == 0 {
                    continue;
                }
                let c = c as f64;
                num.add(c * x * (2.0 * before + c - nf));
                tot.add(c * x);
                before += c;
            }
            let mean = tot.value() / nf;
            num.value() / (nf * nf * mean)
        })
        .collect();
    let mean = ginis.iter().sum::<f64>() / resamples as f64;
    let var = ginis.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (resamples as f64 - 1.0);
    Ok(var.sqrt())
}

/// All three measures at once; samples also get a 200-resample bootstrap SE.
pub fn report(dist: &Distribution, t: f64, seed: u64) -> Result<InequalityReport, InequalityError> {
    let se = match dist {
        Distribution::Sample(xs) => Some(bootstrap_gini_se(xs, 200, seed)?),
        _ => None,
    };
    Ok(InequalityReport {
        t,
        cv: cv_of(dist)?,
        gini: gini_of(dist)?,
        gini2: gini2_of(dist)?,
        source: dist.source(),
        se,
    })
}

/// Brute-force `sum_ij |x_i - x_j| / (2 n^2 mean)`; test oracle only.
pub fn gini_double_sum(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let mut s = 0.0;
    for a in xs {
        for b in xs {
            s += (a - b).abs();
        }
    }
    s / (2.0 * n * n * m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Mesh1D;
    use proptest::prelude::*;

    #[test]
    fn equal_sample_has_no_inequality() {
        let xs = vec![3.5; 50];
        let d = Distribution::Sample(&xs);
        assert_eq!(cv_of(&d).unwrap(), 0.0);
        assert_eq!(gini_of(&d).unwrap(), 0.0);
        assert_eq!(gini2_of(&d).unwrap(), 0.0);
    }

    #[test]
    fn two_point_sample() {
        let xs = [0.0, 2.0];
        let d = Distribution::Sample(&xs);
        assert_eq!(gini2_of(&d).unwrap(), 1.0);
        assert_eq!(cv_of(&d).unwrap(), 1.0);
        assert_eq!(gini_of(&d).unwrap(), 0.5);
    }

    #[test]
    fn analytic_values() {
        let g = Distribution::Analytic(Analytic::Gamma { shape: 4.0, rate: 0.3 });
        assert!((cv_of(&g).unwrap() - 0.5).abs() < 1e-15);
        assert!((gini2_of(&g).unwrap() - 0.5).abs() < 1e-14);
        let ig = Distribution::Analytic(Analytic::InverseGamma { shape: 3.0, scale: 2.0 });
        assert!((cv_of(&ig).unwrap() - 1.0).abs() < 1e-15);
        assert!((gini_of(&ig).unwrap() - 0.375).abs() < 1e-13);
        let u = Distribution::Analytic(Analytic::Uniform { low: 0.0, high: 1.0 });
        assert!((gini_of(&u).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        // exponential: shape 1 gives 1/2
        let e = Distribution::Analytic(Analytic::Gamma { shape: 1.0, rate: 2.0 });
        assert!((gini_of(&e).unwrap() - 0.5).abs() < 1e-13);
        let zero = Distribution::Analytic(Analytic::Normal { mean: 0.0, sd: 1.0 });
        assert_eq!(cv_of(&zero), Err(InequalityError::ZeroMean));
        assert_eq!(gini_of(&Distribution::Sample(&[])), Err(InequalityError::EmptyInput));
    }

    #[test]
    fn gautschi_examples() {
        let (lo, hi) = gautschi_bounds(3.0, 1.0).unwrap();
        assert!((lo - 0.3257).abs() < 1e-4 && (hi - 0.4607).abs() < 1e-4);
        assert!(lo < 0.375 && 0.375 < hi);
        let (lo, hi) = gautschi_bounds(1e9, 0.2).unwrap();
        assert!((hi - lo) < 1e-9 && (hi - 0.2 / PI.sqrt()).abs() < 1e-9);
        let (lo, _) = gautschi_bounds(2.0 + 1e-9, 1.0).unwrap();
        assert!(lo < 1e-4);
        assert!(gautschi_bounds(2.0, 1.0).is_err());
    }

    #[test]
    fn gautschi_brackets_closed_form() {
        for a in [2.5, 3.0, 5.0, 10.0, 50.0] {
            let d = Analytic::InverseGamma { shape: a, scale: 1.3 };
            let g = gini_of(&Distribution::Analytic(d)).unwrap();
            let cv = cv_of(&Distribution::Analytic(d)).unwrap();
            let (lo, hi) = gautschi_bounds(a, cv).unwrap();
            assert!(lo < g && g < hi, "a = {a}: {lo} < {g} < {hi}");
        }
    }

    #[test]
    fn grid_gini_matches_double_sum() {
        let mesh = Mesh1D::new(64, 5.0).unwrap();
        let vals: Vec<f64> = (0..64).map(|i| ((i as f64 * 0.37).sin() + 1.1).powi(2)).collect();
        let g = GridDensity::new(mesh, vals.clone(), 0.0).unwrap();
        let fast = gini_of(&Distribution::Grid(&g)).unwrap();
        let dx = mesh.dx();
        let w: Vec<f64> = vals.iter().map(|v| v * dx).collect();
        let tot: f64 = w.iter().sum();
        let mut s = 0.0;
        let mut m = 0.0;
        for i in 0..64 {
            m += w[i] * mesh.center(i) / tot;
            for j in 0..64 {
                s += w[i] * w[j] * (mesh.center(i) - mesh.center(j)).abs() / (tot * tot);
            }
        }
        assert!((fast - s / (2.0 * m)).abs() < 1e-13);
    }

    #[test]
    fn sample_gini_matches_double_sum() {
        let xs: Vec<f64> = (0..300).map(|i| ((i * 7919) % 1013) as f64 / 101.3 + 0.01).collect();
        let fast = gini_of(&Distribution::Sample(&xs)).unwrap();
        assert!((fast - gini_double_sum(&xs)).abs() < 1e-13);
    }

    #[test]
    fn bootstrap_se_is_reproducible_and_sane() {
        let xs: Vec<f64> = (0..2000).map(|i| (i as f64 + 0.5) / 2000.0).collect();
        let a = bootstrap_gini_se(&xs, 200, 7).unwrap();
        let b = bootstrap_gini_se(&xs, 200, 7).unwrap();
        assert_eq!(a, b);
        // uniform: sd of the Gini estimator is about 0.24 / sqrt(n)
        assert!(a > 0.002 && a < 0.01, "{a}");
    }

    fn grid_strategy() -> impl Strategy<Value = GridDensity> {
        (16usize..200, 0.5..50.0f64, prop::collection::vec(0.0..10.0f64, 200)).prop_filter_map(
            "nonzero mass",
            |(n, x_max, raw)| {
                let vals = raw[..n].to_vec();
                (vals.iter().sum::<f64>() > 0.0)
                    .then(|| GridDensity::new(Mesh1D::new(n, x_max).unwrap(), vals, 0.0).unwrap())
            },
        )
    }

    proptest! {
        #[test]
        fn gini2_equals_cv_and_gini_in_unit_interval(g in grid_strategy(),
                                                      xs in prop::collection::vec(0.0..100.0f64, 2..400)) {
            let dg = Distribution::Grid(&g);
            prop_assert!((gini2_of(&dg).unwrap() - cv_of(&dg).unwrap()).abs() <= 1e-12);
            let gg = gini_of(&dg).unwrap();
            prop_assert!((-1e-12..=1.0).contains(&gg));
            let scaled = GridDensity::new(Mesh1D::new(g.mesh.n_cells, 3.7 * g.mesh.x_max).unwrap(),
                                          g.values.iter().map(|v| v / 3.7).collect(), 0.0).unwrap();
            let ds = Distribution::Grid(&scaled);
            prop_assert!((gini_of(&ds).unwrap() - gg).abs() < 1e-12);
            prop_assert!((cv_of(&ds).unwrap() - cv_of(&dg).unwrap()).abs() < 1e-12);
            if xs.iter().any(|&x| x > 0.0) {
                let ds = Distribution::Sample(&xs);
                prop_assert!((gini2_of(&ds).unwrap() - cv_of(&ds).unwrap()).abs() <= 1e-12);
                let gs = gini_of(&ds).unwrap();
                prop_assert!((0.0..=1.0).contains(&gs));
            }
        }

        #[test]
        fn measures_are_scale_invariant(xs in prop::collection::vec(0.01..100.0f64, 2..200), lam in 0.01..100.0f64) {
            let ys: Vec<f64> = xs.iter().map(|x| x * lam).collect();
            let (a, b) = (Distribution::Sample(&xs), Distribution::Sample(&ys));
            prop_assert!((cv_of(&a).unwrap() - cv_of(&b).unwrap()).abs() < 1e-12);
            prop_assert!((gini_of(&a).unwrap() - gini_of(&b).unwrap()).abs() < 1e-12);
            prop_assert!((gini2_of(&a).unwrap() - gini2_of(&b).unwrap()).abs() < 1e-12);
            let ga = Analytic::Gamma { shape: xs[0], rate: xs[1] };
            let gb = Analytic::Gamma { shape: xs[0], rate: xs[1] / lam };
            prop_assert!((gini_of(&Distribution::Analytic(ga)).unwrap()
                          - gini_of(&Distribution::Analytic(gb)).unwrap()).abs() < 1e-12);
        }
    }
}
