//! Closed-form one-dimensional densities used for initial data, quasi-equilibria
//! and as analytic inputs to the inequality measures.

use rand::Rng;
use rand_distr::{Distribution, Gamma as GammaDist, LogNormal as LogNormalDist, Normal as NormalDist};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma_lr, gamma_ur};
use std::f64::consts::SQRT_2;
use thiserror::Error;

use crate::special::ln_gamma;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShapeError {
    #[error("mean must be positive and finite, got {0}")]
    BadMean(f64),
    #[error("coefficient of variation must be nonnegative and finite, got {0}")]
    BadCv(f64),
    #[error("uniform shape needs cv <= 1/sqrt(3) to stay on [0, inf), got {0}")]
    UniformTooWide(f64),
    #[error("invalid parameters for {family}: {detail}")]
    Invalid { family: &'static str, detail: String },
}

/// Family used to build an initial density from a target (mean, CV) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityShape {
    #[default]
    Gamma,
    LogNormal,
    Uniform,
}

impl DensityShape {
    /// The member of this family with exactly the requested mean and CV.
    pub fn matched(self, mean: f64, cv: f64) -> Result<Analytic, ShapeError> {
        if !(mean.is_finite() && mean > 0.0) {
            return Err(ShapeError::BadMean(mean));
        }
        if !(cv.is_finite() && cv >= 0.0) {
            return Err(ShapeError::BadCv(cv));
        }
        if cv == 0.0 {
            return Ok(Analytic::Point { at: mean });
        }
        Ok(match self {
            DensityShape::Gamma => {
                let shape = 1.0 / (cv * cv);
                Analytic::Gamma { shape, rate: shape / mean }
            }
            DensityShape::LogNormal => {
                let s2 = cv.mul_add(cv, 1.0).ln();
                Analytic::LogNormal { mu: mean.ln() - 0.5 * s2, sigma: s2.sqrt() }
            }
            DensityShape::Uniform => {
                let half = 3f64.sqrt() * cv * mean;
                if half > mean * (1.0 + 1e-15) {
                    return Err(ShapeError::UniformTooWide(cv));
                }
                Analytic::Uniform { low: (mean - half).max(0.0), high: mean + half }
            }
        })
    }
}

/// A closed-form density on the real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Analytic {
    /// x^(shape-1) e^(-rate x), x > 0
    Gamma { shape: f64, rate: f64 },
    /// x^-(shape+1) e^(-scale/x), x > 0
    InverseGamma { shape: f64, scale: f64 },
    Normal { mean: f64, sd: f64 },
    Uniform { low: f64, high: f64 },
    LogNormal { mu: f64, sigma: f64 },
    /// Dirac mass.
    Point { at: f64 },
}

impl Analytic {
    pub fn validate(&self) -> Result<(), ShapeError> {
        let bad = |family, detail: &str| {
            Err(ShapeError::Invalid { family, detail: detail.to_string() })
        };
        match *self {
            Analytic::Gamma { shape, rate } if !(shape > 0.0 && rate > 0.0) => {
                bad("gamma", "shape and rate must be positive")
            }
            Analytic::InverseGamma { shape, scale } if !(shape > 0.0 && scale > 0.0) => {
                bad("inverse-gamma", "shape and scale must be positive")
            }
            Analytic::Normal { sd, .. } if !(sd > 0.0) => bad("normal", "sd must be positive"),
            Analytic::Uniform { low, high } if !(high > low) => bad("uniform", "need high > low"),
            Analytic::LogNormal { sigma, .. } if !(sigma > 0.0) => {
                bad("log-normal", "sigma must be positive")
            }
            _ => Ok(()),
        }
    }

    /// Mean; `None` when it does not exist (inverse Gamma with shape <= 1).
    pub fn mean(&self) -> Option<f64> {
        match *self {
            Analytic::Gamma { shape, rate } => Some(shape / rate),
            Analytic::InverseGamma { shape, scale } => (shape > 1.0).then(|| scale / (shape - 1.0)),
            Analytic::Normal { mean, .. } => Some(mean),
            Analytic::Uniform { low, high } => Some(0.5 * (low + high)),
            Analytic::LogNormal { mu, sigma } => Some((mu + 0.5 * sigma * sigma).exp()),
            Analytic::Point { at } => Some(at),
        }
    }

    /// Central second moment.
    pub fn variance(&self) -> Option<f64> {
        match *self {
            Analytic::Gamma { shape, rate } => Some(shape / (rate * rate)),
            Analytic::InverseGamma { shape, scale } => (shape > 2.0)
                .then(|| scale * scale / ((shape - 1.0).powi(2) * (shape - 2.0))),
            Analytic::Normal { sd, .. } => Some(sd * sd),
            Analytic::Uniform { low, high } => Some((high - low).powi(2) / 12.0),
            Analytic::LogNormal { mu, sigma } => {
                let s2 = sigma * sigma;
                Some(s2.exp_m1() * (2.0 * mu + s2).exp())
            }
            Analytic::Point { .. } => Some(0.0),
        }
    }

    /// E[X^2], from the raw-moment formula of each family.
    pub fn raw_second_moment(&self) -> Option<f64> {
        match *self {
            Analytic::Gamma { shape, rate } => Some(shape * (shape + 1.0) / (rate * rate)),
            Analytic::InverseGamma { shape, scale } => {
                (shape > 2.0).then(|| scale * scale / ((shape - 1.0) * (shape - 2.0)))
            }
            Analytic::Normal { mean, sd } => Some(mean * mean + sd * sd),
            Analytic::Uniform { low, high } => Some((low * low + low * high + high * high) / 3.0),
            Analytic::LogNormal { mu, sigma } => Some((2.0 * mu + 2.0 * sigma * sigma).exp()),
            Analytic::Point { at } => Some(at * at),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Analytic::Gamma { shape, rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    gamma_lr(shape, rate * x)
                }
            }
            Analytic::InverseGamma { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    gamma_ur(shape, scale / x)
                }
            }
            Analytic::Normal { mean, sd } => 0.5 * erfc(-(x - mean) / (sd * SQRT_2)),
            Analytic::Uniform { low, high } => ((x - low) / (high - low)).clamp(0.0, 1.0),
            Analytic::LogNormal { mu, sigma } => {
                if x <= 0.0 {
                    0.0
                } else {
                    0.5 * erfc(-(x.ln() - mu) / (sigma * SQRT_2))
                }
            }
            Analytic::Point { at } => {
                if x >= at {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Log density; `-inf` outside the support. Undefined for `Point`.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        match *self {
            Analytic::Gamma { shape, rate } => {
                if x <= 0.0 {
                    return if x == 0.0 && shape == 1.0 { rate.ln() } else { f64::NEG_INFINITY };
                }
                shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
            }
            Analytic::InverseGamma { shape, scale } => {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
            }
            Analytic::Normal { mean, sd } => {
                let z = (x - mean) / sd;
                -0.5 * z * z - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            }
            Analytic::Uniform { low, high } => {
                if (low..=high).contains(&x) {
                    -(high - low).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Analytic::LogNormal { mu, sigma } => {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let z = (x.ln() - mu) / sigma;
                -0.5 * z * z - (x * sigma).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            }
            Analytic::Point { .. } => f64::NAN,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    /// True when the density stays bounded as x -> 0+.
    pub fn bounded_at_origin(&self) -> bool {
        match *self {
            Analytic::Gamma { shape, .. } => shape >= 1.0,
            Analytic::Point { .. } => false,
            _ => true,
        }
    }

    /// Probability mass above `x`.
    pub fn tail_mass(&self, x: f64) -> f64 {
        match *self {
            Analytic::Gamma { shape, rate } if x > 0.0 => gamma_ur(shape, rate * x),
            Analytic::InverseGamma { shape, scale } if x > 0.0 => gamma_lr(shape, scale / x),
            _ => 1.0 - self.cdf(x),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Analytic::Gamma { shape, rate } => {
                GammaDist::new(shape, 1.0 / rate).expect("validated gamma").sample(rng)
            }
            Analytic::InverseGamma { shape, scale } => {
                1.0 / GammaDist::new(shape, 1.0 / scale).expect("validated inverse gamma").sample(rng)
            }
            Analytic::Normal { mean, sd } => {
                NormalDist::new(mean, sd).expect("validated normal").sample(rng)
            }
            Analytic::Uniform { low, high } => rng.random_range(low..high),
            Analytic::LogNormal { mu, sigma } => {
                LogNormalDist::new(mu, sigma).expect("validated log-normal").sample(rng)
            }
            Analytic::Point { at } => at,
        }
    }
}
