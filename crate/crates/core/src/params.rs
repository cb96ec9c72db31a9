//! Model parameters, initial conditions and their validation.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::Deref;
use thiserror::Error;

use crate::density::DensityShape;

/// Risk exponent p of the random part of an interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Risk {
    /// p = 1/2
    #[default]
    Half,
    /// p = 1
    One,
}

impl Risk {
    pub fn exponent(self) -> f64 {
        match self {
            Risk::Half => 0.5,
            Risk::One => 1.0,
        }
    }
}

/// Which of the two populations a quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Species {
    Deposits,
    Loans,
}

/// Risk configuration of the coupled moment systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RiskMode {
    /// p = 1/2 for both populations.
    HalfHalf,
    /// p = 1/2 for deposits, p = 1 for loans.
    HalfOne,
}

impl RiskMode {
    pub fn loans_risk(self) -> Risk {
        match self {
            RiskMode::HalfHalf => Risk::Half,
            RiskMode::HalfOne => Risk::One,
        }
    }
}

impl fmt::Display for RiskMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RiskMode::HalfHalf => "half-half",
            RiskMode::HalfOne => "half-one",
        })
    }
}

impl std::str::FromStr for RiskMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "half-half" => Ok(RiskMode::HalfHalf),
            "half-one" => Ok(RiskMode::HalfOne),
            other => Err(format!("unknown risk mode '{other}' (expected half-half or half-one)")),
        }
    }
}

/// Unvalidated parameter record, as read from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsRecord {
    /// Deposits growth rate.
    pub alpha: f64,
    /// Deposits predation rate.
    pub beta: f64,
    /// Loans growth rate.
    pub gamma: f64,
    /// Loans lowest-size parameter.
    pub mu: f64,
    /// Loans take-up rate.
    pub nu: f64,
    /// Deposits redistribution coefficient.
    pub chi: f64,
    /// Loans redistribution coefficient.
    pub theta: f64,
    pub sigma_f: f64,
    pub sigma_g: f64,
    #[serde(default)]
    pub risk_f: Risk,
    #[serde(default)]
    pub risk_g: Risk,
    /// Positivity threshold in the interaction indicator.
    #[serde(default)]
    pub s0: f64,
    /// Use sigma_g instead of sigma_f inside the p = 1 loans variance damping.
    #[serde(default)]
    pub eqvarnew_sigma_override: bool,
}

impl ParamsRecord {
    /// The reference parameter set (deposit-loan experiments).
    pub fn table1() -> Self {
        ParamsRecord {
            alpha: 1.0,
            beta: 0.5,
            gamma: 0.15,
            mu: 10.0,
            nu: 1.0,
            chi: 0.8,
            theta: 0.4,
            sigma_f: 1e-3,
            sigma_g: 1e-3,
            risk_f: Risk::Half,
            risk_g: Risk::Half,
            s0: 0.0,
            eqvarnew_sigma_override: false,
        }
    }

    fn numeric_fields(&self) -> [(&'static str, f64); 10] {
        [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("mu", self.mu),
            ("nu", self.nu),
            ("chi", self.chi),
            ("theta", self.theta),
            ("sigma_f", self.sigma_f),
            ("sigma_g", self.sigma_g),
            ("s0", self.s0),
        ]
    }
}

impl Default for ParamsRecord {
    fn default() -> Self {
        Self::table1()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("{field} is not finite")]
    NonFinite { field: &'static str },
    #[error("loans shutdown rate gamma*mu - nu = {delta} must be positive")]
    NonPositiveDelta { delta: f64 },
    #[error("redistribution too strong: {field} = {product} must be < 1")]
    RedistributionTooStrong { field: &'static str, product: f64 },
    #[error("{field} = {value} violates {constraint}")]
    OutOfRange { field: &'static str, value: f64, constraint: &'static str },
}

impl ParamError {
    /// Fields involved in the violated constraint.
    pub fn fields(&self) -> Vec<&'static str> {
        match self {
            ParamError::NonFinite { field } | ParamError::OutOfRange { field, .. } => vec![*field],
            ParamError::NonPositiveDelta { .. } => vec!["gamma", "mu", "nu"],
            ParamError::RedistributionTooStrong { field, .. } => match *field {
                "alpha*chi" => vec!["alpha", "chi"],
                _ => vec!["nu", "theta"],
            },
        }
    }
}

/// Every hard-constraint violation found in one record.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ValidationErrors(pub Vec<ParamError>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msgs: Vec<String> = self.0.iter().map(|e| e.to_string()).collect();
        f.write_str(&msgs.join("; "))
    }
}

/// Soft-constraint violations: recorded, never rejected.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ParamWarning {
    GammaMuAtLeastOne { gamma_mu: f64 },
    RateOutsideUnitInterval { field: &'static str, value: f64 },
}

impl fmt::Display for ParamWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamWarning::GammaMuAtLeastOne { gamma_mu } => {
                write!(f, "gamma*mu = {gamma_mu} is not < 1")
            }
            ParamWarning::RateOutsideUnitInterval { field, value } => {
                write!(f, "{field} = {value} is outside (0, 1)")
            }
        }
    }
}

/// A parameter record that passed validation. Immutable.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ModelParams(ParamsRecord);

impl Deref for ModelParams {
    type Target = ParamsRecord;

    fn deref(&self) -> &ParamsRecord {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Validated {
    pub params: ModelParams,
    pub warnings: Vec<ParamWarning>,
}

/// Check every hard constraint, collecting all violations.
pub fn validate(raw: &ParamsRecord) -> Result<Validated, ValidationErrors> {
    let mut errors = Vec::new();
    for (field, value) in raw.numeric_fields() {
        if !value.is_finite() {
            errors.push(ParamError::NonFinite { field });
        }
    }
    if !errors.is_empty() {
        return Err(ValidationErrors(errors));
    }

    let positive = [
        ("alpha", raw.alpha),
        ("beta", raw.beta),
        ("gamma", raw.gamma),
        ("nu", raw.nu),
    ];
    for (field, value) in positive {
        if value <= 0.0 {
            errors.push(ParamError::OutOfRange { field, value, constraint: "> 0" });
        }
    }
    if raw.mu < 1.0 {
        errors.push(ParamError::OutOfRange { field: "mu", value: raw.mu, constraint: ">= 1" });
    }
    if raw.chi <= -1.0 {
        errors.push(ParamError::OutOfRange { field: "chi", value: raw.chi, constraint: "> -1" });
    }
    if raw.theta <= -1.0 {
        errors.push(ParamError::OutOfRange {
            field: "theta",
            value: raw.theta,
            constraint: "> -1",
        });
    }
    for (field, value) in [("sigma_f", raw.sigma_f), ("sigma_g", raw.sigma_g), ("s0", raw.s0)] {
        if value < 0.0 {
            errors.push(ParamError::OutOfRange { field, value, constraint: ">= 0" });
        }
    }
    let delta = raw.gamma * raw.mu - raw.nu;
    if delta <= 0.0 {
        errors.push(ParamError::NonPositiveDelta { delta });
    }
    if raw.alpha * raw.chi >= 1.0 {
        errors.push(ParamError::RedistributionTooStrong {
            field: "alpha*chi",
            product: raw.alpha * raw.chi,
        });
    }
    if raw.nu * raw.theta >= 1.0 {
        errors.push(ParamError::RedistributionTooStrong {
            field: "nu*theta",
            product: raw.nu * raw.theta,
        });
    }
    if !errors.is_empty() {
        return Err(ValidationErrors(errors));
    }

    let mut warnings = Vec::new();
    if raw.gamma * raw.mu >= 1.0 {
        warnings.push(ParamWarning::GammaMuAtLeastOne { gamma_mu: raw.gamma * raw.mu });
    }
    for (field, value) in [("beta", raw.beta), ("gamma", raw.gamma)] {
        if value >= 1.0 {
            warnings.push(ParamWarning::RateOutsideUnitInterval { field, value });
        }
    }
    Ok(Validated { params: ModelParams(raw.clone()), warnings })
}

impl ModelParams {
    /// Validate and drop the warnings.
    pub fn new(raw: ParamsRecord) -> Result<Self, ValidationErrors> {
        validate(&raw).map(|v| v.params)
    }

    pub fn table1() -> Self {
        Self::new(ParamsRecord::table1()).expect("reference parameters are valid")
    }

    pub fn record(&self) -> &ParamsRecord {
        &self.0
    }

    /// Loans shutdown rate gamma*mu - nu.
    pub fn derived_delta(&self) -> f64 {
        self.gamma * self.mu - self.nu
    }

    /// Interior fixed point of the Lotka-Volterra means.
    pub fn fixed_point(&self) -> (f64, f64) {
        (self.derived_delta() / self.gamma, self.alpha / self.beta)
    }

    /// Copy with both noise coefficients multiplied by `factor`.
    pub fn with_sigma_scale(&self, factor: f64) -> Result<Self, ValidationErrors> {
        let mut raw = self.0.clone();
        raw.sigma_f *= factor;
        raw.sigma_g *= factor;
        Self::new(raw)
    }

    /// Copy with the risk exponents set for `mode`.
    pub fn with_risk_mode(&self, mode: RiskMode) -> Self {
        let mut raw = self.0.clone();
        raw.risk_f = Risk::Half;
        raw.risk_g = mode.loans_risk();
        ModelParams(raw)
    }

    /// The coupled-moment regime, if the risk exponents define one.
    pub fn risk_mode(&self) -> Option<RiskMode> {
        match (self.risk_f, self.risk_g) {
            (Risk::Half, Risk::Half) => Some(RiskMode::HalfHalf),
            (Risk::Half, Risk::One) => Some(RiskMode::HalfOne),
            _ => None,
        }
    }
}

/// Initial means and coefficients of variation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConditions {
    pub m_f0: f64,
    pub m_g0: f64,
    pub c_f0: f64,
    pub c_g0: f64,
    /// Shape of the initial densities for MC/FP runs.
    #[serde(default)]
    pub shape: DensityShape,
}

impl InitialConditions {
    pub fn new(m_f0: f64, m_g0: f64, c_f0: f64, c_g0: f64) -> Self {
        InitialConditions { m_f0, m_g0, c_f0, c_g0, shape: DensityShape::Gamma }
    }

    /// The (4, 3, 2, 1) start used by the reference experiments.
    pub fn reference() -> Self {
        Self::new(4.0, 3.0, 2.0, 1.0)
    }

    pub fn validate(&self) -> Result<(), ValidationErrors> {
        let mut errors = Vec::new();
        let fields = [("m_f0", self.m_f0), ("m_g0", self.m_g0), ("c_f0", self.c_f0), ("c_g0", self.c_g0)];
        for (field, value) in fields {
            if !value.is_finite() {
                errors.push(ParamError::NonFinite { field });
            }
        }
        if errors.is_empty() {
            for (field, value) in [("m_f0", self.m_f0), ("m_g0", self.m_g0)] {
                if value <= 0.0 {
                    errors.push(ParamError::OutOfRange { field, value, constraint: "> 0" });
                }
            }
            for (field, value) in [("c_f0", self.c_f0), ("c_g0", self.c_g0)] {
                if value < 0.0 {
                    errors.push(ParamError::OutOfRange { field, value, constraint: ">= 0" });
                }
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ValidationErrors(errors))
        }
    }

    pub fn initial_variances(&self) -> (f64, f64) {
        ((self.c_f0 * self.m_f0).powi(2), (self.c_g0 * self.m_g0).powi(2))
    }
}

impl Default for InitialConditions {
    fn default() -> Self {
        Self::reference()
    }
}
