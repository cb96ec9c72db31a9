//! JSON run configuration: `{"params": {...}, "initial": {...}, "run": {...}}`.

use std::path::Path;

use kinlv_core::fp::LambdaRule;
use kinlv_core::mc::NoiseScale;
use kinlv_core::{validate, InitialConditions, ModelParams, ParamWarning, ParamsRecord, RiskMode};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub params: ParamsRecord,
    #[serde(default)]
    pub initial: InitialConditions,
    #[serde(default)]
    pub run: RunSection,
}

/// Per-run settings; command-line flags override these, and unset ones fall back to
/// per-command defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub t_end: Option<f64>,
    pub output_dt: Option<f64>,
    /// Relative and absolute tolerance of the adaptive ODE solver.
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub risk: Option<RiskMode>,
    pub eps: Option<f64>,
    pub agents: Option<usize>,
    pub cells: Option<usize>,
    pub x_max: Option<f64>,
    pub snapshot_times: Option<Vec<f64>>,
    pub noise_scale: Option<NoiseScale>,
    pub flux: Option<LambdaRule>,
    pub sigma_scale: Option<f64>,
    pub which: Option<u8>,
    /// Epsilon values of the refinement sweep.
    pub eps_list: Option<Vec<f64>>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    /// Validated parameters (with the risk override applied) and soft warnings.
    pub fn model(&self) -> Result<(ModelParams, Vec<ParamWarning>), CliError> {
        let v = validate(&self.params)?;
        self.initial.validate()?;
        let params = match self.run.risk {
            Some(mode) => v.params.with_risk_mode(mode),
            None => v.params,
        };
        Ok((params, v.warnings))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_table1_reference() {
        let c = ConfigFile::parse("{}").unwrap();
        assert_eq!(c.params, ParamsRecord::table1());
        assert_eq!(c.initial, InitialConditions::reference());
        assert_eq!(c.run, RunSection::default());
    }

    #[test]
    fn unknown_keys_are_rejected_at_every_level() {
        for text in [
            r#"{"parms": {}}"#,
            r#"{"params": {"alpha": 1.0, "alhpa": 2.0}}"#,
            r#"{"initial": {"m_f0": 4, "m_g0": 3, "c_f0": 2, "c_g0": 1, "extra": 0}}"#,
            r#"{"run": {"t_ned": 3}}"#,
        ] {
            let e = ConfigFile::parse(text).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{text}");
        }
    }

    #[test]
    fn invalid_parameters_are_validation_errors() {
        let mut c = ConfigFile::default();
        c.params.nu = 2.0;
        assert_eq!(c.model().unwrap_err().exit_code(), 2);
        let c = ConfigFile::parse(r#"{"run": {"risk": "half-one"}}"#).unwrap();
        assert_eq!(c.model().unwrap().0.risk_mode(), Some(RiskMode::HalfOne));
    }

    #[test]
    fn partial_sections_fill_from_defaults() {
        let c = ConfigFile::parse(r#"{"params": {"gamma": 0.05}, "initial": {"c_f0": 0.5}}"#).unwrap();
        assert_eq!(c.params, ParamsRecord { gamma: 0.05, ..ParamsRecord::table1() });
        assert_eq!(c.initial, InitialConditions { c_f0: 0.5, ..InitialConditions::reference() });
    }
}
