//! Run configuration: a single JSON document with defaults for every key and
//! dotted-path `--set key=value` overrides.

use crate::history::HistoryConfig;
use crate::integrator::IntegratorConfig;
use crate::kernel::DivisionDensity;
use crate::model::{HillRate, ModelParams};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DensityConfig {
    /// "uniform" or "tabulated".
    pub kind: String,
    pub tau_min: f64,
    pub tau_max: f64,
    /// Two-column CSV (tau, value) for tabulated densities.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv_path: Option<String>,
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self { kind: "uniform".into(), tau_min: 0.0, tau_max: 7.0, csv_path: None }
    }
}

/// The full configuration with every default materialized; serializing it
/// back out yields the exact resolved configuration of a run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    /// Resting-phase loss rate, 1/days.
    pub delta: f64,
    /// Apoptosis rate, 1/days.
    pub gamma: f64,
    /// Maximal re-entry rate, 1/days.
    pub beta0: f64,
    /// Half-saturation resting mass (normalized).
    pub theta: f64,
    /// Hill sensitivity.
    pub n: f64,
    pub density: DensityConfig,
    /// Initial resting mass.
    pub mu: f64,
    /// Simulation horizon, days.
    pub t_end: f64,
    /// Integrator macro step, days.
    pub step: f64,
    /// Transient discarded before period estimation, days.
    pub t_discard: f64,
    /// Fixed-point refinements of the provisional step extension.
    pub correction_passes: usize,
    /// CSV output interval, days.
    pub output_every: f64,
    /// Frequency ceiling of the crossing scan; 0 means forty kernel
    /// harmonics.
    pub hopf_omega_max: f64,
    /// Grid points of the crossing scan.
    pub hopf_grid: usize,
    /// Base step of the step-halving order check in the verification suite.
    pub verify_order_step: f64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            delta: 0.05,
            gamma: 0.2,
            beta0: 1.77,
            theta: 1.0,
            n: 3.0,
            density: DensityConfig::default(),
            mu: 1.0,
            t_end: 1000.0,
            step: 0.01,
            t_discard: 300.0,
            correction_passes: 2,
            output_every: 0.1,
            hopf_omega_max: 0.0,
            hopf_grid: 20_000,
            verify_order_step: 0.04,
        }
    }
}

impl Config {
    /// Load from an optional JSON file and apply `key=value` overrides.
    pub fn load(path: Option<&Path>, sets: &[String]) -> Result<Self> {
        let mut value: serde_json::Value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => serde_json::json!({}),
        };
        if !value.is_object() {
            return Err(Error::Config("config root must be a JSON object".into()));
        }
        for set in sets {
            apply_override(&mut value, set)?;
        }
        serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn build_density(&self) -> Result<DivisionDensity> {
        match self.density.kind.as_str() {
            "uniform" => DivisionDensity::uniform(self.density.tau_min, self.density.tau_max),
            "tabulated" => {
                let path = self.density.csv_path.as_ref().ok_or_else(|| {
                    Error::Config("tabulated density requires density.csv_path".into())
                })?;
                let d = DivisionDensity::from_csv(Path::new(path))?;
                // the CSV defines the support; cross-check declared bounds when set
                let declared = (self.density.tau_min, self.density.tau_max);
                if declared != (DensityConfig::default().tau_min, DensityConfig::default().tau_max)
                    && ((d.tau_min() - declared.0).abs() > 1e-9
                        || (d.tau_max() - declared.1).abs() > 1e-9)
                {
                    return Err(Error::Config(format!(
                        "density.csv support [{}, {}] does not match declared [{}, {}]",
                        d.tau_min(),
                        d.tau_max(),
                        declared.0,
                        declared.1
                    )));
                }
                Ok(d)
            }
            other => Err(Error::Config(format!(
                "density.kind must be \"uniform\" or \"tabulated\", got \"{other}\""
            ))),
        }
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        let hill = HillRate::new(self.beta0, self.theta, self.n)
            .map_err(|e| Error::Config(e.to_string()))?;
        ModelParams::new(self.delta, self.gamma, hill, self.build_density()?)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn history_config(&self) -> HistoryConfig {
        HistoryConfig { mu: self.mu, step: Some(self.step) }
    }

    pub fn integrator_config(&self) -> IntegratorConfig {
        IntegratorConfig {
            step: self.step,
            correction_passes: self.correction_passes,
            t_end: self.t_end,
        }
    }

    pub fn omega_max(&self, params: &ModelParams) -> f64 {
        if self.hopf_omega_max > 0.0 {
            self.hopf_omega_max
        } else {
            crate::stability::default_omega_max(params)
        }
    }
}

/// Apply one `key=value` override; dotted keys descend into objects and the
/// value is parsed as JSON when possible, as a bare string otherwise.
fn apply_override(root: &mut serde_json::Value, set: &str) -> Result<()> {
    let (key, raw) = set
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{set}' is not of the form key=value")))?;
    if key.is_empty() {
        return Err(Error::Config(format!("override '{set}' has an empty key")));
    }
    let value: serde_json::Value = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut cursor = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cursor
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("override '{key}': '{part}' is not an object")))?;
        if i + 1 == parts.len() {
            obj.insert((*part).to_string(), value);
            return Ok(());
        }
        cursor = obj
            .entry((*part).to_string())
            .or_insert_with(|| serde_json::json!({}));
    }
    unreachable!("override path always terminates")
}

/// Scientific notation with 17 significant digits, the canonical float
/// format of every CSV this crate writes.
pub fn fmt_sci(v: f64) -> String {
    format!("{v:.16e}")
}
