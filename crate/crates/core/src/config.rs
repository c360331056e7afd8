//! Flat key/value run configuration (TOML or JSON) with unit-suffixed keys.
//! Unknown keys are rejected so that a unit typo cannot pass silently.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amplifier::DriveSpec;
use crate::constants::TWO_PI;
use crate::error::MaserError;
use crate::params::{DerivedRates, SystemParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("bad override `{0}`")]
    Override(String),
    #[error(transparent)]
    Invalid(#[from] MaserError),
}

/// Every field is optional; absent device keys fall back to
/// [`SystemParams::baseline`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    // device
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu_c_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pump_rate_per_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature_k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t2_star_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_eg_per_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pump_decay_multiplier: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gyromagnetic_hz_per_gauss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zfs_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_gauss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cavity_length_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_eff_m3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_nv_per_m3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_nv_m3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orientation_divisor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_ex_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling_hz: Option<f64>,
    /// Take g from the mode-volume estimate instead of `coupling_hz`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geometric_coupling: Option<bool>,

    // drive
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_in_w: Option<f64>,
    /// Input frequency minus cavity frequency.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drive_detuning_hz: Option<f64>,

    // time domain
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,

    // sweep grid
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_axis: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_scale: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_axis: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_scale: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantities: Option<Vec<String>>,
}

/// Input power used when `p_in_w` is absent: 1 fW.
pub const DEFAULT_P_IN_W: f64 = 1e-15;

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let parsed = if is_json {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|message| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: PathBuf::from("<string>"),
            message: e.to_string(),
        })
    }

    /// Applies `key=value`. Values parse as numbers or booleans where possible;
    /// `quantities` takes a comma-separated list.
    pub fn set(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::Override(assignment.to_string()))?;
        let (key, raw) = (key.trim(), raw.trim());
        let value = if key == "quantities" {
            serde_json::Value::Array(
                raw.split(',')
                    .map(|s| serde_json::Value::String(s.trim().to_string()))
                    .collect(),
            )
        } else if let Ok(u) = raw.parse::<u64>() {
            serde_json::Value::from(u)
        } else if let Ok(f) = raw.parse::<f64>() {
            serde_json::Value::from(f)
        } else if let Ok(b) = raw.parse::<bool>() {
            serde_json::Value::Bool(b)
        } else {
            serde_json::Value::String(raw.to_string())
        };
        let mut map = match serde_json::to_value(&*self) {
            Ok(serde_json::Value::Object(m)) => m,
            _ => unreachable!("Config serialises to an object"),
        };
        map.insert(key.to_string(), value);
        *self = serde_json::from_value(serde_json::Value::Object(map))
            .map_err(|e| ConfigError::Override(format!("{assignment}: {e}")))?;
        Ok(())
    }

    pub fn system_params(&self) -> Result<SystemParams, ConfigError> {
        let mut p = SystemParams::baseline();
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut p.cavity_frequency_hz, self.nu_c_hz);
        set(&mut p.quality_factor, self.q_factor);
        set(&mut p.pump_rate, self.pump_rate_per_s);
        set(&mut p.temperature_k, self.temperature_k);
        set(&mut p.t2_star_s, self.t2_star_s);
        set(&mut p.gamma_eg, self.gamma_eg_per_s);
        set(&mut p.pump_decay_multiplier, self.pump_decay_multiplier);
        set(&mut p.gyromagnetic_hz_per_gauss, self.gyromagnetic_hz_per_gauss);
        set(&mut p.zero_field_splitting_hz, self.zfs_hz);
        set(&mut p.cavity_length_m, self.cavity_length_m);
        set(&mut p.mode_volume_m3, self.v_eff_m3);
        set(&mut p.nv_density_m3, self.rho_nv_per_m3);
        set(&mut p.diamond_volume_m3, self.v_nv_m3);
        set(&mut p.orientation_divisor, self.orientation_divisor);
        set(&mut p.kappa_ex_fraction, self.kappa_ex_fraction);
        if self.b_gauss.is_some() {
            p.field_gauss = self.b_gauss;
        }
        if self.coupling_hz.is_some() {
            p.coupling_hz = self.coupling_hz;
        }
        if self.geometric_coupling == Some(true) {
            if self.coupling_hz.is_some() {
                return Err(MaserError::InvalidParameter {
                    name: "geometric_coupling",
                    reason: "conflicts with coupling_hz".into(),
                }
                .into());
            }
            p.coupling_hz = None;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn p_in(&self) -> f64 {
        self.p_in_w.unwrap_or(DEFAULT_P_IN_W)
    }

    pub fn drive(&self, r: &DerivedRates) -> Result<DriveSpec, ConfigError> {
        let d = DriveSpec::new(
            self.p_in(),
            r.omega_c + TWO_PI * self.drive_detuning_hz.unwrap_or(0.0),
        );
        d.validate()?;
        Ok(d)
    }
}
