//! Optional TOML run configuration. Flags override file values; anything left
//! unset falls back to library defaults. Unknown keys are rejected so typos
//! fail loudly instead of silently running defaults.

use std::path::Path;

use serde::Deserialize;

use fmsi::{SmoothingConfig, WeightForm, WeightSpec};

use crate::error::{CliError, Result};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub smoothing: SmoothingSection,
    pub model: ModelSection,
    pub baseline: BaselineSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmoothingSection {
    pub k: Option<usize>,
    pub h_min: Option<f64>,
    pub grid_size: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub basis_size: Option<usize>,
    pub weight_form: Option<String>,
    pub rho: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineSection {
    pub snp_index: Option<usize>,
    pub window_bp: Option<f64>,
    pub alpha: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }
}

pub fn parse_weight_form(name: &str) -> Result<WeightForm> {
    match name {
        "exponential" => Ok(WeightForm::Exponential),
        "gaussian" => Ok(WeightForm::Gaussian),
        "linear" => Ok(WeightForm::Linear),
        other => Err(CliError::Usage(format!(
            "unknown weight form '{other}'; expected exponential, gaussian, or linear"
        ))),
    }
}

/// Flag values that can override the file; `None` means "not given".
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub k: Option<usize>,
    pub h_min: Option<f64>,
    pub grid_size: Option<usize>,
    pub basis_size: Option<usize>,
    pub weight_form: Option<String>,
    pub rho: Option<f64>,
    pub snp_index: Option<usize>,
    pub window_bp: Option<f64>,
    pub alpha: Option<f64>,
}

/// Fully resolved parameters: flag, then file, then default.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub smoothing: SmoothingConfig,
    pub basis_size: usize,
    pub weight_spec: WeightSpec,
    pub snp_index: usize,
    pub window_bp: f64,
    pub alpha: f64,
}

pub fn resolve(file: &FileConfig, flags: &Overrides) -> Result<Resolved> {
    let defaults = SmoothingConfig::default();
    let smoothing = SmoothingConfig {
        k: flags.k.or(file.smoothing.k).unwrap_or(defaults.k),
        h_min: flags.h_min.or(file.smoothing.h_min).unwrap_or(defaults.h_min),
        grid_size: flags
            .grid_size
            .or(file.smoothing.grid_size)
            .unwrap_or(defaults.grid_size),
    };
    let form_name = flags
        .weight_form
        .clone()
        .or_else(|| file.model.weight_form.clone());
    let weight_spec = WeightSpec {
        form: match form_name {
            Some(name) => parse_weight_form(&name)?,
            None => WeightForm::Exponential,
        },
        rho: flags.rho.or(file.model.rho).unwrap_or(1.0),
    };
    Ok(Resolved {
        smoothing,
        basis_size: flags.basis_size.or(file.model.basis_size).unwrap_or(10),
        weight_spec,
        snp_index: flags.snp_index.or(file.baseline.snp_index).unwrap_or(0),
        window_bp: flags.window_bp.or(file.baseline.window_bp).unwrap_or(500_000.0),
        alpha: flags.alpha.or(file.baseline.alpha).unwrap_or(0.05),
    })
}
