//! Experiment configuration files.
//!
//! A config is a TOML document with the sections `[experiment]`, `[model]`,
//! `[domain]` and `[run]`. Keys are lowercase snake case and unknown keys are
//! rejected. `meta.txt` is written in the same format, so it can be fed back
//! in; its `[meta]` section is informational and ignored on input.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentSection>,
    pub model: ModelSection,
    #[serde(default)]
    pub domain: DomainSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<MetaSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: String,
}

/// `id` plus the model's own numeric parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSection {
    pub id: String,
    #[serde(flatten)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clamp_band: Option<f64>,
}

/// Run settings. Which keys apply depends on the experiment; a key that the
/// experiment does not use is an error.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meshes: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ref_factor: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub powers: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exp_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start_distances: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mesh_ratio: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unit: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_hat_n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_hi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

/// Written to `meta.txt`; ignored when read back.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaSection {
    pub version: String,
    pub lipschitz: f64,
    pub r: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_hat: Option<f64>,
}

impl RunSection {
    /// Names of the keys that are set.
    pub fn present(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        macro_rules! chk {
            ($($f:ident),*) => { $( if self.$f.is_some() { out.push(stringify!($f)); } )* };
        }
        chk!(seed, out, n, h, meshes, horizon, ref_factor, p, q, powers, exp_c, start_distances, mesh_ratio, rho, unit, points, l_hat_n, window_lo, window_hi, alpha);
        out
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}
