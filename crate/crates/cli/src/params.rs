//! Per-command parameters.
//!
//! Every field is optional so that flags can be layered over the `params`
//! object of a config file; `resolve` merges the two and applies defaults.

use std::path::PathBuf;

use clap::Args;
use schatten_lab::entropy::SandwichConfig;
use schatten_lab::recovery::EmConfig;
use schatten_lab::schatten::Exponent;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::Failure;

/// Flags win over config-file values; unknown keys are rejected by the target type.
pub fn resolve<T: Serialize + DeserializeOwned>(flags: &T, file: Map<String, Value>) -> Result<T, Failure> {
    let mut merged = file;
    if let Value::Object(set) = serde_json::to_value(flags).map_err(|e| Failure::Invalid(e.to_string()))? {
        for (k, v) in set {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| Failure::Invalid(format!("params: {e}")))
}

pub fn need<T>(v: Option<T>, name: &str) -> Result<T, Failure> {
    v.ok_or_else(|| Failure::Invalid(format!("missing parameter '{name}'")))
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateParams {
    #[arg(long)]
    pub p: Option<Exponent>,
    #[arg(long)]
    pub q: Option<Exponent>,
    /// Matrix side.
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n_dim: Option<u64>,
    /// Entropy index.
    #[arg(long = "n")]
    #[serde(rename = "n")]
    pub index: Option<u64>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeParams {
    #[arg(long)]
    pub p: Option<Exponent>,
    /// One size for a single estimate, several for a scaling fit.
    #[arg(long = "N", value_delimiter = ',')]
    #[serde(rename = "N")]
    pub n_dims: Option<Vec<usize>>,
    /// Proposals per size.
    #[arg(long)]
    pub samples: Option<u64>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrassmannParams {
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n_dim: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Metric exponent (default 2).
    #[arg(long)]
    pub q: Option<Exponent>,
    #[arg(long, value_delimiter = ',')]
    pub delta_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub samples: Option<u64>,
    /// Also build a projection packing for the pair (p, q).
    #[arg(long)]
    pub p: Option<Exponent>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetParams {
    #[arg(long)]
    pub p: Option<Exponent>,
    #[arg(long)]
    pub q: Option<Exponent>,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n_dim: Option<usize>,
    /// Number of dyadic levels, with 2^levels <= N.
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub cq: Option<f64>,
    /// Directory for the net files (net-build).
    #[arg(long)]
    pub net_dir: Option<PathBuf>,
    /// Index file of a saved net (net-audit); without it the net is rebuilt from the parameters.
    #[arg(long)]
    pub net: Option<PathBuf>,
    /// Audit probes (net-audit).
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SandwichParams {
    #[arg(long)]
    pub p: Option<Exponent>,
    #[arg(long)]
    pub q: Option<Exponent>,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n_dim: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<usize>>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub cq: Option<f64>,
    /// Full bound settings; config file only.
    #[arg(skip)]
    pub settings: Option<SandwichConfig>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoveryParams {
    #[arg(long)]
    pub p: Option<Exponent>,
    #[arg(long)]
    pub q: Option<Exponent>,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n_dim: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub m_grid: Option<Vec<usize>>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Iteration settings; config file only.
    #[arg(skip)]
    pub settings: Option<EmConfig>,
}
