//! Run configuration: one JSON file describes one run. Unknown keys are
//! rejected and every error names the offending path. The resolved
//! configuration is embedded verbatim in the output manifest.

use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub d: usize,
    pub n: usize,
    pub half_length: f64,
    pub nx: usize,
    #[serde(default)]
    pub ny: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub sigma: f64,
    pub mu: i64,
    pub p: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveBlock {
    pub t_final: f64,
    pub dt: f64,
    pub record_stride: usize,
}

/// Radial Gaussian data `amplitude · e^{-|x|²/width²} · (1 + y_cosine·cos y)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialDataBlock {
    pub kind: String,
    pub amplitude: f64,
    #[serde(default = "one")]
    pub width: f64,
    #[serde(default)]
    pub y_cosine: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub grid: GridBlock,
    pub model: ModelBlock,
    #[serde(default)]
    pub initial_data: Option<InitialDataBlock>,
    #[serde(default)]
    pub evolve: Option<EvolveBlock>,
    #[serde(default = "empty_object")]
    pub experiment: serde_json::Value,
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<String>,
}

fn empty_object() -> serde_json::Value {
    serde_json::Value::Object(serde_json::Map::new())
}

/// An exponent that may be the literal string "inf".
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Exponent {
    Number(f64),
    Symbolic(String),
}

impl Exponent {
    pub fn value(&self) -> Result<f64, String> {
        match self {
            Exponent::Number(v) => Ok(*v),
            Exponent::Symbolic(s) if s == "inf" => Ok(f64::INFINITY),
            Exponent::Symbolic(s) => Err(format!("unknown exponent {s:?}; use a number or \"inf\"")),
        }
    }
}

/// Parses a configuration, reporting the JSON path of any offending key.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de)
        .map_err(|e| format!("config invalid at `{}`: {}", e.path(), e.inner()))
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    parse_config(&text)
}

/// Deserializes the scenario-specific block, again with path reporting.
pub fn experiment_block<T: for<'de> Deserialize<'de>>(
    value: &serde_json::Value,
) -> Result<T, String> {
    let text = serde_json::to_string(value).expect("value reserializes");
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de)
        .map_err(|e| format!("config invalid at `experiment.{}`: {}", e.path(), e.inner()))
}
