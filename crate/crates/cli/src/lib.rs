//! Library behind the `fracwave` binary: config parsing, the scenario
//! registry, deterministic artifact writing and the output manifest.
//!
//! Reproducibility contract: a fixed (config, seed, build) produces
//! byte-identical numerical outputs; wall-clock timestamps are confined to
//! `manifest.json`.

pub mod config;
pub mod scenarios;

use config::ScenarioConfig;
use serde_json::json;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("numerical abort: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
    pub(crate) fn config_from(e: impl std::fmt::Display) -> CliError {
        CliError::Config(e.to_string())
    }
    pub(crate) fn numerical_from(e: impl std::fmt::Display) -> CliError {
        CliError::Numerical(e.to_string())
    }
}

/// Resolved knobs that may override the config: flag beats environment
/// beats file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

impl Overrides {
    /// Reads FRACWAVE_SEED and FRACWAVE_OUT, keeping flag values when set.
    pub fn with_env(mut self) -> Overrides {
        if self.seed.is_none() {
            if let Ok(s) = std::env::var("FRACWAVE_SEED") {
                self.seed = s.parse().ok();
            }
        }
        if self.out_dir.is_none() {
            if let Ok(s) = std::env::var("FRACWAVE_OUT") {
                self.out_dir = Some(PathBuf::from(s));
            }
        }
        self
    }
}

pub struct RunReport {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub warnings: Vec<String>,
    pub aborted: bool,
}

fn unix_ms() -> u128 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// Runs one configuration and writes its artifact directory: every scenario
/// file plus a manifest listing names, sizes and sha256 digests.
pub fn run_config(cfg: &ScenarioConfig, overrides: &Overrides) -> Result<RunReport, CliError> {
    let started = unix_ms();
    let seed = overrides.seed.unwrap_or(cfg.seed);
    let out_dir = overrides
        .out_dir
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .ok_or_else(|| {
            CliError::Config("no output directory: set --out, FRACWAVE_OUT or output_dir".into())
        })?;

    let mut effective = cfg.clone();
    effective.seed = seed;
    let output = scenarios::run_scenario(&effective, seed)?;

    std::fs::create_dir_all(&out_dir)?;
    let mut file_entries = Vec::new();
    let mut names = Vec::new();
    for (name, bytes) in &output.files {
        std::fs::write(out_dir.join(name), bytes)?;
        let digest = hex::encode(Sha256::digest(bytes));
        file_entries.push(json!({"name": name, "bytes": bytes.len(), "sha256": digest}));
        names.push(name.clone());
    }
    let manifest = json!({
        "tool": "fracwave",
        "version": env!("CARGO_PKG_VERSION"),
        "config": serde_json::to_value(&effective).expect("config serializes"),
        "files": file_entries,
        "warnings": output.warnings,
        "aborted": output.aborted,
        "started_unix_ms": started,
        "finished_unix_ms": unix_ms(),
    });
    std::fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_vec_pretty(&manifest).expect("manifest serializes"),
    )?;
    names.push("manifest.json".into());

    Ok(RunReport {
        out_dir,
        files: names,
        warnings: output.warnings,
        aborted: output.aborted,
    })
}

/// Shipped preset configurations, embedded so `run <scenario> --preset`
/// works from any directory; the same files live under `configs/`.
pub fn preset_config(scenario: &str, preset: &str) -> Option<&'static str> {
    macro_rules! presets {
        ($(($name:literal, $smoke:literal, $paper:literal)),* $(,)?) => {
            match (scenario, preset) {
                $(
                    ($name, "smoke") => Some(include_str!(concat!("../../../configs/", $smoke))),
                    ($name, "paper") => Some(include_str!(concat!("../../../configs/", $paper))),
                )*
                _ => None,
            }
        };
    }
    presets![
        ("conservation", "conservation.smoke.json", "conservation.paper.json"),
        ("morawetz-identity", "morawetz-identity.smoke.json", "morawetz-identity.paper.json"),
        ("morawetz-inequality", "morawetz-inequality.smoke.json", "morawetz-inequality.paper.json"),
        ("decay", "decay.smoke.json", "decay.paper.json"),
        ("scattering", "scattering.smoke.json", "scattering.paper.json"),
        ("strichartz-scaling", "strichartz-scaling.smoke.json", "strichartz-scaling.paper.json"),
        ("strichartz-mixed", "strichartz-mixed.smoke.json", "strichartz-mixed.paper.json"),
        ("bilinear", "bilinear.smoke.json", "bilinear.paper.json"),
        ("picard", "picard.smoke.json", "picard.paper.json"),
        ("index-system", "index-system.smoke.json", "index-system.paper.json"),
    ]
}

pub fn load_or_preset(
    config_path: Option<&Path>,
    scenario: Option<&str>,
    preset: &str,
) -> Result<ScenarioConfig, CliError> {
    match (config_path, scenario) {
        (Some(path), _) => config::load_config(path).map_err(CliError::Config),
        (None, Some(name)) => {
            let text = preset_config(name, preset).ok_or_else(|| {
                CliError::Config(format!(
                    "no shipped {preset:?} preset for scenario {name:?}; pass --config"
                ))
            })?;
            config::parse_config(text).map_err(CliError::Config)
        }
        (None, None) => Err(CliError::Config(
            "give a scenario name or --config PATH".into(),
        )),
    }
}
