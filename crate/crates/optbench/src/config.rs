//! Structured configuration: TOML file with strict keys, flag overrides
//! applied by the CLI, and a resolved snapshot written next to every run's
//! outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::JudgePolicy;
use crate::pairing::PairMode;
use crate::sandbox::Toolchain;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unreadable config {path}: {reason}")]
    Unreadable { path: PathBuf, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    /// Single seed feeding all randomized subset operations.
    pub seed: u64,
    pub paths: PathsConfig,
    pub toolchain: ToolchainConfig,
    pub llm: LlmConfig,
    pub pairing: PairingConfig,
    pub metrics: MetricsConfig,
    pub limits: LimitsConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub corpus: Option<PathBuf>,
    pub tests: Option<PathBuf>,
    pub workdir: PathBuf,
    pub output: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            corpus: None,
            tests: None,
            workdir: PathBuf::from("optbench-work"),
            output: PathBuf::from("optbench-out"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToolchainConfig {
    pub preset: String,
    pub compile_cmd: Option<Vec<String>>,
    pub run_cmd: Option<Vec<String>>,
    pub compile_timeout_s: Option<f64>,
    pub run_timeout_s: Option<f64>,
    pub mem_limit_mb: Option<u64>,
    pub output_limit_kb: Option<u64>,
}

impl Default for ToolchainConfig {
    fn default() -> Self {
        ToolchainConfig {
            preset: "cpp-o3".into(),
            compile_cmd: None,
            run_cmd: None,
            compile_timeout_s: None,
            run_timeout_s: None,
            mem_limit_mb: None,
            output_limit_kb: None,
        }
    }
}

impl ToolchainConfig {
    pub fn resolve(&self) -> Result<Toolchain, ConfigError> {
        let mut t = Toolchain::preset(&self.preset).ok_or_else(|| {
            ConfigError::Invalid(format!("unknown toolchain preset {}", self.preset))
        })?;
        if let Some(c) = &self.compile_cmd {
            t.compile_cmd = c.clone();
        }
        if let Some(c) = &self.run_cmd {
            t.run_cmd = c.clone();
        }
        if let Some(v) = self.compile_timeout_s {
            t.compile_timeout_s = v;
        }
        if let Some(v) = self.run_timeout_s {
            t.run_timeout_s = v;
        }
        if let Some(v) = self.mem_limit_mb {
            t.mem_limit_mb = v;
        }
        if let Some(v) = self.output_limit_kb {
            t.output_limit_kb = v;
        }
        t.validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(t)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LlmConfig {
    pub endpoint: String,
    pub model: String,
    pub key_env: String,
    pub rpm: u32,
    pub concurrency: usize,
    /// JSONL mock script; when set the client never touches the network.
    pub mock_script: Option<PathBuf>,
    /// Directory of `<template>.txt` prompt overrides.
    pub templates_dir: Option<PathBuf>,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            endpoint: String::new(),
            model: String::new(),
            key_env: "OPTBENCH_LLM_KEY".into(),
            rpm: 60,
            concurrency: 4,
            mock_script: None,
            templates_dir: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PairingConfig {
    /// consecutive | all_forward
    pub user_mode: String,
    pub problem_mode: String,
    pub require_faster: bool,
}

impl Default for PairingConfig {
    fn default() -> Self {
        // matched to the construction each perspective is described with:
        // users iterate adjacent submissions, problems pair across the
        // whole runtime-sorted trajectory
        PairingConfig {
            user_mode: "consecutive".into(),
            problem_mode: "all_forward".into(),
            require_faster: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    /// exact | token | numeric
    pub policy: String,
    pub numeric_eps: f64,
    /// Wall-clock repetitions per (program, input) measurement.
    pub repetitions: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            policy: "token".into(),
            numeric_eps: 1e-6,
            repetitions: 5,
        }
    }
}

impl MetricsConfig {
    pub fn judge_policy(&self) -> Result<JudgePolicy, ConfigError> {
        parse_policy(&self.policy, self.numeric_eps)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitsConfig {
    /// Parallel sandbox/anchor jobs; 0 = physical parallelism - 1.
    pub jobs: usize,
}

impl LimitsConfig {
    pub fn effective_jobs(&self) -> usize {
        if self.jobs == 0 {
            crate::sandbox::default_parallelism()
        } else {
            self.jobs
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Unreadable {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        toml::from_str(&text).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Config, ConfigError> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Config::default()),
        }
    }

    /// Write the fully resolved configuration next to a run's outputs.
    pub fn write_snapshot(&self, out_dir: &Path) -> std::io::Result<()> {
        let text = toml::to_string_pretty(self).expect("config serializes");
        std::fs::write(out_dir.join("config_snapshot.toml"), text)
    }
}

pub fn parse_pair_mode(s: &str) -> Result<PairMode, ConfigError> {
    match s {
        "consecutive" => Ok(PairMode::Consecutive),
        "all_forward" | "all-forward" => Ok(PairMode::AllForward),
        other => Err(ConfigError::Invalid(format!("unknown pair mode {other}"))),
    }
}

pub fn parse_policy(s: &str, eps: f64) -> Result<JudgePolicy, ConfigError> {
    match s {
        "exact" => Ok(JudgePolicy::Exact),
        "token" => Ok(JudgePolicy::Token),
        "numeric" => Ok(JudgePolicy::Numeric(eps)),
        other => Err(ConfigError::Invalid(format!(
            "unknown judge policy {other}"
        ))),
    }
}
