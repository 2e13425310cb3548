use std::fmt;
use std::path::Path;

use localmem::{BetaParams, CalibrationProblem, DesignSpec, Evidence, Scenario};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use sha2::{Digest, Sha256};

#[derive(Debug)]
pub enum CliError {
    /// Unreadable, malformed or inconsistent input.
    Input(String),
    Core(localmem::Error),
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) | CliError::Output(_) => 2,
            CliError::Core(localmem::Error::Infeasible { .. }) => 1,
            CliError::Core(localmem::Error::Numeric(_)) => 3,
            CliError::Core(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "invalid input: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Output(m) => write!(f, "cannot write output: {m}"),
        }
    }
}

impl From<localmem::Error> for CliError {
    fn from(e: localmem::Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Parsed config plus the SHA-256 of its raw bytes.
pub struct Loaded<T> {
    pub value: T,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn load<T: DeserializeOwned>(path: Option<&Path>) -> CliResult<Loaded<T>> {
    let path = path.ok_or_else(|| CliError::Input("--config is required for this subcommand".into()))?;
    let bytes = std::fs::read(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let value = serde_json::from_slice(&bytes).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(Loaded { value, sha256: sha256_hex(&bytes) })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub x: Vec<u32>,
    pub n: Vec<u32>,
    pub theta0: Vec<f64>,
    #[serde(default)]
    pub basket_ids: Option<Vec<String>>,
    #[serde(default)]
    pub prior: BetaParams,
    #[serde(default)]
    pub evidence: Evidence,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub partition_weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorConfig {
    pub design: DesignSpec,
    /// 1 for the interim look (or the only look of a single-stage design), 2 for the final look.
    pub stage: u8,
    /// Cumulative responses and patients at this look.
    pub x: Vec<u32>,
    pub n: Vec<u32>,
    /// Responses at the interim look; required at stage 2.
    #[serde(default)]
    pub interim_x: Option<Vec<u32>>,
    /// Baskets still enrolling after the interim look; checked against the interim rule.
    #[serde(default)]
    pub active: Option<Vec<bool>>,
    #[serde(default)]
    pub basket_ids: Option<Vec<String>>,
}

fn default_n_sims() -> u64 {
    localmem::simulation::DEFAULT_N_SIMS
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub design: DesignSpec,
    /// Defaults to the `0 success` .. `B success` suite.
    #[serde(default)]
    pub scenarios: Option<Vec<Scenario>>,
    #[serde(default = "default_n_sims")]
    pub n_sims: u64,
    #[serde(default)]
    pub seed: u64,
}

pub type CalibrateConfig = CalibrationProblem;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimonConfig {
    pub p0: Option<f64>,
    pub p1: Option<f64>,
    pub alpha: Option<f64>,
    pub fwer: Option<f64>,
    pub power: Option<f64>,
    pub baskets: Option<usize>,
    pub n_max: Option<u32>,
}
