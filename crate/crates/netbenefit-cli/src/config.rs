//! Analysis configuration: one JSON document per analysis, with command-line
//! overrides for the common knobs.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use netbenefit::domain::WtpGrid;
use netbenefit::standardize::ModelSpec;
use serde::{Deserialize, Serialize};

/// Column mapping from the input CSV to the data model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnMap {
    /// Optional id column; row numbers are used when absent.
    #[serde(default)]
    pub id: Option<String>,
    pub treatment: String,
    pub time: String,
    /// 1 = outcome observed, 0 = censored.
    pub event: String,
    /// Blank cell = censored cost.
    pub cost: String,
    pub covariates: Vec<String>,
}

/// Willingness-to-pay grid: either an explicit list or a range.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    Values { values: Vec<f64> },
    Range { min: f64, max: f64, step: f64 },
}

impl LambdaSpec {
    pub fn grid(&self) -> Result<WtpGrid> {
        let grid = match self {
            LambdaSpec::Values { values } => WtpGrid::new(values.clone()),
            LambdaSpec::Range { min, max, step } => WtpGrid::from_range(*min, *max, *step),
        };
        grid.map_err(|e| anyhow::anyhow!("invalid willingness-to-pay grid: {e}"))
    }
}

fn default_k_draws() -> usize {
    netbenefit::standardize::DEFAULT_DRAWS
}

fn default_alpha() -> f64 {
    0.05
}

/// The `estimate` configuration document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub input: PathBuf,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub columns: ColumnMap,
    /// Cost accrual horizon; absent means costs run to the event.
    #[serde(default)]
    pub tau: Option<f64>,
    pub lambda: LambdaSpec,
    pub model: ModelSpec,
    #[serde(default = "default_k_draws")]
    pub k_draws: usize,
    /// 0 disables the bootstrap (point estimates only).
    #[serde(default)]
    pub k_boot: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
    /// Resample within arms instead of over all rows.
    #[serde(default)]
    pub stratified_bootstrap: bool,
    #[serde(default)]
    pub threads: Option<usize>,
}

impl AnalysisConfig {
    pub fn load(path: &PathBuf) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let config: AnalysisConfig = serde_json::from_str(&text)
            .with_context(|| format!("cannot parse config {}", path.display()))?;
        if config.k_draws == 0 {
            bail!("k_draws must be at least 1");
        }
        Ok(config)
    }

    /// 64-bit FNV-1a over the canonical JSON form of the analytic fields;
    /// recorded in summary.json so an output directory can be matched to the
    /// configuration that produced it. Execution-only knobs (thread count,
    /// output directory) never change results and are excluded.
    pub fn content_hash(&self) -> String {
        let mut analytic = self.clone();
        analytic.threads = None;
        analytic.output_dir = None;
        let canonical = serde_json::to_string(&analytic).expect("config serializes");
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in canonical.as_bytes() {
            hash ^= u64::from(*byte);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{hash:016x}")
    }
}
