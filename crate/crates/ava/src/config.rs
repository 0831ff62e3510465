//! Run configuration loaded from JSON. Unknown keys are rejected so typos
//! fail loudly instead of silently falling back to defaults.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::aggregation::AvaConfig;
use crate::error::{AvaError, Result};
use crate::evaluation::{BenchmarkConfig, MethodKind, ModelSpec};
use crate::models::MlpConfig;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    /// Name of the label column in input CSVs.
    pub label_column: String,
    pub header: bool,
    /// Columns to one-hot encode instead of standardizing.
    pub categorical_columns: Vec<String>,
    pub test_fraction: f64,
    pub seed: u64,
    pub model: ModelSpec,
    pub ava: AvaConfig,
    /// Benchmark grid settings.
    pub models: Vec<ModelSpec>,
    pub methods: Vec<MethodKind>,
    pub seeds: Vec<u64>,
    pub n_test_points: usize,
    /// Gold-set size; `null` selects it by cross-validation.
    pub m: Option<usize>,
    pub m_candidates: Vec<usize>,
    pub random_trials: usize,
    /// Neighborhood sizes for the k sweep.
    pub ks: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let bench = BenchmarkConfig::default();
        RunConfig {
            version: CONFIG_VERSION,
            label_column: "label".into(),
            header: true,
            categorical_columns: vec![],
            test_fraction: bench.test_fraction,
            seed: 0,
            model: ModelSpec::Mlp(MlpConfig::default()),
            ava: bench.ava.clone(),
            models: bench.models,
            methods: bench.methods,
            seeds: bench.seeds,
            n_test_points: bench.n_test_points,
            m: bench.m,
            m_candidates: bench.m_candidates,
            random_trials: bench.random_trials,
            ks: vec![1, 2, 5, 10, 20],
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let config: RunConfig =
            serde_json::from_str(&text).map_err(|e| AvaError::Config(e.to_string()))?;
        if config.version > CONFIG_VERSION {
            return Err(AvaError::Config(format!(
                "config version {} is newer than supported {}",
                config.version, CONFIG_VERSION
            )));
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(AvaError::Config(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if self.ava.k == 0 {
            return Err(AvaError::Config("ava.k must be >= 1".into()));
        }
        if self.ava.ig_steps == 0 {
            return Err(AvaError::Config("ava.ig_steps must be >= 1".into()));
        }
        Ok(())
    }

    pub fn benchmark_config(&self) -> BenchmarkConfig {
        BenchmarkConfig {
            models: self.models.clone(),
            methods: self.methods.clone(),
            seeds: self.seeds.clone(),
            test_fraction: self.test_fraction,
            n_test_points: self.n_test_points,
            m: self.m,
            m_candidates: self.m_candidates.clone(),
            random_trials: self.random_trials,
            ava: self.ava.clone(),
        }
    }
}
