//! Tuning-run configuration: a TOML file with a `[[search_space]]` row per
//! parameter (name / space_type / search_center / min / max / is_integer),
//! an `[optimizer]` table, and a `[harness]` table.

use std::path::{Path, PathBuf};

use carbs::{AcquisitionMode, OptimizerConfig, ParamSpec, SearchSpace};
use serde::{Deserialize, Serialize};

use crate::{HarnessError, Result};

/// `[harness]` section: evaluation-worker orchestration knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HarnessSection {
    /// Maximum concurrently running evaluation workers.
    pub parallelism: usize,
    /// Command template; `{suggestion_file}` (required, exactly once) and
    /// `{result_file}` (optional) are substituted per evaluation. When
    /// `{result_file}` is absent the worker must write `result.json` next to
    /// the suggestion file.
    pub worker_command: String,
    /// Total tuning wall-clock budget in seconds (across resumes).
    pub wall_clock_budget: f64,
    /// Optional cap on the number of observations.
    #[serde(default)]
    pub max_evaluations: Option<u64>,
    /// Run directory; CLI `--out` overrides.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// `[optimizer]` section; every field is optional and falls back to the
/// optimizer defaults. Field names match [`OptimizerConfig`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct OptimizerSection {
    pub sigma_search: Option<f64>,
    pub n_cand: Option<usize>,
    pub max_candidates: Option<usize>,
    pub n_resample: Option<u32>,
    pub resampling_enabled: Option<bool>,
    pub c_max: Option<f64>,
    pub acquisition_mode: Option<AcquisitionMode>,
    pub n_init: Option<usize>,
    pub seed: Option<u64>,
    pub model_log_cost: Option<bool>,
}

impl OptimizerSection {
    pub fn apply(&self, space: SearchSpace) -> OptimizerConfig {
        let mut c = OptimizerConfig::new(space);
        if let Some(v) = self.sigma_search {
            c.sigma_search = v;
        }
        if let Some(v) = self.n_cand {
            c.n_cand = v;
        }
        if let Some(v) = self.max_candidates {
            c.max_candidates = v;
        }
        if let Some(v) = self.n_resample {
            c.n_resample = v;
        }
        if let Some(v) = self.resampling_enabled {
            c.resampling_enabled = v;
        }
        if let Some(v) = self.c_max {
            c.c_max = v;
        }
        if let Some(v) = self.acquisition_mode {
            c.acquisition_mode = v;
        }
        if let Some(v) = self.n_init {
            c.n_init = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.model_log_cost {
            c.model_log_cost = v;
        }
        c
    }
}

/// A full tuning-run configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuneConfig {
    pub search_space: Vec<ParamSpec>,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    pub harness: HarnessSection,
}

impl TuneConfig {
    pub fn parse(text: &str) -> Result<TuneConfig> {
        let config: TuneConfig =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<TuneConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text)
    }

    // the negated comparison is deliberate: it rejects NaN as well
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if self.harness.parallelism == 0 {
            return Err(HarnessError::Config("parallelism must be at least 1".into()));
        }
        let count = self.harness.worker_command.matches("{suggestion_file}").count();
        if count != 1 {
            return Err(HarnessError::Config(format!(
                "worker_command must reference {{suggestion_file}} exactly once (found {count})"
            )));
        }
        if !(self.harness.wall_clock_budget > 0.0) {
            return Err(HarnessError::Config("wall_clock_budget must be positive".into()));
        }
        SearchSpace::new(self.search_space.clone()).map_err(HarnessError::Space)?;
        Ok(())
    }

    pub fn space(&self) -> SearchSpace {
        SearchSpace::new(self.search_space.clone()).expect("validated at load time")
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        self.optimizer.apply(self.space())
    }
}
