//! The suggest/observe state machine: bootstrap sampling around the search
//! center, surrogate refitting, the resampling schedule, hallucinated
//! conditioning for outstanding suggestions, and serializable run state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquisition::{
    generate_candidates, score_and_select, AcquisitionMode, AcquisitionModels, FrontModel,
};
use crate::gp::{FitOptions, GPModel, GpError};
use crate::kernel::KernelSpec;
use crate::pareto::{apply_min_cost_floor, group, grouped_pareto, Observation, ParetoSet};
use crate::space::{ParamMap, SearchSpace, SpaceError};
use crate::warp::QuantileWarp;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid optimizer config: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum ObserveError {
    #[error("suggestion {0} was never issued or is not outstanding")]
    UnknownSuggestion(u64),
    #[error("suggestion {0} has already been observed")]
    AlreadyObserved(u64),
    #[error("cost must be positive and finite, got {0}")]
    InvalidCost(f64),
    #[error("output must be finite for successful observations, got {0}")]
    InvalidOutput(f64),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("snapshot payload does not start with the expected magic bytes")]
    BadMagic,
    #[error("unsupported snapshot version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt snapshot payload: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// All knobs of the optimizer. Field names double as the config-file keys.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub space: SearchSpace,
    /// Radius (basic-space std) of the local search around front members.
    pub sigma_search: f64,
    /// Candidates drawn per front member each round.
    pub n_cand: usize,
    /// Hard cap on candidates per round, across all members.
    pub max_candidates: usize,
    /// One in every `n_resample` post-bootstrap suggestions re-evaluates a
    /// front member.
    pub n_resample: u32,
    pub resampling_enabled: bool,
    /// Cost ceiling: suggestions with predicted cost above this are removed.
    pub c_max: f64,
    pub acquisition_mode: AcquisitionMode,
    /// Random suggestions around the search center before the model loop
    /// starts.
    pub n_init: usize,
    pub seed: u64,
    /// Model ln(cost) rather than raw cost.
    pub model_log_cost: bool,
}

impl OptimizerConfig {
    pub fn new(space: SearchSpace) -> Self {
        OptimizerConfig {
            space,
            sigma_search: 0.3,
            n_cand: 100,
            max_candidates: 5000,
            n_resample: 4,
            resampling_enabled: true,
            c_max: f64::INFINITY,
            acquisition_mode: AcquisitionMode::EiThreshold,
            n_init: 5,
            seed: 0,
            model_log_cost: true,
        }
    }

    // negated comparisons are deliberate: they reject NaN as well
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if !(self.sigma_search > 0.0 && self.sigma_search.is_finite()) {
            return fail("sigma_search must be positive and finite");
        }
        if self.n_cand == 0 || self.max_candidates == 0 {
            return fail("n_cand and max_candidates must be at least 1");
        }
        if self.n_resample < 2 {
            return fail("n_resample must be at least 2");
        }
        if self.n_init == 0 {
            return fail("n_init must be at least 1");
        }
        if !(self.c_max > 0.0) {
            return fail("c_max must be positive");
        }
        Ok(())
    }
}

/// How a suggestion was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SuggestionKind {
    /// Random draw around the search center (fewer than `n_init` successes).
    Bootstrap,
    /// Scheduled re-evaluation of a front member.
    Resample,
    /// Acquisition-maximizing candidate from the surrogate loop.
    Model,
    /// Model step failed; fell back to a bootstrap-style draw.
    DegradedBootstrap,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuggestionMeta {
    pub kind: SuggestionKind,
    /// All candidates exceeded the cost ceiling; cheapest returned instead.
    pub cost_ceiling_fallback: bool,
    pub predicted_cost: Option<f64>,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Suggestion {
    pub suggestion_id: u64,
    pub params: ParamMap,
    pub is_resample: bool,
    pub metadata: SuggestionMeta,
}

/// A suggestion that has been issued but not yet observed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutstandingSuggestion {
    pub suggestion_id: u64,
    pub params: ParamMap,
    pub basic: Vec<f64>,
    pub is_resample: bool,
}

#[derive(Debug)]
enum ModelStepError {
    TooFewSuccesses(usize),
    DegenerateOutputs,
    Gp(GpError),
}

impl std::fmt::Display for ModelStepError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelStepError::TooFewSuccesses(n) => {
                write!(f, "only {n} successful observations; surrogates need 2")
            }
            ModelStepError::DegenerateOutputs => {
                write!(f, "all observed outputs are identical; no signal to model")
            }
            ModelStepError::Gp(e) => write!(f, "surrogate fit failed: {e}"),
        }
    }
}

impl From<GpError> for ModelStepError {
    fn from(e: GpError) -> Self {
        ModelStepError::Gp(e)
    }
}

const SNAPSHOT_MAGIC: &[u8; 8] = b"CARBSNP\x01";
const SNAPSHOT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SnapshotBody {
    config: OptimizerConfig,
    observations: Vec<Observation>,
    outstanding: Vec<OutstandingSuggestion>,
    next_suggestion_id: u64,
    post_bootstrap_issued: u64,
    rng_seed: [u8; 32],
    rng_stream: u64,
    rng_word_pos: u128,
}

/// The optimizer. `suggest` and `observe` must be externally serialized;
/// observations may arrive in any order relative to their suggestions.
#[derive(Debug, Clone)]
pub struct Carbs {
    config: OptimizerConfig,
    /// Observation log, ordered by suggestion id. Past entries are never
    /// mutated.
    observations: Vec<Observation>,
    outstanding: Vec<OutstandingSuggestion>,
    next_suggestion_id: u64,
    post_bootstrap_issued: u64,
    rng: ChaCha8Rng,
}

impl Carbs {
    pub fn new(config: OptimizerConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Carbs {
            config,
            observations: Vec::new(),
            outstanding: Vec::new(),
            next_suggestion_id: 0,
            post_bootstrap_issued: 0,
            rng,
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn outstanding(&self) -> &[OutstandingSuggestion] {
        &self.outstanding
    }

    pub fn success_count(&self) -> usize {
        self.observations.iter().filter(|o| !o.is_failure).count()
    }

    pub fn suggestions_issued(&self) -> u64 {
        self.next_suggestion_id
    }

    /// The grouped Pareto front with the low-cost floor applied, or `None`
    /// before the first successful observation.
    pub fn pareto_front(&self) -> Option<ParetoSet> {
        let groups = group(&self.observations);
        if groups.is_empty() {
            return None;
        }
        Some(apply_min_cost_floor(&groups, &grouped_pareto(&groups)))
    }

    /// Produce the next suggestion. Never fails: model problems degrade to a
    /// bootstrap-style draw with a logged warning.
    pub fn suggest(&mut self) -> Suggestion {
        if self.success_count() < self.config.n_init {
            let (params, _) = self.bootstrap_draw();
            return self.issue(params, false, SuggestionKind::Bootstrap, false, None, None);
        }

        self.post_bootstrap_issued += 1;
        if self.config.resampling_enabled
            && self.post_bootstrap_issued.is_multiple_of(u64::from(self.config.n_resample))
        {
            if let Some(params) = self.resample_target() {
                return self.issue(params, true, SuggestionKind::Resample, false, None, None);
            }
        }

        match self.model_step() {
            Ok((params, fallback, predicted_cost, score)) => self.issue(
                params,
                false,
                SuggestionKind::Model,
                fallback,
                Some(predicted_cost),
                Some(score),
            ),
            Err(err) => {
                log::warn!("model step failed ({err}); degrading to a bootstrap draw");
                let (params, _) = self.bootstrap_draw();
                self.issue(params, false, SuggestionKind::DegradedBootstrap, false, None, None)
            }
        }
    }

    /// Record the result of an outstanding suggestion.
    pub fn observe(
        &mut self,
        suggestion_id: u64,
        output: f64,
        cost: f64,
        is_failure: bool,
    ) -> Result<(), ObserveError> {
        let pos = match self.outstanding.iter().position(|o| o.suggestion_id == suggestion_id) {
            Some(p) => p,
            None => {
                return Err(
                    if self.observations.iter().any(|o| o.suggestion_id == suggestion_id) {
                        ObserveError::AlreadyObserved(suggestion_id)
                    } else {
                        ObserveError::UnknownSuggestion(suggestion_id)
                    },
                )
            }
        };
        if !(cost > 0.0 && cost.is_finite()) {
            return Err(ObserveError::InvalidCost(cost));
        }
        if !is_failure && !output.is_finite() {
            return Err(ObserveError::InvalidOutput(output));
        }
        let entry = self.outstanding.remove(pos);
        let basic = self.config.space.to_basic(&entry.params)?;
        let obs = Observation {
            suggestion_id,
            params: entry.params,
            basic,
            output: if output.is_finite() { output } else { 0.0 },
            cost,
            is_failure,
        };
        let at = self
            .observations
            .binary_search_by(|o| o.suggestion_id.cmp(&suggestion_id))
            .unwrap_err();
        self.observations.insert(at, obs);
        Ok(())
    }

    /// Serialize the full run state (config, counters, rng, log).
    pub fn snapshot(&self) -> Vec<u8> {
        let body = SnapshotBody {
            config: self.config.clone(),
            observations: self.observations.clone(),
            outstanding: self.outstanding.clone(),
            next_suggestion_id: self.next_suggestion_id,
            post_bootstrap_issued: self.post_bootstrap_issued,
            rng_seed: self.rng.get_seed(),
            rng_stream: self.rng.get_stream(),
            rng_word_pos: self.rng.get_word_pos(),
        };
        let mut out = Vec::new();
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        out.extend(bincode::serialize(&body).expect("snapshot serialization is infallible"));
        out
    }

    /// Rebuild a state whose subsequent suggestion stream matches the
    /// snapshotted one.
    pub fn restore(bytes: &[u8]) -> Result<Self, SnapshotError> {
        if bytes.len() < SNAPSHOT_MAGIC.len() + 4 || &bytes[..8] != SNAPSHOT_MAGIC {
            return Err(SnapshotError::BadMagic);
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != SNAPSHOT_VERSION {
            return Err(SnapshotError::UnsupportedVersion(version));
        }
        let body: SnapshotBody = bincode::deserialize(&bytes[12..])
            .map_err(|e| SnapshotError::Corrupt(e.to_string()))?;
        body.config.validate()?;
        let mut rng = ChaCha8Rng::from_seed(body.rng_seed);
        rng.set_stream(body.rng_stream);
        rng.set_word_pos(body.rng_word_pos);
        Ok(Carbs {
            config: body.config,
            observations: body.observations,
            outstanding: body.outstanding,
            next_suggestion_id: body.next_suggestion_id,
            post_bootstrap_issued: body.post_bootstrap_issued,
            rng,
        })
    }

    fn issue(
        &mut self,
        params: ParamMap,
        is_resample: bool,
        kind: SuggestionKind,
        cost_ceiling_fallback: bool,
        predicted_cost: Option<f64>,
        score: Option<f64>,
    ) -> Suggestion {
        let suggestion_id = self.next_suggestion_id;
        self.next_suggestion_id += 1;
        let basic = self
            .config
            .space
            .to_basic(&params)
            .expect("issued params always map back to basic space");
        self.outstanding.push(OutstandingSuggestion {
            suggestion_id,
            params: params.clone(),
            basic,
            is_resample,
        });
        Suggestion {
            suggestion_id,
            params,
            is_resample,
            metadata: SuggestionMeta { kind, cost_ceiling_fallback, predicted_cost, score },
        }
    }

    /// Gaussian draw of radius `sigma_search` around the search center.
    fn bootstrap_draw(&mut self) -> (ParamMap, Vec<f64>) {
        let d = self.config.space.dimension();
        let basic: Vec<f64> = (0..d)
            .map(|_| self.config.sigma_search * self.rng.sample::<f64, _>(StandardNormal))
            .collect();
        let params = self
            .config
            .space
            .from_basic(&basic)
            .expect("finite bootstrap draw");
        (params, basic)
    }

    /// Front member with the fewest samples (ties: lowest mean cost),
    /// returning its exact stored parameters.
    fn resample_target(&self) -> Option<ParamMap> {
        let front = self.pareto_front()?;
        front
            .members()
            .iter()
            .min_by(|a, b| {
                a.count
                    .cmp(&b.count)
                    .then(a.mean_cost.total_cmp(&b.mean_cost))
            })
            .map(|g| g.params.clone())
    }

    fn model_step(&mut self) -> Result<(ParamMap, bool, f64, f64), ModelStepError> {
        let successes: Vec<&Observation> =
            self.observations.iter().filter(|o| !o.is_failure).collect();
        if successes.len() < 2 {
            return Err(ModelStepError::TooFewSuccesses(successes.len()));
        }

        let raw_outputs: Vec<f64> = successes.iter().map(|o| o.output).collect();
        let warp = QuantileWarp::fit(&raw_outputs);
        if warp.is_degenerate() {
            return Err(ModelStepError::DegenerateOutputs);
        }
        let inputs: Vec<Vec<f64>> = successes.iter().map(|o| o.basic.clone()).collect();
        let warped: Vec<f64> = raw_outputs.iter().map(|&y| warp.warp(y)).collect();
        let y_max = warped.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        let fit_seed = self.rng.gen::<u64>();
        let fit_opts = |offset: u64| FitOptions {
            seed: fit_seed.wrapping_add(offset),
            ..FitOptions::default()
        };

        let gp_y = GPModel::fit(&inputs, &warped, KernelSpec::linear_plus_matern(), &fit_opts(0))?;

        let cost_targets: Vec<f64> = successes
            .iter()
            .map(|o| if self.config.model_log_cost { o.cost.ln() } else { o.cost })
            .collect();
        let gp_c =
            GPModel::fit(&inputs, &cost_targets, KernelSpec::linear_plus_matern(), &fit_opts(1))?;

        let gp_fail = if self.observations.iter().any(|o| o.is_failure) {
            let all_inputs: Vec<Vec<f64>> =
                self.observations.iter().map(|o| o.basic.clone()).collect();
            let labels: Vec<f64> = self
                .observations
                .iter()
                .map(|o| if o.is_failure { 1.0 } else { -1.0 })
                .collect();
            Some(GPModel::fit(
                &all_inputs,
                &labels,
                KernelSpec::linear_plus_matern(),
                &fit_opts(2),
            )?)
        } else {
            None
        };

        let groups = group(&self.observations);
        let front = apply_min_cost_floor(&groups, &grouped_pareto(&groups));

        let front_model = if front.len() >= 2 {
            let fx: Vec<Vec<f64>> =
                front.members().iter().map(|g| vec![g.mean_cost.ln()]).collect();
            let fy: Vec<f64> =
                front.members().iter().map(|g| warp.warp(g.effective_output())).collect();
            FrontModel::Fitted(GPModel::fit(&fx, &fy, KernelSpec::rbf(), &fit_opts(3))?)
        } else {
            FrontModel::Constant(warp.warp(front.members()[0].effective_output()))
        };

        // Hallucinate outstanding suggestions with one joint draw so parallel
        // suggestions diversify; the draws never enter the observation log.
        let gp_y = if self.outstanding.is_empty() {
            gp_y
        } else {
            let pending: Vec<Vec<f64>> =
                self.outstanding.iter().map(|o| o.basic.clone()).collect();
            let hallucinated = gp_y.thompson_sample(&pending, &mut self.rng);
            gp_y.condition_on(&pending, &hallucinated)?
        };

        let per_member = self
            .config
            .n_cand
            .min((self.config.max_candidates / front.len()).max(1))
            .max(1);
        let candidates =
            generate_candidates(&front, self.config.sigma_search, per_member, &mut self.rng);

        let models = AcquisitionModels {
            output: &gp_y,
            cost: &gp_c,
            front: &front_model,
            failure: gp_fail.as_ref(),
            y_max,
            log_cost: self.config.model_log_cost,
        };
        let selection = score_and_select(
            &candidates,
            &models,
            &front,
            self.config.acquisition_mode,
            self.config.c_max,
            &mut self.rng,
        )
        .expect("candidate set is non-empty");

        if selection.cost_ceiling_fallback {
            log::warn!(
                "all candidates exceeded the cost ceiling {}; suggesting the cheapest",
                self.config.c_max
            );
        }

        let params = self
            .config
            .space
            .from_basic(&selection.best.candidate.basic)
            .expect("candidate coordinates are finite");
        Ok((
            params,
            selection.cost_ceiling_fallback,
            selection.best.predicted_cost,
            selection.best.score,
        ))
    }
}
