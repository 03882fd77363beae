//! Tuner abstraction for the benchmark suite: the real optimizer plus a
//! random-search baseline sampling bootstrap-style around the search center.

use carbs::{
    Carbs, ObserveError, OptimizerConfig, ParamMap, SearchSpace, Suggestion, SuggestionKind,
    SuggestionMeta,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TunerKind {
    Carbs,
    Random,
}

impl TunerKind {
    pub fn by_name(name: &str) -> Result<TunerKind> {
        match name {
            "carbs" => Ok(TunerKind::Carbs),
            "random" => Ok(TunerKind::Random),
            other => Err(HarnessError::UnknownTuner(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TunerKind::Carbs => "carbs",
            TunerKind::Random => "random",
        }
    }
}

/// Random-search baseline: every suggestion is an independent Gaussian draw
/// of radius `sigma` around the search center.
#[derive(Debug, Clone)]
pub struct RandomTuner {
    space: SearchSpace,
    sigma: f64,
    next_id: u64,
    outstanding: Vec<u64>,
    rng: ChaCha8Rng,
}

/// Serializable state of a [`RandomTuner`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomTunerState {
    pub sigma: f64,
    pub next_id: u64,
    pub outstanding: Vec<u64>,
    pub rng_seed: [u8; 32],
    pub rng_stream: u64,
    pub rng_word_pos: u128,
}

impl RandomTuner {
    pub fn new(space: SearchSpace, sigma: f64, seed: u64) -> RandomTuner {
        RandomTuner {
            space,
            sigma,
            next_id: 0,
            outstanding: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn state(&self) -> RandomTunerState {
        RandomTunerState {
            sigma: self.sigma,
            next_id: self.next_id,
            outstanding: self.outstanding.clone(),
            rng_seed: self.rng.get_seed(),
            rng_stream: self.rng.get_stream(),
            rng_word_pos: self.rng.get_word_pos(),
        }
    }

    pub fn from_state(space: SearchSpace, state: RandomTunerState) -> RandomTuner {
        let mut rng = ChaCha8Rng::from_seed(state.rng_seed);
        rng.set_stream(state.rng_stream);
        rng.set_word_pos(state.rng_word_pos);
        RandomTuner {
            space,
            sigma: state.sigma,
            next_id: state.next_id,
            outstanding: state.outstanding,
            rng,
        }
    }

    fn suggest(&mut self) -> Suggestion {
        let basic: Vec<f64> = (0..self.space.dimension())
            .map(|_| self.sigma * self.rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let params = self.space.from_basic(&basic).expect("finite draw");
        let suggestion_id = self.next_id;
        self.next_id += 1;
        self.outstanding.push(suggestion_id);
        Suggestion {
            suggestion_id,
            params,
            is_resample: false,
            metadata: SuggestionMeta {
                kind: SuggestionKind::Bootstrap,
                cost_ceiling_fallback: false,
                predicted_cost: None,
                score: None,
            },
        }
    }

    fn observe(&mut self, id: u64) -> std::result::Result<(), ObserveError> {
        match self.outstanding.iter().position(|&o| o == id) {
            Some(pos) => {
                self.outstanding.remove(pos);
                Ok(())
            }
            None => Err(ObserveError::UnknownSuggestion(id)),
        }
    }
}

/// Either tuner behind one ask/tell surface.
pub enum Tuner {
    Carbs(Box<Carbs>),
    Random(Box<RandomTuner>),
}

impl Tuner {
    pub fn new(kind: TunerKind, config: OptimizerConfig) -> Result<Tuner> {
        Ok(match kind {
            TunerKind::Carbs => Tuner::Carbs(Box::new(Carbs::new(config)?)),
            TunerKind::Random => {
                Tuner::Random(Box::new(RandomTuner::new(config.space, config.sigma_search, config.seed)))
            }
        })
    }

    pub fn kind(&self) -> TunerKind {
        match self {
            Tuner::Carbs(_) => TunerKind::Carbs,
            Tuner::Random(_) => TunerKind::Random,
        }
    }

    pub fn suggest(&mut self) -> Suggestion {
        match self {
            Tuner::Carbs(c) => c.suggest(),
            Tuner::Random(r) => r.suggest(),
        }
    }

    pub fn observe(
        &mut self,
        id: u64,
        output: f64,
        cost: f64,
        is_failure: bool,
    ) -> std::result::Result<(), ObserveError> {
        match self {
            Tuner::Carbs(c) => c.observe(id, output, cost, is_failure),
            Tuner::Random(r) => r.observe(id),
        }
    }

    /// Issued-but-unobserved suggestions that should be re-dispatched on
    /// resume (id, params, is_resample).
    pub fn outstanding(&self) -> Vec<(u64, ParamMap, bool)> {
        match self {
            Tuner::Carbs(c) => c
                .outstanding()
                .iter()
                .map(|o| (o.suggestion_id, o.params.clone(), o.is_resample))
                .collect(),
            // the random baseline does not retain params; outstanding draws
            // are simply dropped on resume
            Tuner::Random(_) => Vec::new(),
        }
    }
}
