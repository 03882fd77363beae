//! Cost-aware Bayesian hyperparameter optimization with local search around
//! the performance-cost Pareto front.
//!
//! The optimizer models output, evaluation cost, and failure probability with
//! Gaussian-process surrogates, proposes candidates near the current Pareto
//! set, and scores them with a clamped, cost- and failure-aware expected
//! improvement. Repeated resampling of front members keeps noisy objectives
//! honest, and per-parameter scaling laws can be read off the final front.
//!
//! The main entry point is [`Carbs`] with its ask/tell pair
//! [`Carbs::suggest`] / [`Carbs::observe`]:
//!
//! ```
//! use carbs::{Carbs, OptimizerConfig, ParamSpec, SearchSpace, SpaceType};
//!
//! let space = SearchSpace::new(vec![
//!     ParamSpec::new("lr", SpaceType::Log, 1e-3).with_bounds(0.0, f64::INFINITY),
//! ])?;
//! let mut tuner = Carbs::new(OptimizerConfig::new(space))?;
//! for _ in 0..5 {
//!     let s = tuner.suggest();
//!     let objective = -(s.params["lr"].ln() + 7.0).powi(2); // pretend evaluation
//!     tuner.observe(s.suggestion_id, objective, 1.0, false)?;
//! }
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod acquisition;
pub mod gp;
pub mod kernel;
pub mod linalg;
pub mod math;
pub mod optimizer;
pub mod pareto;
pub mod scaling;
pub mod space;
pub mod warp;

pub use acquisition::{AcquisitionMode, Candidate, FrontModel, ScoredCandidate};
pub use gp::{FitOptions, GPModel, GpError, Posterior};
pub use kernel::{HyperParams, KernelKind, KernelSpec};
pub use optimizer::{
    Carbs, ConfigError, ObserveError, OptimizerConfig, OutstandingSuggestion, SnapshotError,
    Suggestion, SuggestionKind, SuggestionMeta,
};
pub use pareto::{Observation, ObservationGroup, ParetoError, ParetoSet};
pub use scaling::{Extrapolation, ParamScaling, ScalingError, ScalingFit, WeightMode};
pub use space::{ParamMap, ParamSpec, SearchSpace, SpaceError, SpaceType};
pub use warp::QuantileWarp;
