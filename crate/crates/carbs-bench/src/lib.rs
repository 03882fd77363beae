//! Shared fixtures for the criterion benchmarks.

use carbs::{
    Carbs, Observation, OptimizerConfig, ParamMap, ParamSpec, SearchSpace, SpaceType,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Four log-scaled parameters, the shape most tuning runs have.
pub fn bench_space() -> SearchSpace {
    SearchSpace::new(vec![
        ParamSpec::new("width", SpaceType::Log, 64.0).with_bounds(1.0, f64::INFINITY),
        ParamSpec::new("depth", SpaceType::Log, 4.0).with_bounds(1.0, f64::INFINITY),
        ParamSpec::new("lr", SpaceType::Log, 1e-3).with_bounds(0.0, f64::INFINITY),
        ParamSpec::new("l2", SpaceType::Log, 1e-2).with_bounds(0.0, f64::INFINITY),
    ])
    .unwrap()
}

/// Random basic-space design of `n` points in `d` dimensions.
pub fn random_inputs(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect()).collect()
}

/// Smooth deterministic targets for the random design.
pub fn smooth_targets(inputs: &[Vec<f64>]) -> Vec<f64> {
    inputs
        .iter()
        .map(|x| {
            let s: f64 = x.iter().sum();
            (s * 0.7).sin() - 0.1 * x.iter().map(|v| v * v).sum::<f64>()
        })
        .collect()
}

/// Random observations over (output, cost) for the Pareto benchmarks.
pub fn random_observations(n: usize, seed: u64) -> Vec<Observation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let mut params = ParamMap::new();
            params.insert("x".into(), i as f64);
            Observation {
                suggestion_id: i as u64,
                params,
                basic: vec![i as f64],
                output: rng.gen_range(-3.0..3.0),
                cost: rng.gen_range(0.5..100.0),
                is_failure: false,
            }
        })
        .collect()
}

/// An optimizer warmed up with `evals` synthetic observations, ready for a
/// model-path suggest call.
pub fn warmed_optimizer(evals: usize, seed: u64) -> Carbs {
    let space = bench_space();
    let mut config = OptimizerConfig::new(space);
    config.seed = seed;
    let mut carbs = Carbs::new(config).unwrap();
    for _ in 0..evals {
        let s = carbs.suggest();
        let basic: Vec<f64> = s.params.values().copied().collect();
        let log_cost = (basic[3].max(1.0)).ln(); // width drives cost
        let output = -basic.iter().map(|v| v.ln().abs().min(10.0)).sum::<f64>();
        carbs
            .observe(s.suggestion_id, output, log_cost.exp().max(0.1), false)
            .unwrap();
    }
    carbs
}
