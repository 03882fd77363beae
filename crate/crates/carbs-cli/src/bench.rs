//! Synthetic benchmark suite: runs a tuner over bundled problems across
//! seeds and aggregates the metrics used by the comparison tables.

use std::fmt::Write as _;

use crate::config::OptimizerSection;
use crate::problems::BenchProblem;
use crate::report;
use crate::runner::{run_synthetic, ObservationRecord, SyntheticRunSpec};
use crate::tuner::TunerKind;
use crate::Result;

/// Metrics of one seeded run.
#[derive(Debug, Clone)]
pub struct SeedMetrics {
    pub seed: u64,
    /// Best successful output observed over the whole run.
    pub best_output: f64,
    /// First evaluation index (1-based) whose running best crosses the
    /// problem's success threshold.
    pub evals_to_threshold: Option<u64>,
    /// Running best output after each evaluation.
    pub running_best: Vec<f64>,
    /// (mean cost, effective output) of the final front, sorted by cost.
    pub front: Vec<(f64, f64)>,
    pub failures: u64,
    pub records: Vec<ObservationRecord>,
}

/// All seeds of one (problem, tuner) cell.
#[derive(Debug, Clone)]
pub struct BenchReport {
    pub problem: String,
    pub tuner: TunerKind,
    pub noise_std: f64,
    pub max_evaluations: u64,
    pub seeds: Vec<SeedMetrics>,
}

impl BenchReport {
    pub fn median_best(&self) -> f64 {
        median(self.seeds.iter().map(|s| s.best_output))
    }

    /// Median across seeds of the running best at evaluation `k` (1-based).
    pub fn median_running_best(&self, k: u64) -> f64 {
        median(self.seeds.iter().map(|s| s.running_best[(k - 1) as usize]))
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "problem={} tuner={} evals={} noise_std={}",
            self.problem,
            self.tuner.name(),
            self.max_evaluations,
            self.noise_std
        );
        let _ = writeln!(out, "{:>6} {:>14} {:>10} {:>9} {:>6}", "seed", "best", "to-thresh", "front", "fails");
        for s in &self.seeds {
            let _ = writeln!(
                out,
                "{:>6} {:>14.6} {:>10} {:>9} {:>6}",
                s.seed,
                s.best_output,
                s.evals_to_threshold.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
                s.front.len(),
                s.failures
            );
        }
        let _ = writeln!(out, "median best output: {:.6}", self.median_best());
        out
    }

    pub fn metrics_csv(&self) -> String {
        let mut out = String::from(
            "problem,tuner,seed,best_output,evals_to_threshold,front_size,failures\n",
        );
        for s in &self.seeds {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                self.problem,
                self.tuner.name(),
                s.seed,
                s.best_output,
                s.evals_to_threshold.map(|v| v.to_string()).unwrap_or_default(),
                s.front.len(),
                s.failures
            );
        }
        out
    }
}

pub fn median(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    assert!(!v.is_empty());
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Run one (problem, tuner, seed) cell.
pub fn run_one(
    problem: &BenchProblem,
    tuner: TunerKind,
    seed: u64,
    max_evaluations: u64,
    optimizer: &OptimizerSection,
) -> Result<SeedMetrics> {
    let spec = SyntheticRunSpec {
        problem: problem.name().to_string(),
        noise_std: problem.noise_std,
        tuner,
        seed,
        max_evaluations,
        optimizer: optimizer.clone(),
    };
    let outcome = run_synthetic(&spec, None)?;
    metrics_from_records(problem, seed, &outcome.records, &outcome.space)
}

pub fn metrics_from_records(
    problem: &BenchProblem,
    seed: u64,
    records: &[ObservationRecord],
    space: &carbs::SearchSpace,
) -> Result<SeedMetrics> {
    let threshold = problem.success_threshold();
    let mut best = f64::NEG_INFINITY;
    let mut running_best = Vec::with_capacity(records.len());
    let mut evals_to_threshold = None;
    let mut failures = 0;
    for (i, r) in records.iter().enumerate() {
        if r.is_failure {
            failures += 1;
        } else if r.output > best {
            best = r.output;
        }
        running_best.push(best);
        if evals_to_threshold.is_none() && best >= threshold {
            evals_to_threshold = Some(i as u64 + 1);
        }
    }
    let observations = report::observations_from_records(space, records)?;
    let front = report::report_front(&observations)
        .members()
        .iter()
        .map(|g| (g.mean_cost, g.effective_output()))
        .collect();
    Ok(SeedMetrics {
        seed,
        best_output: best,
        evals_to_threshold,
        running_best,
        front,
        failures,
        records: records.to_vec(),
    })
}

/// Run the full cell across seeds. Seeds run on two worker threads; results
/// are collected in seed order so the output is deterministic.
pub fn bench_cell(
    problem: &BenchProblem,
    tuner: TunerKind,
    seeds: &[u64],
    max_evaluations: u64,
    optimizer: &OptimizerSection,
) -> Result<BenchReport> {
    let mut metrics: Vec<Option<SeedMetrics>> = (0..seeds.len()).map(|_| None).collect();
    let errors = std::sync::Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for (idx, &seed) in seeds.iter().enumerate() {
            let problem = problem.clone();
            let optimizer = optimizer.clone();
            let errors = &errors;
            handles.push((
                idx,
                scope.spawn(move || {
                    match run_one(&problem, tuner, seed, max_evaluations, &optimizer) {
                        Ok(m) => Some(m),
                        Err(e) => {
                            errors.lock().unwrap().push(format!("seed {seed}: {e}"));
                            None
                        }
                    }
                }),
            ));
        }
        for (idx, handle) in handles {
            metrics[idx] = handle.join().expect("bench thread panicked");
        }
    });
    let errors = errors.into_inner().unwrap();
    if let Some(msg) = errors.into_iter().next() {
        return Err(crate::HarnessError::Config(format!("bench run failed: {msg}")));
    }
    Ok(BenchReport {
        problem: problem.name().to_string(),
        tuner,
        noise_std: problem.noise_std,
        max_evaluations,
        seeds: metrics.into_iter().map(|m| m.expect("all seeds succeeded")).collect(),
    })
}

/// Best achievable output of a cost-sorted front at spend `c` (the front's
/// step-function envelope); −∞ below its coverage.
pub fn best_at(front: &[(f64, f64)], c: f64) -> f64 {
    front
        .iter()
        .take_while(|&&(fc, _)| fc <= c)
        .map(|&(_, fy)| fy)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Whether `front` dominates `other`: wherever both envelopes are defined,
/// `front`'s achievable output matches or beats `other`'s, and its best
/// member is at least as good overall. Costs below either front's coverage
/// say nothing about tradeoff quality and are excluded.
pub fn front_dominates(front: &[(f64, f64)], other: &[(f64, f64)]) -> bool {
    let (Some(&(f_min, _)), Some(&(_, f_best))) = (front.first(), front.last()) else {
        return false;
    };
    let (Some(&(o_min, _)), Some(&(_, o_best))) = (other.first(), other.last()) else {
        return true;
    };
    if f_best < o_best {
        return false;
    }
    let lo = f_min.max(o_min);
    other
        .iter()
        .filter(|&&(oc, _)| oc >= lo)
        .all(|&(oc, oy)| best_at(front, oc) >= oy)
}
