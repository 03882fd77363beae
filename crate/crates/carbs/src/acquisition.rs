//! Candidate generation from the Pareto-local search distribution and the
//! clamped, cost-aware, failure-aware expected-improvement score.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::gp::GPModel;
use crate::math::{self, normal_cdf};
use crate::pareto::ParetoSet;

/// Which baseline the expected improvement is computed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AcquisitionMode {
    /// Pareto value clamped from below by the value at a random threshold
    /// cost (the default).
    #[serde(rename = "ei-th")]
    EiThreshold,
    /// Pareto value only (no clamping).
    #[serde(rename = "ei-pf")]
    EiPareto,
    /// Global best output (plain expected improvement, no Pareto baseline).
    #[serde(rename = "ei-max")]
    EiMax,
}

/// A proposed basic-space point with its search-density weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub basic: Vec<f64>,
    /// Index of the Pareto member this candidate was drawn around.
    pub origin: usize,
    /// max_i exp(−|x_i − x|² / 2σ²) over the front members.
    pub search_density: f64,
}

/// A candidate with all acquisition components evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidate {
    pub candidate: Candidate,
    pub predicted_cost: f64,
    pub pareto_value: f64,
    pub threshold_value: f64,
    pub ei: f64,
    pub p_success: f64,
    /// `ei × search_density × p_success`
    pub score: f64,
}

/// The Pareto-front surrogate over log cost. Fronts with fewer than two
/// members degenerate to a constant predictor at the single member's value.
#[derive(Debug, Clone)]
pub enum FrontModel {
    Fitted(GPModel),
    Constant(f64),
}

impl FrontModel {
    pub fn predict_mean(&self, log_cost: f64) -> f64 {
        match self {
            FrontModel::Fitted(gp) => gp.predict(&[log_cost]).mean,
            FrontModel::Constant(v) => *v,
        }
    }
}

/// Models consulted while scoring one round of candidates.
pub struct AcquisitionModels<'a> {
    /// Output surrogate (already conditioned on hallucinated outstanding
    /// suggestions when parallel evaluations are in flight).
    pub output: &'a GPModel,
    /// Cost surrogate; predicts log cost when `log_cost` is set.
    pub cost: &'a GPModel,
    pub front: &'a FrontModel,
    /// Failure surrogate; `None` until the first failure is observed.
    pub failure: Option<&'a GPModel>,
    /// Best warped output observed so far (baseline for [`AcquisitionMode::EiMax`]).
    pub y_max: f64,
    /// Whether the cost surrogate works on ln(cost).
    pub log_cost: bool,
}

/// Draw `per_member` candidates around each front member from isotropic
/// Gaussians of radius `sigma_search`, tagging each with its search density.
pub fn generate_candidates<R: Rng>(
    pareto: &ParetoSet,
    sigma_search: f64,
    per_member: usize,
    rng: &mut R,
) -> Vec<Candidate> {
    assert!(sigma_search > 0.0 && per_member >= 1);
    let members = pareto.members();
    let mut out = Vec::with_capacity(members.len() * per_member);
    for (origin, member) in members.iter().enumerate() {
        for _ in 0..per_member {
            let basic: Vec<f64> = member
                .basic
                .iter()
                .map(|&c| c + sigma_search * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let search_density = search_density(pareto, sigma_search, &basic);
            out.push(Candidate { basic, origin, search_density });
        }
    }
    out
}

/// Unnormalized local-search density: the max over front members of a
/// Gaussian bump of radius `sigma_search` at the member.
pub fn search_density(pareto: &ParetoSet, sigma_search: f64, basic: &[f64]) -> f64 {
    let inv = 1.0 / (2.0 * sigma_search * sigma_search);
    pareto
        .members()
        .iter()
        .map(|m| {
            let d2: f64 = m
                .basic
                .iter()
                .zip(basic.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (-d2 * inv).exp()
        })
        .fold(0.0, f64::max)
}

/// Closed-form E[max(X − baseline, 0)] for X ~ posterior.
pub fn expected_improvement(posterior: crate::gp::Posterior, baseline: f64) -> f64 {
    math::expected_improvement(posterior.mean, posterior.variance, baseline)
}

/// Predicted cost and Pareto value for one candidate: the cost model's mean
/// (exponentiated under log-cost modeling) fed through the front model.
pub fn pareto_baseline(
    front: &FrontModel,
    cost_model: &GPModel,
    log_cost: bool,
    basic: &[f64],
) -> (f64, f64) {
    let mean = cost_model.predict(basic).mean;
    let predicted_cost = if log_cost { mean.exp() } else { mean.max(f64::MIN_POSITIVE) };
    let pareto_value = front.predict_mean(predicted_cost.max(f64::MIN_POSITIVE).ln());
    (predicted_cost, pareto_value)
}

/// Draw the round's threshold cost log-uniformly across the front's cost
/// range and evaluate the front model there.
pub fn sample_threshold<R: Rng>(
    pareto: &ParetoSet,
    front: &FrontModel,
    rng: &mut R,
) -> (f64, f64) {
    let lo = pareto.min_cost().expect("threshold needs a non-empty front");
    let hi = pareto.max_cost().expect("threshold needs a non-empty front");
    let cost = if lo >= hi {
        lo
    } else {
        let u: f64 = rng.gen();
        (lo.ln() + u * (hi.ln() - lo.ln())).exp()
    };
    (cost, front.predict_mean(cost.ln()))
}

/// Probability that an evaluation at `basic` succeeds: E[H(−GP_fail)], i.e.
/// Φ(−μ/σ) under the failure model's posterior; 1 while no failure has been
/// observed.
pub fn p_success(failure_model: Option<&GPModel>, basic: &[f64]) -> f64 {
    let Some(model) = failure_model else {
        return 1.0;
    };
    let post = model.predict(basic);
    if post.variance <= 0.0 {
        return if post.mean < 0.0 {
            1.0
        } else if post.mean > 0.0 {
            0.0
        } else {
            0.5
        };
    }
    normal_cdf(-post.mean / post.variance.sqrt())
}

/// Result of scoring a candidate round.
#[derive(Debug, Clone)]
pub struct Selection {
    pub best: ScoredCandidate,
    /// Every candidate exceeded the cost ceiling; the cheapest one was
    /// returned instead.
    pub cost_ceiling_fallback: bool,
}

/// Score all candidates and return the one maximizing
/// `EI × P_search × P_success`, after removing candidates whose predicted
/// cost exceeds `max_cost`. If the ceiling removes everything, fall back to
/// the cheapest candidate and flag it.
pub fn score_and_select<R: Rng>(
    candidates: &[Candidate],
    models: &AcquisitionModels<'_>,
    pareto: &ParetoSet,
    mode: AcquisitionMode,
    max_cost: f64,
    rng: &mut R,
) -> Option<Selection> {
    if candidates.is_empty() {
        return None;
    }
    let threshold_value = match mode {
        AcquisitionMode::EiThreshold => sample_threshold(pareto, models.front, rng).1,
        _ => f64::NEG_INFINITY,
    };

    // prediction cursors reuse their buffers across the candidate sweep
    let mut output_pred = models.output.predictor();
    let mut cost_pred = models.cost.predictor();
    let mut failure_pred = models.failure.map(|m| m.predictor());
    let mut score_one = |cand: &Candidate| -> ScoredCandidate {
        let cost_mean = cost_pred.predict(&cand.basic).mean;
        let predicted_cost =
            if models.log_cost { cost_mean.exp() } else { cost_mean.max(f64::MIN_POSITIVE) };
        let pareto_value = models.front.predict_mean(predicted_cost.max(f64::MIN_POSITIVE).ln());
        let baseline = match mode {
            AcquisitionMode::EiThreshold => pareto_value.max(threshold_value),
            AcquisitionMode::EiPareto => pareto_value,
            AcquisitionMode::EiMax => models.y_max,
        };
        let ei = expected_improvement(output_pred.predict(&cand.basic), baseline);
        let p_success = match failure_pred.as_mut() {
            None => 1.0,
            Some(pred) => {
                let post = pred.predict(&cand.basic);
                if post.variance <= 0.0 {
                    if post.mean < 0.0 {
                        1.0
                    } else if post.mean > 0.0 {
                        0.0
                    } else {
                        0.5
                    }
                } else {
                    normal_cdf(-post.mean / post.variance.sqrt())
                }
            }
        };
        ScoredCandidate {
            candidate: cand.clone(),
            predicted_cost,
            pareto_value,
            threshold_value,
            ei,
            p_success,
            score: ei * cand.search_density * p_success,
        }
    };

    let mut best: Option<ScoredCandidate> = None;
    let mut cheapest: Option<ScoredCandidate> = None;
    for cand in candidates {
        let scored = score_one(cand);
        match &cheapest {
            Some(c) if c.predicted_cost <= scored.predicted_cost => {}
            _ => cheapest = Some(scored.clone()),
        }
        if scored.predicted_cost > max_cost {
            continue;
        }
        match &best {
            Some(b) if b.score >= scored.score => {}
            _ => best = Some(scored),
        }
    }

    match best {
        Some(best) => Some(Selection { best, cost_ceiling_fallback: false }),
        None => Some(Selection {
            best: cheapest.expect("candidates is non-empty"),
            cost_ceiling_fallback: true,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::Posterior;
    use crate::pareto::{group, grouped_pareto, Observation};
    use crate::space::ParamMap;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn front_of(points: &[(f64, f64, f64)]) -> ParetoSet {
        // (basic x, output, cost)
        let obs: Vec<Observation> = points
            .iter()
            .enumerate()
            .map(|(i, &(x, y, c))| {
                let mut params = ParamMap::new();
                params.insert("x".into(), x);
                Observation {
                    suggestion_id: i as u64,
                    params,
                    basic: vec![x],
                    output: y,
                    cost: c,
                    is_failure: false,
                }
            })
            .collect();
        grouped_pareto(&group(&obs))
    }

    #[test]
    fn density_is_one_at_front_points() {
        let front = front_of(&[(0.0, 1.0, 1.0), (2.0, 2.0, 2.0)]);
        assert!((search_density(&front, 0.3, &[0.0]) - 1.0).abs() < 1e-12);
        assert!((search_density(&front, 0.3, &[2.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn density_at_one_sigma() {
        let front = front_of(&[(0.0, 1.0, 1.0)]);
        let d = search_density(&front, 0.5, &[0.5]);
        assert!((d - (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn candidate_spread_matches_sigma() {
        let front = front_of(&[(0.0, 1.0, 1.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sigma = 0.3;
        let cands = generate_candidates(&front, sigma, 10_000, &mut rng);
        let mean: f64 = cands.iter().map(|c| c.basic[0]).sum::<f64>() / cands.len() as f64;
        let var: f64 = cands.iter().map(|c| (c.basic[0] - mean).powi(2)).sum::<f64>()
            / cands.len() as f64;
        let std = var.sqrt();
        assert!((std - sigma).abs() / sigma < 0.05, "std {std}");
    }

    #[test]
    fn ei_known_value() {
        // mean 0, baseline 1, sd 1: ~0.08332
        let ei = expected_improvement(Posterior { mean: 0.0, variance: 1.0 }, 1.0);
        assert!((ei - 0.08332).abs() < 2e-5, "{ei}");
    }

    #[test]
    fn p_success_without_failures_is_one() {
        assert_eq!(p_success(None, &[0.0]), 1.0);
    }

    #[test]
    fn threshold_degenerates_on_single_member_front() {
        let front = front_of(&[(0.0, 1.0, 3.5)]);
        let model = FrontModel::Constant(0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (c, y) = sample_threshold(&front, &model, &mut rng);
        assert_eq!(c, 3.5);
        assert_eq!(y, 0.7);
    }

    #[test]
    fn baseline_tracks_a_monotone_front() {
        use crate::gp::{FitOptions, GPModel};
        use crate::kernel::KernelSpec;
        // synthetic monotone front: warped output rises with log cost
        let costs = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
        let front_inputs: Vec<Vec<f64>> = costs.iter().map(|c: &f64| vec![c.ln()]).collect();
        let front_targets: Vec<f64> = costs.iter().map(|c| 0.4 * c.ln() - 1.0).collect();
        let gp_pf = GPModel::fit(
            &front_inputs,
            &front_targets,
            KernelSpec::rbf(),
            &FitOptions::default(),
        )
        .unwrap();
        let front = FrontModel::Fitted(gp_pf);

        // cost model over a 1-d basic space: ln c = 2 x
        let xs: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 * 0.3 - 1.5]).collect();
        let log_costs: Vec<f64> = xs.iter().map(|x| 2.0 * x[0]).collect();
        let gp_c = GPModel::fit(
            &xs,
            &log_costs,
            KernelSpec::linear_plus_matern(),
            &FitOptions::default(),
        )
        .unwrap();

        let mut last = f64::NEG_INFINITY;
        for x in [-1.0, -0.5, 0.0, 0.5, 1.0] {
            let (cost, value) = pareto_baseline(&front, &gp_c, true, &[x]);
            assert!((cost.ln() - 2.0 * x).abs() < 0.2, "cost model off at {x}: {cost}");
            assert!(value > last, "front value not monotone at {x}");
            last = value;
        }

        // a flat front predicts the same value at any cost
        let flat = FrontModel::Constant(0.7);
        let (_, v1) = pareto_baseline(&flat, &gp_c, true, &[-1.0]);
        let (_, v2) = pareto_baseline(&flat, &gp_c, true, &[1.0]);
        assert_eq!(v1, v2);
    }

    #[test]
    fn selection_prefers_density_and_feasibility() {
        use crate::gp::{FitOptions, GPModel};
        use crate::kernel::KernelSpec;
        let front = front_of(&[(0.0, 1.0, 1.0), (1.0, 2.0, 2.0)]);
        let xs: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 * 0.4 - 1.4]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x[0] * 0.5).collect();
        let cost_targets: Vec<f64> = xs.iter().map(|x| x[0]).collect();
        let gp_y =
            GPModel::fit(&xs, &ys, KernelSpec::linear_plus_matern(), &FitOptions::default())
                .unwrap();
        let gp_c = GPModel::fit(
            &xs,
            &cost_targets,
            KernelSpec::linear_plus_matern(),
            &FitOptions::default(),
        )
        .unwrap();
        let front_model = FrontModel::Constant(-1.0);
        let models = AcquisitionModels {
            output: &gp_y,
            cost: &gp_c,
            front: &front_model,
            failure: None,
            y_max: 0.0,
            log_cost: true,
        };

        // identical candidates except search density: the denser one wins
        let candidates = vec![
            Candidate { basic: vec![0.3], origin: 0, search_density: 0.5 },
            Candidate { basic: vec![0.3], origin: 0, search_density: 1.0 },
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sel = score_and_select(
            &candidates,
            &models,
            &front,
            AcquisitionMode::EiPareto,
            f64::INFINITY,
            &mut rng,
        )
        .unwrap();
        assert_eq!(sel.best.candidate.search_density, 1.0);
        assert!(!sel.cost_ceiling_fallback);
        assert!((sel.best.score - sel.best.ei * sel.best.p_success).abs() < 1e-12);

        // a candidate whose cost prediction exceeds the ceiling is excluded
        let candidates = vec![
            Candidate { basic: vec![1.2], origin: 0, search_density: 1.0 }, // pricey
            Candidate { basic: vec![-1.2], origin: 0, search_density: 0.1 }, // cheap
        ];
        let sel = score_and_select(
            &candidates,
            &models,
            &front,
            AcquisitionMode::EiPareto,
            1.0, // ceiling in natural cost units: exp(1.2) is over it
            &mut rng,
        )
        .unwrap();
        assert_eq!(sel.best.candidate.basic, vec![-1.2]);
        assert!(!sel.cost_ceiling_fallback);

        // everything over the ceiling: fall back to the cheapest, flagged
        let candidates = vec![
            Candidate { basic: vec![1.2], origin: 0, search_density: 1.0 },
            Candidate { basic: vec![0.8], origin: 0, search_density: 1.0 },
        ];
        let sel = score_and_select(
            &candidates,
            &models,
            &front,
            AcquisitionMode::EiPareto,
            1e-6,
            &mut rng,
        )
        .unwrap();
        assert!(sel.cost_ceiling_fallback);
        assert_eq!(sel.best.candidate.basic, vec![0.8]);

        // EI-max with a hopeless baseline still selects without error
        let models_wide = AcquisitionModels { y_max: 1e6, ..models };
        let candidates = vec![
            Candidate { basic: vec![0.0], origin: 0, search_density: 1.0 },
            Candidate { basic: vec![0.4], origin: 0, search_density: 1.0 },
        ];
        let sel = score_and_select(
            &candidates,
            &models_wide,
            &front,
            AcquisitionMode::EiMax,
            f64::INFINITY,
            &mut rng,
        )
        .unwrap();
        assert!(sel.best.score < 1e-5);
    }

    #[test]
    fn threshold_is_log_uniform() {
        let front = front_of(&[(0.0, 1.0, 1.0), (1.0, 2.0, 100.0)]);
        let model = FrontModel::Constant(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let n = 10_000;
        let mut lns: Vec<f64> = (0..n)
            .map(|_| sample_threshold(&front, &model, &mut rng).0.ln())
            .collect();
        lns.sort_by(f64::total_cmp);
        let span = 100.0f64.ln();
        let mut d_max: f64 = 0.0;
        for (i, &v) in lns.iter().enumerate() {
            let f = v / span;
            let hi = ((i + 1) as f64 / n as f64 - f).abs();
            let lo = (f - i as f64 / n as f64).abs();
            d_max = d_max.max(hi).max(lo);
        }
        // KS critical value at the 1% level
        let crit = 1.628 / (n as f64).sqrt();
        assert!(d_max < crit, "KS statistic {d_max} >= {crit}");
    }
}
