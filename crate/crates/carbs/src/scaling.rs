//! Scaling-law extraction: per-parameter linear regression of basic-space
//! coordinates against log cost over the Pareto-front members.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pareto::ParetoSet;
use crate::space::{ParamMap, SearchSpace, SpaceType};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScalingError {
    #[error("front has {0} members; need at least 3 for a regression")]
    FrontTooSmall(usize),
    #[error("front costs have zero variance; slope is unidentifiable")]
    ZeroCostVariance,
    #[error("target cost must be positive, got {0}")]
    BadTargetCost(f64),
    #[error("scaling fit covers {fit} parameters but the space has {space}")]
    SpaceMismatch { fit: usize, space: usize },
}

/// Weighting of front members in the regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum WeightMode {
    #[default]
    Uniform,
    /// Weight each group by its sample count.
    BySampleCount,
}

/// Fitted line for one parameter: basic coordinate ≈ slope·ln(cost) + intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamScaling {
    pub name: String,
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub params: Vec<ParamScaling>,
    /// (min, max) mean cost among the front members used.
    pub cost_range: (f64, f64),
    pub front_size: usize,
}

/// Result of evaluating a scaling fit at a target cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub params: ParamMap,
    /// Target cost lies more than 10x outside the observed cost range.
    pub beyond_observed_range: bool,
}

/// Ordinary (optionally sample-count weighted) least squares of each basic
/// coordinate against ln(mean cost) over the front members.
pub fn fit_scaling(
    space: &SearchSpace,
    front: &ParetoSet,
    weights: WeightMode,
) -> Result<ScalingFit, ScalingError> {
    let members = front.members();
    let m = members.len();
    if m < 3 {
        return Err(ScalingError::FrontTooSmall(m));
    }
    let u: Vec<f64> = members.iter().map(|g| g.mean_cost.ln()).collect();
    let w: Vec<f64> = members
        .iter()
        .map(|g| match weights {
            WeightMode::Uniform => 1.0,
            WeightMode::BySampleCount => g.count as f64,
        })
        .collect();
    let w_sum: f64 = w.iter().sum();
    let u_bar = u.iter().zip(&w).map(|(ui, wi)| ui * wi).sum::<f64>() / w_sum;
    let s_uu: f64 = u.iter().zip(&w).map(|(ui, wi)| wi * (ui - u_bar).powi(2)).sum();
    if s_uu <= 0.0 {
        return Err(ScalingError::ZeroCostVariance);
    }

    let mut params = Vec::with_capacity(space.dimension());
    for (k, spec) in space.specs().iter().enumerate() {
        let x: Vec<f64> = members.iter().map(|g| g.basic[k]).collect();
        let x_bar = x.iter().zip(&w).map(|(xi, wi)| xi * wi).sum::<f64>() / w_sum;
        let s_ux: f64 = u
            .iter()
            .zip(&x)
            .zip(&w)
            .map(|((ui, xi), wi)| wi * (ui - u_bar) * (xi - x_bar))
            .sum();
        let slope = s_ux / s_uu;
        let intercept = x_bar - slope * u_bar;
        let ssr: f64 = u
            .iter()
            .zip(&x)
            .zip(&w)
            .map(|((ui, xi), wi)| wi * (xi - (slope * ui + intercept)).powi(2))
            .sum();
        let dof = (m - 2) as f64;
        let stderr = (ssr / dof / s_uu).sqrt();
        params.push(ParamScaling { name: spec.name.clone(), slope, intercept, stderr });
    }

    Ok(ScalingFit {
        params,
        cost_range: (members[0].mean_cost, members[m - 1].mean_cost),
        front_size: m,
    })
}

/// Evaluate each per-parameter line at ln(target_cost) and map back to
/// natural units. Targets more than 10x outside the fitted cost range are
/// flagged but still evaluated.
pub fn extrapolate(
    space: &SearchSpace,
    fit: &ScalingFit,
    target_cost: f64,
) -> Result<Extrapolation, ScalingError> {
    if !(target_cost > 0.0 && target_cost.is_finite()) {
        return Err(ScalingError::BadTargetCost(target_cost));
    }
    if fit.params.len() != space.dimension() {
        return Err(ScalingError::SpaceMismatch {
            fit: fit.params.len(),
            space: space.dimension(),
        });
    }
    let u = target_cost.ln();
    let basic: Vec<f64> = fit.params.iter().map(|p| p.slope * u + p.intercept).collect();
    let params = space.from_basic(&basic).expect("finite regression output");
    let (lo, hi) = fit.cost_range;
    let beyond = target_cost > 10.0 * hi || target_cost < lo / 10.0;
    Ok(Extrapolation { params, beyond_observed_range: beyond })
}

/// For Log-space parameters the fitted slope corresponds to a power law
/// `natural_value ∝ cost^(slope·scale)`; other space types have no power-law
/// reading.
pub fn power_law_exponent(spec: &crate::space::ParamSpec, scaling: &ParamScaling) -> Option<f64> {
    match spec.space_type {
        SpaceType::Log => Some(scaling.slope * spec.scale),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pareto::{group, grouped_pareto, Observation};
    use crate::space::{ParamSpec, SearchSpace};

    fn space_1d() -> SearchSpace {
        SearchSpace::new(vec![ParamSpec::new(
            "p",
            SpaceType::Log,
            1.0,
        )
        .with_bounds(0.0, f64::INFINITY)])
        .unwrap()
    }

    /// Synthetic front where the basic coordinate is exactly a·ln(cost) + b.
    fn exact_front(space: &SearchSpace, slope: f64, intercept: f64, costs: &[f64]) -> ParetoSet {
        let obs: Vec<Observation> = costs
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let basic = vec![slope * c.ln() + intercept];
                let params = space.from_basic(&basic).unwrap();
                Observation {
                    suggestion_id: i as u64,
                    params,
                    basic,
                    output: i as f64, // strictly increasing with cost
                    cost: c,
                    is_failure: false,
                }
            })
            .collect();
        grouped_pareto(&group(&obs))
    }

    #[test]
    fn recovers_exact_linear_relation() {
        let space = space_1d();
        let front = exact_front(&space, 0.5, 0.0, &[1.0, 2.0, 4.0, 8.0, 16.0]);
        let fit = fit_scaling(&space, &front, WeightMode::Uniform).unwrap();
        assert!((fit.params[0].slope - 0.5).abs() < 1e-9);
        assert!(fit.params[0].intercept.abs() < 1e-9);
        assert!(fit.params[0].stderr < 1e-9);
    }

    #[test]
    fn constant_param_has_zero_slope() {
        // one parameter rides the front, the other is pinned
        let space = SearchSpace::new(vec![
            ParamSpec::new("moving", SpaceType::Log, 1.0).with_bounds(0.0, f64::INFINITY),
            ParamSpec::new("fixed", SpaceType::Log, 1.0).with_bounds(0.0, f64::INFINITY),
        ])
        .unwrap();
        let costs = [1.0, 3.0, 9.0, 27.0];
        let obs: Vec<Observation> = costs
            .iter()
            .enumerate()
            .map(|(i, &c): (usize, &f64)| {
                let basic = vec![0.5 * c.ln(), 0.7];
                let params = space.from_basic(&basic).unwrap();
                Observation {
                    suggestion_id: i as u64,
                    params,
                    basic,
                    output: i as f64,
                    cost: c,
                    is_failure: false,
                }
            })
            .collect();
        let front = grouped_pareto(&group(&obs));
        let fit = fit_scaling(&space, &front, WeightMode::Uniform).unwrap();
        assert!(fit.params[1].slope.abs() <= fit.params[1].stderr.max(1e-12));
        assert!((fit.params[0].slope - 0.5).abs() < 1e-9);
    }

    #[test]
    fn slope_invariant_under_cost_rescaling() {
        let space = space_1d();
        let costs = [1.0, 2.0, 5.0, 11.0, 31.0];
        let front_a = exact_front(&space, 0.4, 0.1, &costs);
        let scaled: Vec<f64> = costs.iter().map(|c| c * 7.5).collect();
        // same basic coordinates, shifted costs
        let obs: Vec<Observation> = front_a
            .members()
            .iter()
            .zip(scaled.iter())
            .enumerate()
            .map(|(i, (g, &c))| Observation {
                suggestion_id: i as u64,
                params: g.params.clone(),
                basic: g.basic.clone(),
                output: i as f64,
                cost: c,
                is_failure: false,
            })
            .collect();
        let front_b = grouped_pareto(&group(&obs));
        let fit_a = fit_scaling(&space, &front_a, WeightMode::Uniform).unwrap();
        let fit_b = fit_scaling(&space, &front_b, WeightMode::Uniform).unwrap();
        assert!((fit_a.params[0].slope - fit_b.params[0].slope).abs() < 1e-9);
        assert!((fit_a.params[0].intercept - fit_b.params[0].intercept).abs() > 1e-6);
    }

    #[test]
    fn extrapolates_exact_front_closed_form() {
        let space = space_1d();
        let front = exact_front(&space, 0.5, 0.0, &[1.0, 2.0, 4.0, 8.0]);
        let fit = fit_scaling(&space, &front, WeightMode::Uniform).unwrap();
        let target = 32.0; // 4x the max cost
        let got = extrapolate(&space, &fit, target).unwrap();
        // basic = 0.5 ln(32); natural = exp(basic) for a Log param centered at 1
        let want = (0.5 * target.ln()).exp();
        assert!((got.params["p"] - want).abs() < 1e-6 * want);
        assert!(!got.beyond_observed_range);
    }

    #[test]
    fn flags_far_extrapolation() {
        let space = space_1d();
        let front = exact_front(&space, 0.5, 0.0, &[1.0, 2.0, 4.0]);
        let fit = fit_scaling(&space, &front, WeightMode::Uniform).unwrap();
        assert!(extrapolate(&space, &fit, 41.0).unwrap().beyond_observed_range);
        assert!(!extrapolate(&space, &fit, 39.0).unwrap().beyond_observed_range);
        assert!(extrapolate(&space, &fit, 0.05).unwrap().beyond_observed_range);
    }

    #[test]
    fn rejects_small_or_flat_fronts() {
        let space = space_1d();
        let front = exact_front(&space, 0.5, 0.0, &[1.0, 2.0]);
        assert!(matches!(
            fit_scaling(&space, &front, WeightMode::Uniform),
            Err(ScalingError::FrontTooSmall(2))
        ));
        assert!(matches!(
            extrapolate(&space, &ScalingFit {
                params: vec![ParamScaling { name: "p".into(), slope: 0.0, intercept: 0.0, stderr: 0.0 }],
                cost_range: (1.0, 2.0),
                front_size: 3,
            }, -1.0),
            Err(ScalingError::BadTargetCost(_))
        ));
    }

    #[test]
    fn recovers_power_law_under_noise() {
        use rand::{Rng, SeedableRng};
        // front from a known power law x* ∝ c^0.5 with 10% multiplicative
        // noise on 20 points
        let space = space_1d();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let obs: Vec<Observation> = (0..20)
            .map(|i| {
                let cost = 1.5f64.powi(i);
                let noise: f64 = 1.0 + 0.1 * rng.gen_range(-1.0..1.0);
                let mut params = ParamMap::new();
                params.insert("p".into(), cost.powf(0.5) * noise);
                let basic = space.to_basic(&params).unwrap();
                Observation {
                    suggestion_id: i as u64,
                    params,
                    basic,
                    output: i as f64,
                    cost,
                    is_failure: false,
                }
            })
            .collect();
        let front = grouped_pareto(&group(&obs));
        assert_eq!(front.len(), 20);
        let fit = fit_scaling(&space, &front, WeightMode::Uniform).unwrap();
        let slope = fit.params[0].slope;
        assert!((slope - 0.5).abs() <= 0.1, "recovered slope {slope}");
        // weighting by sample count is a no-op on all-singleton fronts
        let weighted = fit_scaling(&space, &front, WeightMode::BySampleCount).unwrap();
        assert_eq!(weighted.params[0].slope, slope);
    }

    #[test]
    fn power_law_identity_for_log_params() {
        // basic slope s with scale 2 means natural ∝ cost^(2s)
        let spec = ParamSpec::new("p", SpaceType::Log, 1.0)
            .with_bounds(0.0, f64::INFINITY)
            .with_scale(2.0);
        let space = SearchSpace::new(vec![spec.clone()]).unwrap();
        let costs = [1.0f64, 2.0, 4.0, 8.0, 16.0];
        // natural value follows cost^0.6 exactly: basic = ln(v)/scale = 0.3 ln c
        let obs: Vec<Observation> = costs
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let mut params = ParamMap::new();
                params.insert("p".into(), c.powf(0.6));
                let basic = space.to_basic(&params).unwrap();
                Observation {
                    suggestion_id: i as u64,
                    params,
                    basic,
                    output: i as f64,
                    cost: c,
                    is_failure: false,
                }
            })
            .collect();
        let front = grouped_pareto(&group(&obs));
        let fit = fit_scaling(&space, &front, WeightMode::Uniform).unwrap();
        let exponent = power_law_exponent(&spec, &fit.params[0]).unwrap();
        assert!((exponent - 0.6).abs() < 1e-9, "exponent {exponent}");
    }
}
