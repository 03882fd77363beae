//! Pareto-front computation over (output, cost) observations: the raw strict
//! front, grouping of repeated parameter sets for noise control, the grouped
//! front, and the low-cost floor rule.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::ParamMap;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParetoError {
    #[error("no successful observations")]
    Empty,
}

/// One evaluated suggestion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub suggestion_id: u64,
    /// Natural-unit parameters, exactly as suggested (post-rounding).
    pub params: ParamMap,
    /// Basic-space coordinates of `params`.
    pub basic: Vec<f64>,
    /// Raw (unwarped) output; 0.0 placeholder for failures.
    pub output: f64,
    /// Evaluation cost, strictly positive (seconds unless the problem
    /// reports its own metric).
    pub cost: f64,
    pub is_failure: bool,
}

/// Aggregate of all successful observations sharing identical parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationGroup {
    pub params: ParamMap,
    pub basic: Vec<f64>,
    pub member_ids: Vec<u64>,
    pub mean_output: f64,
    pub max_output: f64,
    pub mean_cost: f64,
    pub count: usize,
}

impl ObservationGroup {
    /// The output this group competes with: the max for single observations
    /// (trivially equal to the mean), the mean once resampled.
    pub fn effective_output(&self) -> f64 {
        if self.count == 1 {
            self.max_output
        } else {
            self.mean_output
        }
    }
}

/// The grouped Pareto front, orderd by ascending mean cost. Both mean cost
/// and effective output increase strictly along the member list.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParetoSet {
    members: Vec<ObservationGroup>,
}

impl ParetoSet {
    pub fn members(&self) -> &[ObservationGroup] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn min_cost(&self) -> Option<f64> {
        self.members.first().map(|g| g.mean_cost)
    }

    pub fn max_cost(&self) -> Option<f64> {
        self.members.last().map(|g| g.mean_cost)
    }
}

/// Raw Pareto front under the strict rule: index `i` is on the front iff for
/// every other successful observation `j`, `y_i > y_j` or `c_i < c_j`.
/// Failures never enter the front. Returns ascending indices into the input.
pub fn raw_pareto(observations: &[Observation]) -> Result<Vec<usize>, ParetoError> {
    let successes: Vec<usize> = observations
        .iter()
        .enumerate()
        .filter(|(_, o)| !o.is_failure)
        .map(|(i, _)| i)
        .collect();
    if successes.is_empty() {
        return Err(ParetoError::Empty);
    }
    let points: Vec<(f64, f64)> = successes
        .iter()
        .map(|&i| (observations[i].output, observations[i].cost))
        .collect();
    let keep = strict_front(&points);
    let mut result: Vec<usize> = successes
        .into_iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(i, _)| i)
        .collect();
    result.sort_unstable();
    Ok(result)
}

/// Membership flags for the strict front over `(value, cost)` points:
/// `i` kept iff no `j != i` has `value_j >= value_i` and `cost_j <= cost_i`.
fn strict_front(points: &[(f64, f64)]) -> Vec<bool> {
    let n = points.len();
    let mut order: Vec<usize> = (0..n).collect();
    // cost ascending, value descending within equal cost
    order.sort_by(|&a, &b| {
        points[a]
            .1
            .total_cmp(&points[b].1)
            .then(points[b].0.total_cmp(&points[a].0))
    });

    let mut keep = vec![false; n];
    let mut best_value_before = f64::NEG_INFINITY;
    let mut block_start = 0;
    while block_start < n {
        let block_cost = points[order[block_start]].1;
        let mut block_end = block_start;
        while block_end < n && points[order[block_end]].1 == block_cost {
            block_end += 1;
        }
        let block = &order[block_start..block_end];
        let block_max = points[block[0]].0;
        let max_count = block.iter().filter(|&&i| points[i].0 == block_max).count();
        for &i in block {
            keep[i] = points[i].0 == block_max && max_count == 1 && block_max > best_value_before;
        }
        best_value_before = best_value_before.max(block_max);
        block_start = block_end;
    }
    keep
}

/// Group successful observations by exact (post-rounding) parameter values.
/// Failures are excluded from groups; callers track them separately for the
/// failure model. Groups come back in first-seen order.
pub fn group(observations: &[Observation]) -> Vec<ObservationGroup> {
    struct Agg {
        params: ParamMap,
        basic: Vec<f64>,
        member_ids: Vec<u64>,
        sum_output: f64,
        max_output: f64,
        sum_cost: f64,
    }
    let mut aggs: Vec<Agg> = Vec::new();
    let mut lookup: std::collections::HashMap<Vec<u64>, usize> = std::collections::HashMap::new();
    for obs in observations.iter().filter(|o| !o.is_failure) {
        let key: Vec<u64> = obs.params.values().map(|v| v.to_bits()).collect();
        match lookup.get(&key) {
            Some(&idx) => {
                let agg = &mut aggs[idx];
                agg.member_ids.push(obs.suggestion_id);
                agg.sum_output += obs.output;
                agg.sum_cost += obs.cost;
                agg.max_output = agg.max_output.max(obs.output);
            }
            None => {
                lookup.insert(key, aggs.len());
                aggs.push(Agg {
                    params: obs.params.clone(),
                    basic: obs.basic.clone(),
                    member_ids: vec![obs.suggestion_id],
                    sum_output: obs.output,
                    max_output: obs.output,
                    sum_cost: obs.cost,
                });
            }
        }
    }
    aggs.into_iter()
        .map(|agg| {
            let n = agg.member_ids.len();
            ObservationGroup {
                params: agg.params,
                basic: agg.basic,
                mean_output: agg.sum_output / n as f64,
                max_output: agg.max_output,
                mean_cost: agg.sum_cost / n as f64,
                count: n,
                member_ids: agg.member_ids,
            }
        })
        .collect()
}

/// The grouped Pareto set: group `i` survives iff for every other group `j`,
/// `v_i > v_j` or `c̄_i < c̄_j`, where a group's comparison value `v` is its
/// max output while it has a single sample and its mean output once
/// resampled.
pub fn grouped_pareto(groups: &[ObservationGroup]) -> ParetoSet {
    let points: Vec<(f64, f64)> = groups
        .iter()
        .map(|g| (g.effective_output(), g.mean_cost))
        .collect();
    let keep = strict_front(&points);
    let mut members: Vec<ObservationGroup> = groups
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(g, _)| g.clone())
        .collect();
    members.sort_by(|a, b| a.mean_cost.total_cmp(&b.mean_cost));
    ParetoSet { members }
}

/// Low-cost floor: the front starts at the best-performing group among the
/// cheapest 20% of all groups; anything cheaper is dropped.
pub fn apply_min_cost_floor(groups: &[ObservationGroup], pareto: &ParetoSet) -> ParetoSet {
    if groups.is_empty() {
        return pareto.clone();
    }
    let mut order: Vec<usize> = (0..groups.len()).collect();
    // cheapest first; among equal costs prefer the better performer
    order.sort_by(|&a, &b| {
        groups[a]
            .mean_cost
            .total_cmp(&groups[b].mean_cost)
            .then(groups[b].effective_output().total_cmp(&groups[a].effective_output()))
    });
    let k = ((0.2 * groups.len() as f64).ceil() as usize).max(1);
    let floor_idx = order[..k.min(order.len())]
        .iter()
        .copied()
        .max_by(|&a, &b| {
            groups[a]
                .effective_output()
                .total_cmp(&groups[b].effective_output())
                .then(groups[b].mean_cost.total_cmp(&groups[a].mean_cost))
        })
        .expect("non-empty floor candidates");
    let floor = &groups[floor_idx];

    let mut members = vec![floor.clone()];
    members.extend(
        pareto
            .members
            .iter()
            .filter(|g| {
                g.mean_cost > floor.mean_cost && g.effective_output() > floor.effective_output()
            })
            .cloned(),
    );
    ParetoSet { members }
}
