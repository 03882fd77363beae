//! Report emission: Pareto front, per-parameter scaling table, and per-
//! observation plot data as CSV next to the observation log.

use std::fmt::Write as _;
use std::path::Path;

use carbs::pareto::{apply_min_cost_floor, group, grouped_pareto};
use carbs::scaling::{fit_scaling, power_law_exponent, WeightMode};
use carbs::{Observation, ParetoSet, SearchSpace};

use crate::runner::ObservationRecord;
use crate::{HarnessError, Result};

pub const PARETO_CSV: &str = "pareto.csv";
pub const SCALING_CSV: &str = "scaling.csv";
pub const PLOTDATA_CSV: &str = "plotdata.csv";

/// Reconstruct optimizer-side observations from log records.
pub fn observations_from_records(
    space: &SearchSpace,
    records: &[ObservationRecord],
) -> Result<Vec<Observation>> {
    records
        .iter()
        .map(|r| {
            Ok(Observation {
                suggestion_id: r.suggestion_id,
                basic: space.to_basic(&r.params)?,
                params: r.params.clone(),
                output: r.output,
                cost: r.cost,
                is_failure: r.is_failure,
            })
        })
        .collect()
}

/// The front used in reports and scaling fits: the grouped Pareto set with
/// the low-cost floor, i.e. exactly the front the optimizer itself searches
/// around. The floor matters here too: members below it are dominated by
/// unconverged early samples and would drag scaling fits off the trend.
pub fn report_front(observations: &[Observation]) -> ParetoSet {
    let groups = group(observations);
    if groups.is_empty() {
        return ParetoSet::default();
    }
    apply_min_cost_floor(&groups, &grouped_pareto(&groups))
}

/// Write `pareto.csv`, `scaling.csv`, and `plotdata.csv` into `dir`.
/// An empty log produces header-only files.
pub fn write_reports(
    dir: &Path,
    space: &SearchSpace,
    records: &[ObservationRecord],
) -> Result<()> {
    let observations = observations_from_records(space, records)?;
    let front = report_front(&observations);
    let names: Vec<&str> = space.specs().iter().map(|s| s.name.as_str()).collect();

    // pareto.csv: front members ordered by cost
    let mut pareto = format!("cost,output,{}\n", names.join(","));
    for member in front.members() {
        let _ = write!(pareto, "{},{}", member.mean_cost, member.effective_output());
        for name in &names {
            let _ = write!(pareto, ",{}", member.params[*name]);
        }
        pareto.push('\n');
    }
    write_file(&dir.join(PARETO_CSV), &pareto)?;

    // scaling.csv: per-parameter regression against log cost
    let mut scaling = String::from("param,slope,stderr,power_law_exponent\n");
    if let Ok(fit) = fit_scaling(space, &front, WeightMode::Uniform) {
        for (spec, line) in space.specs().iter().zip(fit.params.iter()) {
            let exponent = power_law_exponent(spec, line)
                .map(|e| e.to_string())
                .unwrap_or_default();
            let _ = writeln!(
                scaling,
                "{},{},{},{}",
                line.name, line.slope, line.stderr, exponent
            );
        }
    }
    write_file(&dir.join(SCALING_CSV), &scaling)?;

    // plotdata.csv: every observation with a front-membership flag
    let front_keys: std::collections::BTreeSet<Vec<u64>> = front
        .members()
        .iter()
        .map(|g| g.params.values().map(|v| v.to_bits()).collect())
        .collect();
    let mut plot = format!("suggestion_id,cost,output,is_failure,is_front,{}\n", names.join(","));
    for rec in records {
        let key: Vec<u64> = rec.params.values().map(|v| v.to_bits()).collect();
        let is_front = !rec.is_failure && front_keys.contains(&key);
        let _ = write!(
            plot,
            "{},{},{},{},{}",
            rec.suggestion_id, rec.cost, rec.output, rec.is_failure, is_front
        );
        for name in &names {
            let _ = write!(plot, ",{}", rec.params[*name]);
        }
        plot.push('\n');
    }
    write_file(&dir.join(PLOTDATA_CSV), &plot)?;

    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}
