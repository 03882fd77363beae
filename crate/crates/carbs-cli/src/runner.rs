//! Run execution and persistence: the run-directory layout, the append-only
//! observation log, crash-safe snapshots, the sequential synthetic runner,
//! and the parallel subprocess coordinator.

use std::collections::VecDeque;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant, SystemTime};

use carbs::{Carbs, ParamMap, SearchSpace};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{OptimizerSection, TuneConfig};
use crate::problems::BenchProblem;
use crate::report;
use crate::tuner::{RandomTunerState, Tuner, TunerKind};
use crate::worker::{self, SuggestionDoc, WorkerHandle, WorkerOutcome};
use crate::{HarnessError, Result};

pub const OBSERVATIONS_FILE: &str = "observations.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.bin";
pub const HARNESS_STATE_FILE: &str = "harness_state.json";
pub const MANIFEST_FILE: &str = "run.toml";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.log";
pub const JOBS_DIR: &str = "jobs";

/// One line of the observation log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub suggestion_id: u64,
    pub params: ParamMap,
    pub output: f64,
    pub cost: f64,
    pub is_failure: bool,
    /// Wall-clock seconds since the epoch for subprocess runs; cumulative
    /// simulated cost for synthetic runs.
    pub timestamp: f64,
}

/// What a run directory contains, persisted as `run.toml`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum RunManifest {
    Tune { config: TuneConfig },
    Synthetic { spec: SyntheticRunSpec },
}

/// Everything needed to reproduce or resume a synthetic run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticRunSpec {
    pub problem: String,
    #[serde(default)]
    pub noise_std: f64,
    pub tuner: TunerKind,
    pub seed: u64,
    pub max_evaluations: u64,
    #[serde(default)]
    pub optimizer: OptimizerSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RngState {
    seed: [u8; 32],
    stream: u64,
    word_pos: u128,
}

impl RngState {
    fn capture(rng: &ChaCha8Rng) -> RngState {
        RngState { seed: rng.get_seed(), stream: rng.get_stream(), word_pos: rng.get_word_pos() }
    }

    fn rebuild(&self) -> ChaCha8Rng {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

/// Harness-side mutable state, persisted next to the optimizer snapshot.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct HarnessState {
    eval_count: u64,
    /// Seconds of tuning wall clock consumed across sessions (subprocess
    /// runs only).
    consumed_wall_secs: f64,
    /// Cumulative simulated cost (synthetic runs only).
    virtual_clock: f64,
    eval_rng: Option<RngState>,
    random_tuner: Option<RandomTunerState>,
}

/// Handle on a run directory.
#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<RunDir> {
        std::fs::create_dir_all(root).map_err(|e| HarnessError::io(root, e))?;
        let log = root.join(OBSERVATIONS_FILE);
        if log.exists() {
            return Err(HarnessError::Config(format!(
                "refusing to start a fresh run in {}: it already contains {}",
                root.display(),
                OBSERVATIONS_FILE
            )));
        }
        Ok(RunDir { root: root.to_path_buf() })
    }

    pub fn open(root: &Path) -> Result<RunDir> {
        if !root.join(MANIFEST_FILE).exists() {
            return Err(HarnessError::Config(format!(
                "{} is not a run directory (missing {})",
                root.display(),
                MANIFEST_FILE
            )));
        }
        Ok(RunDir { root: root.to_path_buf() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn write_atomic(&self, name: &str, bytes: &[u8]) -> Result<()> {
        let tmp = self.root.join(format!("{name}.tmp"));
        let path = self.root.join(name);
        std::fs::write(&tmp, bytes).map_err(|e| HarnessError::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| HarnessError::io(&path, e))
    }

    pub fn write_manifest(&self, manifest: &RunManifest) -> Result<()> {
        let text = toml::to_string_pretty(manifest)
            .map_err(|e| HarnessError::Config(format!("manifest serialization: {e}")))?;
        self.write_atomic(MANIFEST_FILE, text.as_bytes())
    }

    pub fn read_manifest(&self) -> Result<RunManifest> {
        let path = self.path(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
        toml::from_str(&text).map_err(|e| HarnessError::Config(format!("manifest: {e}")))
    }

    /// Write-ahead append of one observation line.
    pub fn append_observation(&self, record: &ObservationRecord) -> Result<()> {
        let path = self.path(OBSERVATIONS_FILE);
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| HarnessError::io(&path, e))?;
        let mut line = serde_json::to_string(record).expect("record serializes");
        line.push('\n');
        file.write_all(line.as_bytes()).map_err(|e| HarnessError::io(&path, e))?;
        file.sync_data().map_err(|e| HarnessError::io(&path, e))
    }

    /// Read the observation log, tolerating (and trimming) a torn final line
    /// from an interrupted append.
    pub fn read_observations(&self) -> Result<Vec<ObservationRecord>> {
        let path = self.path(OBSERVATIONS_FILE);
        if !path.exists() {
            return Ok(Vec::new());
        }
        let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
        let mut records = Vec::new();
        let mut valid_bytes = 0usize;
        let mut offset = 0usize;
        for (idx, line) in text.split_inclusive('\n').enumerate() {
            let complete = line.ends_with('\n');
            match serde_json::from_str::<ObservationRecord>(line.trim_end()) {
                Ok(rec) if complete => {
                    records.push(rec);
                    valid_bytes = offset + line.len();
                }
                Ok(_) | Err(_) if offset + line.len() == text.len() => {
                    // torn trailing line: drop it and truncate below
                    log::warn!("dropping torn trailing line in {}", path.display());
                    break;
                }
                Ok(_) => unreachable!("only the last line can lack a newline"),
                Err(e) => {
                    return Err(HarnessError::BadLog { line: idx + 1, reason: e.to_string() })
                }
            }
            offset += line.len();
        }
        if valid_bytes < text.len() {
            let file = std::fs::OpenOptions::new()
                .write(true)
                .open(&path)
                .map_err(|e| HarnessError::io(&path, e))?;
            file.set_len(valid_bytes as u64).map_err(|e| HarnessError::io(&path, e))?;
        }
        Ok(records)
    }

    pub fn write_snapshot(&self, bytes: &[u8]) -> Result<()> {
        self.write_atomic(SNAPSHOT_FILE, bytes)
    }

    pub fn read_snapshot(&self) -> Result<Vec<u8>> {
        let path = self.path(SNAPSHOT_FILE);
        std::fs::read(&path).map_err(|e| HarnessError::io(&path, e))
    }

    fn write_state(&self, state: &HarnessState) -> Result<()> {
        let bytes = serde_json::to_vec(state).expect("state serializes");
        self.write_atomic(HARNESS_STATE_FILE, &bytes)
    }

    fn read_state(&self) -> Result<HarnessState> {
        let path = self.path(HARNESS_STATE_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("harness state: {e}")))
    }

    pub fn append_diagnostic(&self, message: &str) -> Result<()> {
        let path = self.path(DIAGNOSTICS_FILE);
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| HarnessError::io(&path, e))?;
        writeln!(file, "{message}").map_err(|e| HarnessError::io(&path, e))
    }
}

/// Outcome of a synthetic run: the full observation log (including any
/// resumed prefix) and the final tuner.
pub struct SyntheticOutcome {
    pub records: Vec<ObservationRecord>,
    pub tuner: Tuner,
    pub space: SearchSpace,
}

/// Run a synthetic problem to its evaluation budget, optionally persisting a
/// resumable run directory. Sequential and fully deterministic per seed.
pub fn run_synthetic(spec: &SyntheticRunSpec, out_dir: Option<&Path>) -> Result<SyntheticOutcome> {
    use rand::SeedableRng;
    let problem = BenchProblem::by_name(&spec.problem)?.with_noise(spec.noise_std);
    let space = problem.space();
    let mut config = spec.optimizer.apply(space.clone());
    config.seed = spec.seed;
    let tuner = Tuner::new(spec.tuner, config)?;
    // decouple evaluation noise from the tuner's stream
    let eval_rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e37_79b9_7f4a_7c15);

    let dir = match out_dir {
        Some(root) => {
            let dir = RunDir::create(root)?;
            dir.write_manifest(&RunManifest::Synthetic { spec: spec.clone() })?;
            Some(dir)
        }
        None => None,
    };
    synthetic_loop(spec, &problem, space, tuner, eval_rng, 0.0, 0, Vec::new(), dir)
}

/// Continue a persisted synthetic run up to `max_evaluations` (the manifest's
/// budget unless overridden).
pub fn resume_synthetic(
    root: &Path,
    max_evaluations: Option<u64>,
) -> Result<SyntheticOutcome> {
    let dir = RunDir::open(root)?;
    let RunManifest::Synthetic { mut spec } = dir.read_manifest()? else {
        return Err(HarnessError::Config("run directory is not a synthetic run".into()));
    };
    if let Some(evals) = max_evaluations {
        spec.max_evaluations = evals;
        dir.write_manifest(&RunManifest::Synthetic { spec: spec.clone() })?;
    }
    let problem = BenchProblem::by_name(&spec.problem)?.with_noise(spec.noise_std);
    let space = problem.space();
    let state = dir.read_state()?;
    let records = dir.read_observations()?;

    let mut tuner = match spec.tuner {
        TunerKind::Carbs => Tuner::Carbs(Box::new(Carbs::restore(&dir.read_snapshot()?)?)),
        TunerKind::Random => {
            let ts = state
                .random_tuner
                .clone()
                .ok_or_else(|| HarnessError::Config("missing random tuner state".into()))?;
            Tuner::Random(Box::new(crate::tuner::RandomTuner::from_state(space.clone(), ts)))
        }
    };
    // write-ahead replay: log lines the snapshot has not seen yet
    if let Tuner::Carbs(carbs) = &mut tuner {
        let known: std::collections::BTreeSet<u64> =
            carbs.observations().iter().map(|o| o.suggestion_id).collect();
        for rec in records.iter().filter(|r| !known.contains(&r.suggestion_id)) {
            carbs.observe(rec.suggestion_id, rec.output, rec.cost, rec.is_failure)?;
        }
    }
    let eval_rng = state
        .eval_rng
        .as_ref()
        .map(|r| r.rebuild())
        .ok_or_else(|| HarnessError::Config("missing evaluation rng state".into()))?;

    synthetic_loop(
        &spec,
        &problem,
        space,
        tuner,
        eval_rng,
        state.virtual_clock,
        state.eval_count,
        records,
        Some(dir),
    )
}

#[allow(clippy::too_many_arguments)]
fn synthetic_loop(
    spec: &SyntheticRunSpec,
    problem: &BenchProblem,
    space: SearchSpace,
    mut tuner: Tuner,
    mut eval_rng: ChaCha8Rng,
    mut virtual_clock: f64,
    mut eval_count: u64,
    mut records: Vec<ObservationRecord>,
    dir: Option<RunDir>,
) -> Result<SyntheticOutcome> {
    let mut pending: VecDeque<(u64, ParamMap, bool)> = tuner.outstanding().into();
    while eval_count < spec.max_evaluations {
        let (suggestion_id, params) = match pending.pop_front() {
            Some((id, params, _)) => (id, params),
            None => {
                let s = tuner.suggest();
                (s.suggestion_id, s.params)
            }
        };
        let basic = space.to_basic(&params)?;
        let eval = problem.evaluate(&basic, &mut eval_rng);
        virtual_clock += eval.cost;
        tuner.observe(suggestion_id, eval.output, eval.cost, eval.is_failure)?;
        eval_count += 1;
        let record = ObservationRecord {
            suggestion_id,
            params,
            output: eval.output,
            cost: eval.cost,
            is_failure: eval.is_failure,
            timestamp: virtual_clock,
        };
        if let Some(dir) = &dir {
            dir.append_observation(&record)?;
            if let Tuner::Carbs(carbs) = &tuner {
                dir.write_snapshot(&carbs.snapshot())?;
            }
            dir.write_state(&HarnessState {
                eval_count,
                consumed_wall_secs: 0.0,
                virtual_clock,
                eval_rng: Some(RngState::capture(&eval_rng)),
                random_tuner: match &tuner {
                    Tuner::Random(r) => Some(r.state()),
                    Tuner::Carbs(_) => None,
                },
            })?;
        }
        records.push(record);
    }
    if let Some(dir) = &dir {
        report::write_reports(dir.root(), &space, &records)?;
    }
    Ok(SyntheticOutcome { records, tuner, space })
}

/// Start a fresh subprocess tuning run.
pub fn run_tune(config: &TuneConfig, out_dir: &Path) -> Result<()> {
    config.validate()?;
    let dir = RunDir::create(out_dir)?;
    dir.write_manifest(&RunManifest::Tune { config: config.clone() })?;
    let carbs = Carbs::new(config.optimizer_config())?;
    tune_loop(config, dir, carbs, 0.0, Vec::new())
}

/// Resume a subprocess tuning run with whatever budget remains. Outstanding
/// suggestions from the interrupted session are re-dispatched.
pub fn resume_tune(root: &Path) -> Result<()> {
    let dir = RunDir::open(root)?;
    let RunManifest::Tune { config } = dir.read_manifest()? else {
        return Err(HarnessError::Config("run directory is not a subprocess tuning run".into()));
    };
    let mut carbs = Carbs::restore(&dir.read_snapshot()?)?;
    let records = dir.read_observations()?;
    let known: std::collections::BTreeSet<u64> =
        carbs.observations().iter().map(|o| o.suggestion_id).collect();
    for rec in records.iter().filter(|r| !known.contains(&r.suggestion_id)) {
        carbs.observe(rec.suggestion_id, rec.output, rec.cost, rec.is_failure)?;
    }
    let consumed = dir.read_state().map(|s| s.consumed_wall_secs).unwrap_or(0.0);
    tune_loop(&config, dir, carbs, consumed, records)
}

fn tune_loop(
    config: &TuneConfig,
    dir: RunDir,
    mut carbs: Carbs,
    consumed_wall_secs: f64,
    mut records: Vec<ObservationRecord>,
) -> Result<()> {
    let space = config.space();
    let started = Instant::now();
    let budget = (config.harness.wall_clock_budget - consumed_wall_secs).max(0.0);
    let deadline = started + Duration::from_secs_f64(budget);
    let eval_cap = config.harness.max_evaluations.unwrap_or(u64::MAX);

    let mut pending: VecDeque<(u64, ParamMap, bool)> = carbs
        .outstanding()
        .iter()
        .map(|o| (o.suggestion_id, o.params.clone(), o.is_resample))
        .collect();
    let mut slots: Vec<WorkerHandle> = Vec::new();

    let persist = |dir: &RunDir,
                   carbs: &Carbs,
                   record: &ObservationRecord,
                   records_len: u64,
                   started: Instant|
     -> Result<()> {
        dir.append_observation(record)?;
        dir.write_snapshot(&carbs.snapshot())?;
        dir.write_state(&HarnessState {
            eval_count: records_len,
            consumed_wall_secs: consumed_wall_secs + started.elapsed().as_secs_f64(),
            virtual_clock: 0.0,
            eval_rng: None,
            random_tuner: None,
        })
    };

    'outer: loop {
        let expired = Instant::now() >= deadline;
        let observed = records.len() as u64;
        let done = observed >= eval_cap;

        // launch workers while there is room, budget, and demand
        while !expired
            && !done
            && slots.len() < config.harness.parallelism
            && observed + (slots.len() as u64) < eval_cap
        {
            let (suggestion_id, params, is_resample) = match pending.pop_front() {
                Some(entry) => entry,
                None => {
                    let s = carbs.suggest();
                    (s.suggestion_id, s.params, s.is_resample)
                }
            };
            let job_dir = dir.path(JOBS_DIR).join(suggestion_id.to_string());
            std::fs::create_dir_all(&job_dir).map_err(|e| HarnessError::io(&job_dir, e))?;
            worker::write_suggestion(
                &job_dir.join(worker::SUGGESTION_FILE),
                &SuggestionDoc { suggestion_id, params, is_resample },
            )?;
            slots.push(worker::spawn_worker(
                &config.harness.worker_command,
                &job_dir,
                suggestion_id,
            )?);
        }

        if slots.is_empty() && (expired || done) {
            break 'outer;
        }

        // collect any finished workers
        let mut idx = 0;
        while idx < slots.len() {
            let finished = match slots[idx].child.try_wait() {
                Ok(Some(_)) => true,
                Ok(None) => false,
                Err(_) => true,
            };
            if !finished {
                idx += 1;
                continue;
            }
            let handle = slots.swap_remove(idx);
            let outcome = worker::collect_result(&handle);
            let (output, cost, is_failure) = match outcome {
                WorkerOutcome::Ok { output, cost, is_failure } => (output, cost, is_failure),
                WorkerOutcome::Failed { diagnostic, elapsed } => {
                    let msg = format!(
                        "suggestion {}: worker failed: {diagnostic}",
                        handle.suggestion_id
                    );
                    log::warn!("{msg}");
                    dir.append_diagnostic(&msg)?;
                    (0.0, elapsed, true)
                }
            };
            carbs.observe(handle.suggestion_id, output, cost, is_failure)?;
            let record = ObservationRecord {
                suggestion_id: handle.suggestion_id,
                params: carbs
                    .observations()
                    .iter()
                    .find(|o| o.suggestion_id == handle.suggestion_id)
                    .map(|o| o.params.clone())
                    .unwrap_or_default(),
                output,
                cost,
                is_failure,
                timestamp: SystemTime::now()
                    .duration_since(SystemTime::UNIX_EPOCH)
                    .map(|d| d.as_secs_f64())
                    .unwrap_or(0.0),
            };
            persist(&dir, &carbs, &record, records.len() as u64 + 1, started)?;
            records.push(record);
        }

        if Instant::now() >= deadline {
            // budget expired: cancel whatever is still running
            for slot in slots.iter_mut() {
                let _ = slot.child.kill();
                let _ = slot.child.wait();
            }
            slots.clear();
            break 'outer;
        }
        std::thread::sleep(Duration::from_millis(15));
    }

    report::write_reports(dir.root(), &space, &records)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_spec(seed: u64, evals: u64) -> SyntheticRunSpec {
        SyntheticRunSpec {
            problem: "sphere".into(),
            noise_std: 0.0,
            tuner: TunerKind::Carbs,
            seed,
            max_evaluations: evals,
            optimizer: OptimizerSection::default(),
        }
    }

    #[test]
    fn synthetic_run_is_deterministic_in_memory() {
        let a = run_synthetic(&sphere_spec(3, 12), None).unwrap();
        let b = run_synthetic(&sphere_spec(3, 12), None).unwrap();
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn synthetic_run_respects_budget_and_timestamps() {
        let out = run_synthetic(&sphere_spec(1, 8), None).unwrap();
        assert_eq!(out.records.len(), 8);
        // sphere costs 1.0 each; virtual clock counts up
        for (i, r) in out.records.iter().enumerate() {
            assert_eq!(r.timestamp, (i + 1) as f64);
        }
    }

    #[test]
    fn torn_log_lines_are_dropped() {
        let root = std::env::temp_dir().join(format!("carbs-torn-{}", std::process::id()));
        std::fs::remove_dir_all(&root).ok();
        run_synthetic(&sphere_spec(2, 5), Some(&root)).unwrap();
        let log_path = root.join(OBSERVATIONS_FILE);
        let mut text = std::fs::read_to_string(&log_path).unwrap();
        let full_lines = text.lines().count();
        text.push_str("{\"suggestion_id\": 99, \"params\"");
        std::fs::write(&log_path, &text).unwrap();
        let dir = RunDir::open(&root).unwrap();
        let records = dir.read_observations().unwrap();
        assert_eq!(records.len(), full_lines);
        // the torn tail was truncated away
        let after = std::fs::read_to_string(&log_path).unwrap();
        assert!(after.ends_with('\n'));
        assert_eq!(after.lines().count(), full_lines);
        std::fs::remove_dir_all(&root).ok();
    }
}
