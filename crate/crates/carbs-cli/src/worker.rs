//! Evaluation-worker protocol: single-document JSON files exchanged through
//! paths substituted into the worker command template.
//!
//! The harness writes a suggestion document, launches the command with
//! `{suggestion_file}` (and optionally `{result_file}`) substituted, and
//! expects the worker to leave a result document behind. A missing or
//! malformed result becomes a failure observation.

use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};

use carbs::ParamMap;
use serde::{Deserialize, Serialize};

use crate::{HarnessError, Result};

/// Document handed to the worker.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuggestionDoc {
    pub suggestion_id: u64,
    pub params: ParamMap,
    pub is_resample: bool,
}

/// Document the worker writes back. `cost` may be omitted, in which case the
/// harness records its own wall-clock measurement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultDoc {
    pub suggestion_id: u64,
    pub output: f64,
    #[serde(default)]
    pub cost: Option<f64>,
    #[serde(default)]
    pub is_failure: Option<bool>,
}

pub fn write_suggestion(path: &Path, doc: &SuggestionDoc) -> Result<()> {
    let mut text = serde_json::to_string(doc).expect("suggestion doc serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

pub fn read_result(path: &Path) -> std::result::Result<ResultDoc, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("no result file: {e}"))?;
    serde_json::from_str(text.trim()).map_err(|e| format!("malformed result document: {e}"))
}

/// File names used inside each per-evaluation job directory.
pub const SUGGESTION_FILE: &str = "suggestion.json";
pub const RESULT_FILE: &str = "result.json";

/// A launched evaluation.
pub struct WorkerHandle {
    pub suggestion_id: u64,
    pub result_path: PathBuf,
    pub started: std::time::Instant,
    pub child: Child,
}

/// Substitute the file placeholders and launch the worker through `sh -c`.
pub fn spawn_worker(
    template: &str,
    job_dir: &Path,
    suggestion_id: u64,
) -> Result<WorkerHandle> {
    let suggestion_path = job_dir.join(SUGGESTION_FILE);
    let result_path = job_dir.join(RESULT_FILE);
    let command = template
        .replace("{suggestion_file}", &suggestion_path.display().to_string())
        .replace("{result_file}", &result_path.display().to_string());
    let child = Command::new("sh")
        .arg("-c")
        .arg(&command)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| HarnessError::io(job_dir, e))?;
    Ok(WorkerHandle {
        suggestion_id,
        result_path,
        started: std::time::Instant::now(),
        child,
    })
}

/// Outcome of collecting one finished worker.
#[derive(Debug, Clone)]
pub enum WorkerOutcome {
    Ok { output: f64, cost: f64, is_failure: bool },
    /// Worker crashed, produced no result, or produced garbage; recorded as a
    /// failure with the elapsed wall-clock as cost.
    Failed { diagnostic: String, elapsed: f64 },
}

/// Interpret a finished worker's result file.
pub fn collect_result(handle: &WorkerHandle) -> WorkerOutcome {
    let elapsed = handle.started.elapsed().as_secs_f64().max(1e-9);
    match read_result(&handle.result_path) {
        Ok(doc) => {
            if doc.suggestion_id != handle.suggestion_id {
                return WorkerOutcome::Failed {
                    diagnostic: format!(
                        "result suggestion_id {} does not match issued id {}",
                        doc.suggestion_id, handle.suggestion_id
                    ),
                    elapsed,
                };
            }
            let is_failure = doc.is_failure.unwrap_or(false);
            if !is_failure && !doc.output.is_finite() {
                return WorkerOutcome::Failed {
                    diagnostic: format!("non-finite output {}", doc.output),
                    elapsed,
                };
            }
            let cost = match doc.cost {
                Some(c) if c > 0.0 && c.is_finite() => c,
                Some(c) => {
                    return WorkerOutcome::Failed {
                        diagnostic: format!("non-positive cost {c}"),
                        elapsed,
                    }
                }
                None => elapsed,
            };
            WorkerOutcome::Ok { output: doc.output, cost, is_failure }
        }
        Err(diagnostic) => WorkerOutcome::Failed { diagnostic, elapsed },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suggestion_doc_round_trips_with_newline() {
        let dir = std::env::temp_dir().join(format!("carbs-worker-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let mut params = ParamMap::new();
        params.insert("lr".into(), 1e-3);
        let doc = SuggestionDoc { suggestion_id: 7, params, is_resample: true };
        let path = dir.join(SUGGESTION_FILE);
        write_suggestion(&path, &doc).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.ends_with('\n'));
        let back: SuggestionDoc = serde_json::from_str(text.trim()).unwrap();
        assert_eq!(back.suggestion_id, 7);
        assert!(back.is_resample);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn result_doc_defaults() {
        let doc: ResultDoc =
            serde_json::from_str(r#"{"suggestion_id": 3, "output": -1.5}"#).unwrap();
        assert_eq!(doc.cost, None);
        assert_eq!(doc.is_failure, None);
    }
}
