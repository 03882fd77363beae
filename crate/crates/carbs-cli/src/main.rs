//! `carbs` command line: run tuning against subprocess workers, resume
//! interrupted runs, re-emit reports, benchmark tuners on bundled synthetic
//! problems, and serve as the bundled evaluation worker.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use carbs_cli::bench::{bench_cell, BenchReport};
use carbs_cli::config::{OptimizerSection, TuneConfig};
use carbs_cli::problems::BenchProblem;
use carbs_cli::report;
use carbs_cli::runner::{self, RunDir, RunManifest};
use carbs_cli::tuner::TunerKind;
use carbs_cli::worker::{ResultDoc, SuggestionDoc};
use carbs_cli::HarnessError;

#[derive(Parser)]
#[command(name = "carbs", version, about = "Cost-aware Pareto-region Bayesian search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Start a tuning run from a config file.
    Tune {
        /// TOML config with [[search_space]], [optimizer], [harness].
        config: PathBuf,
        /// Run directory (defaults to the config's harness.output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Continue an interrupted run from its directory.
    Resume {
        run_dir: PathBuf,
        /// New evaluation budget for synthetic runs.
        #[arg(long)]
        evals: Option<u64>,
    },
    /// Recompute pareto.csv, scaling.csv, plotdata.csv for a run directory.
    Report { run_dir: PathBuf },
    /// Benchmark a tuner on the bundled synthetic problems.
    Bench {
        /// Problem name (sphere | cost_coupled | failure_region) or `all`.
        suite: String,
        #[arg(long, default_value = "carbs")]
        tuner: String,
        /// Number of seeds (0..seeds).
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        /// Evaluations per run.
        #[arg(long, default_value_t = 200)]
        evals: u64,
        /// Gaussian output noise added by the problem.
        #[arg(long, default_value_t = 0.0)]
        noise_std: f64,
        /// Write per-seed metrics CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bundled synthetic evaluation worker (reads a suggestion document,
    /// writes a result document).
    Worker {
        #[arg(long, default_value = "quadratic")]
        problem: String,
        #[arg(long)]
        suggestion: PathBuf,
        /// Result path; defaults to result.json beside the suggestion file.
        #[arg(long)]
        result: Option<PathBuf>,
        /// Leave the cost field out so the harness records wall-clock time.
        #[arg(long)]
        omit_cost: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> carbs_cli::Result<()> {
    match cli.command {
        Command::Tune { config, out } => {
            let tune = TuneConfig::load(&config)?;
            let out_dir = out
                .or_else(|| tune.harness.output_dir.clone())
                .ok_or_else(|| {
                    HarnessError::Config(
                        "no run directory: pass --out or set harness.output_dir".into(),
                    )
                })?;
            runner::run_tune(&tune, &out_dir)?;
            println!("run complete: {}", out_dir.display());
            Ok(())
        }
        Command::Resume { run_dir, evals } => {
            let dir = RunDir::open(&run_dir)?;
            match dir.read_manifest()? {
                RunManifest::Tune { .. } => runner::resume_tune(&run_dir).map(|_| ())?,
                RunManifest::Synthetic { .. } => {
                    runner::resume_synthetic(&run_dir, evals).map(|_| ())?
                }
            }
            println!("resume complete: {}", run_dir.display());
            Ok(())
        }
        Command::Report { run_dir } => {
            let dir = RunDir::open(&run_dir)?;
            let space = match dir.read_manifest()? {
                RunManifest::Tune { config } => config.space(),
                RunManifest::Synthetic { spec } => BenchProblem::by_name(&spec.problem)?.space(),
            };
            let records = dir.read_observations()?;
            report::write_reports(dir.root(), &space, &records)?;
            println!(
                "reports written: {} observations -> pareto.csv, scaling.csv, plotdata.csv",
                records.len()
            );
            Ok(())
        }
        Command::Bench { suite, tuner, seeds, evals, noise_std, out } => {
            let tuner = TunerKind::by_name(&tuner)?;
            let problems: Vec<BenchProblem> = if suite == "all" {
                ["sphere", "cost_coupled", "failure_region"]
                    .iter()
                    .map(|n| BenchProblem::by_name(n).map(|p| p.with_noise(noise_std)))
                    .collect::<carbs_cli::Result<_>>()?
            } else {
                vec![BenchProblem::by_name(&suite)?.with_noise(noise_std)]
            };
            let seed_list: Vec<u64> = (0..seeds).collect();
            let mut reports: Vec<BenchReport> = Vec::new();
            for problem in &problems {
                let report =
                    bench_cell(problem, tuner, &seed_list, evals, &OptimizerSection::default())?;
                print!("{}", report.table());
                reports.push(report);
            }
            if let Some(path) = out {
                let mut csv = String::new();
                for (i, r) in reports.iter().enumerate() {
                    let text = r.metrics_csv();
                    if i == 0 {
                        csv.push_str(&text);
                    } else {
                        // skip the repeated header
                        csv.push_str(text.split_once('\n').map(|x| x.1).unwrap_or(""));
                    }
                }
                std::fs::write(&path, csv).map_err(|e| HarnessError::io(&path, e))?;
                println!("metrics written to {}", path.display());
            }
            Ok(())
        }
        Command::Worker { problem, suggestion, result, omit_cost } => {
            let problem = BenchProblem::by_name(&problem)?;
            let doc_text = std::fs::read_to_string(&suggestion)
                .map_err(|e| HarnessError::io(&suggestion, e))?;
            let doc: SuggestionDoc = serde_json::from_str(doc_text.trim())
                .map_err(|e| HarnessError::Config(format!("bad suggestion document: {e}")))?;
            let space = problem.space();
            let basic = space.to_basic(&doc.params)?;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(doc.suggestion_id);
            let eval = problem.evaluate(&basic, &mut rng);
            let result_path =
                result.unwrap_or_else(|| suggestion.with_file_name("result.json"));
            let out_doc = ResultDoc {
                suggestion_id: doc.suggestion_id,
                output: eval.output,
                cost: if omit_cost { None } else { Some(eval.cost) },
                is_failure: Some(eval.is_failure),
            };
            let mut text = serde_json::to_string(&out_doc).expect("result doc serializes");
            text.push('\n');
            std::fs::write(&result_path, text).map_err(|e| HarnessError::io(&result_path, e))?;
            Ok(())
        }
    }
}
