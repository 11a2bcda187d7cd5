//! `stepsearch`: hyperparameter search for footstep models and evaluation of
//! verification submissions.
//!
//! Exit status is 0 on success, 1 when a run or input file fails, and 2 for
//! command-line usage errors.

mod bench;
mod config;
mod evaluate;
mod search;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use stepsearch_eval::Normalization;

use crate::bench::BenchArgs;
use crate::evaluate::{EvalArgs, ScoreArgs};
use crate::search::{SearchArgs, Strategy};

#[derive(Parser)]
#[command(name = "stepsearch", version, about = "Hyperparameter search and biometric evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one search strategy and write its artifacts under the output directory.
    Search {
        #[arg(value_enum)]
        strategy: Strategy,
        /// Run configuration or bare search-space file (TOML or JSON).
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Overrides the configured budget.
        #[arg(long)]
        budget: Option<f64>,
        #[arg(long, env = "STEPSEARCH_OUTPUT", default_value = "runs")]
        output: PathBuf,
        /// Run directory name; defaults to `<strategy>-seed<seed>`.
        #[arg(long)]
        run_id: Option<String>,
        /// `synthetic`, or a JSON benchmark file whose space replaces the configured one.
        #[arg(long, default_value = "synthetic")]
        benchmark: String,
        /// External trainer command speaking the JSON-lines protocol.
        #[arg(long)]
        trainer_cmd: Option<String>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Continue from the last checkpoint of an existing run.
        #[arg(long)]
        resume: bool,
    },
    /// Score a submission against a probe manifest.
    Eval {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        threshold: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Expected number of scores; defaults to the manifest length.
        #[arg(long)]
        count: Option<usize>,
        /// Directory for report.json, det.csv and misclassified.txt.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Intersect the misclassified probes of several submissions.
    Overlap {
        /// Files listing misclassified probe ids, one per line.
        #[arg(required = true, num_args = 2..)]
        files: Vec<PathBuf>,
        /// Adds false-match and false-non-match counts.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Turn embeddings into a submission scores file.
    Score {
        /// Reference embeddings, five per foot per identity.
        #[arg(long)]
        gallery: PathBuf,
        /// Probe embeddings; the id column holds the probe id.
        #[arg(long)]
        probes: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value_t = NormArg::ZNorm)]
        normalization: NormArg,
        #[arg(long)]
        output: PathBuf,
    },
    /// Compare strategies on the synthetic benchmark over several seeds.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "strategy", value_enum, default_values_t = [Strategy::Grm, Strategy::Timfbo, Strategy::Ecco])]
        strategies: Vec<Strategy>,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        first_seed: u64,
        #[arg(long)]
        budget: Option<f64>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    Linear,
    ZNorm,
}

impl From<NormArg> for Normalization {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::Linear => Normalization::Linear,
            NormArg::ZNorm => Normalization::ZNorm,
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Search { strategy, config, seed, budget, output, run_id, benchmark, trainer_cmd, workers, resume } => {
            search::cmd_search(&SearchArgs {
                strategy,
                config,
                seed,
                budget,
                output,
                run_id,
                benchmark,
                trainer_cmd,
                workers,
                resume,
            })
        }
        Command::Eval { scores, threshold, manifest, count, output, json } => {
            evaluate::cmd_eval(&EvalArgs { scores, threshold, manifest, count, output, json })
        }
        Command::Overlap { files, manifest, output, json } => {
            evaluate::cmd_overlap(&files, manifest.as_deref(), output.as_deref(), json)
        }
        Command::Score { gallery, probes, manifest, normalization, output } => {
            evaluate::cmd_score(&ScoreArgs { gallery, probes, manifest, normalization: normalization.into(), output })
        }
        Command::Bench { config, strategies, seeds, first_seed, budget, workers } => {
            bench::cmd_bench(&BenchArgs { config, strategies, seeds, first_seed, budget, workers })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
