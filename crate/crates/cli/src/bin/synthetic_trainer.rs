//! Reference external trainer: answers one trial request on stdin with
//! synthetic-benchmark epochs on stdout.
//!
//! `--truncate-after N` stops after N epochs and exits nonzero without a
//! terminal record, to exercise the engine's failure handling.

use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::thread;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{ArgGroup, Parser};
use stepsearch_core::history::read_json;
use stepsearch_core::space::SearchSpace;
use stepsearch_core::trainer::protocol::{read_request, write_epoch, write_terminal};
use stepsearch_core::trainer::{SyntheticBenchmark, Trainer};

#[derive(Parser)]
#[command(name = "synthetic-trainer", about = "Synthetic trainer speaking the JSON-lines protocol")]
#[command(group(ArgGroup::new("source").required(true).args(["benchmark", "space"])))]
struct Args {
    /// Serialized benchmark (JSON).
    #[arg(long)]
    benchmark: Option<PathBuf>,
    /// Search-space file; builds the unit bowl over it.
    #[arg(long)]
    space: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    full_epochs: u32,
    #[arg(long)]
    truncate_after: Option<u32>,
    /// Pause before each epoch record.
    #[arg(long, default_value_t = 0)]
    delay_ms: u64,
}

fn load(args: &Args) -> Result<SyntheticBenchmark> {
    match (&args.benchmark, &args.space) {
        (Some(p), _) => read_json(p).with_context(|| format!("cannot load benchmark {}", p.display())),
        (None, Some(p)) => {
            let space = SearchSpace::load(p).with_context(|| format!("cannot load space {}", p.display()))?;
            Ok(SyntheticBenchmark::quadratic_bowl(space, args.full_epochs)?)
        }
        (None, None) => unreachable!("clap requires one source"),
    }
}

/// Returns false when the run was cut short on purpose.
fn run(args: &Args) -> Result<bool> {
    let bench = load(args)?;
    let request = read_request(&mut io::stdin().lock())?;
    let out = bench.train(&request)?;
    let mut w = BufWriter::new(io::stdout().lock());
    let keep = args.truncate_after.map_or(out.epochs.len(), |n| out.epochs.len().min(n as usize));
    for e in &out.epochs[..keep] {
        if args.delay_ms > 0 {
            thread::sleep(Duration::from_millis(args.delay_ms));
        }
        write_epoch(&mut w, e)?;
    }
    if args.truncate_after.is_some() {
        w.flush()?;
        return Ok(false);
    }
    write_terminal(&mut w, out.final_performance)?;
    Ok(true)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("synthetic-trainer: {e:#}");
            ExitCode::FAILURE
        }
    }
}
