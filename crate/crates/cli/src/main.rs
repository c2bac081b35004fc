use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use omnidock::batch::{compare, run_batch, seed_list, Sweep};
use omnidock::scenario::{Scenario, Status};
use omnidock::Error;

/// Docking and transport simulator for omnidirectional robot modules.
#[derive(Debug, Parser)]
#[command(name = "omnidock", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one episode; writes trace.csv and summary.json.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Seeded Monte Carlo over an optional parameter grid; writes
    /// aggregate.csv, trials.csv and batch.json.
    Batch {
        scenario: PathBuf,
        /// Number of consecutive seeds starting at the scenario seed.
        #[arg(long)]
        seeds: Option<usize>,
        /// KEY=a,b,c with KEY a dotted scenario path; repeat for a grid.
        #[arg(long)]
        sweep: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Paired-seed docked vs. cooperating transport; writes compare.csv and
    /// compare.json.
    Compare {
        scenario: PathBuf,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_TASK_FAILED: u8 = 3;
const EXIT_DIVERGED: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Diverged { .. } => EXIT_DIVERGED,
        Error::Io(_) => 1,
        _ => EXIT_CONFIG,
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Error> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), Error> {
    let w = create(dir, name)?;
    serde_json::to_writer_pretty(w, value).map_err(|e| Error::Io(e.into()))
}

fn load_value(path: &Path) -> Result<serde_json::Value, Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))
}

fn run(scenario: &Path, out: &Path, seed: Option<u64>) -> Result<u8, Error> {
    let s = Scenario::load(scenario)?;
    let seed = seed.unwrap_or(s.seed);
    let result = s.run(seed)?;
    result.trace.write_csv(create(out, "trace.csv")?)?;
    write_json(out, "summary.json", &result.summary)?;
    let sum = &result.summary;
    match sum.status {
        Status::Completed => {
            println!(
                "{}: completed in {:.3} s (seed {seed})",
                sum.mode.as_str(),
                sum.sim_time
            );
            Ok(0)
        }
        status => {
            let reason = sum.failure_reason.map_or("", |r| r.as_str());
            eprintln!(
                "{}: {} {reason} at {:.3} s (seed {seed})",
                sum.mode.as_str(),
                status.as_str(),
                sum.sim_time
            );
            Ok(EXIT_TASK_FAILED)
        }
    }
}

fn batch(scenario: &Path, seeds: Option<usize>, sweeps: &[String], out: &Path) -> Result<u8, Error> {
    let base = load_value(scenario)?;
    let s = Scenario::from_value(base.clone())?;
    let seeds = seed_list(&s, seeds)?;
    let sweeps = sweeps
        .iter()
        .map(|t| t.parse::<Sweep>())
        .collect::<Result<Vec<_>, _>>()?;
    let report = run_batch(&base, &seeds, &sweeps)?;
    report.write_aggregate_csv(create(out, "aggregate.csv")?)?;
    report.write_trials_csv(create(out, "trials.csv")?)?;
    write_json(out, "batch.json", &report)?;
    for c in &report.cells {
        println!(
            "cell {} {:?}: {}/{} completed",
            c.cell, c.values, c.n_completed, c.n_trials
        );
    }
    Ok(0)
}

fn compare_cmd(scenario: &Path, seeds: Option<usize>, out: &Path) -> Result<u8, Error> {
    let s = Scenario::load(scenario)?;
    let seeds = seed_list(&s, seeds)?;
    let report = compare(&s, &seeds)?;
    report.write_table_csv(create(out, "compare.csv")?)?;
    write_json(out, "compare.json", &report)?;
    println!("mode         rmsa      jerk      sigma_w   time");
    for r in &report.table {
        println!(
            "{:<12} {:<9.4} {:<9.3} {:<9.4} {:.2}",
            r.mode, r.rmsa, r.mean_jerk, r.sigma_omega, r.transport_time
        );
    }
    let w = report.docked_wins;
    println!(
        "docked wins: rmsa {:.2}, jerk {:.2}, sigma_w {:.2}, time {:.2}",
        w.rmsa, w.mean_jerk, w.sigma_omega, w.transport_time
    );
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { scenario, out, seed } => run(scenario, out, *seed),
        Command::Batch {
            scenario,
            seeds,
            sweep,
            out,
        } => batch(scenario, *seeds, sweep, out),
        Command::Compare { scenario, seeds, out } => compare_cmd(scenario, *seeds, out),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
