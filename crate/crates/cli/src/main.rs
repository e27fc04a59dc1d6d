use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mec_offload::output::{write_run, write_sweep, write_tail};
use mec_offload::{build_topology, run, run_sweep, Error, RunOptions, Scenario, SweepSpec};

/// Simulate latency- and reliability-aware task offloading in multi-server
/// edge computing.
///
/// Exit codes: 0 success, 1 invalid configuration or I/O failure,
/// 2 power-allocation solver did not converge.
#[derive(Parser, Debug)]
#[command(name = "mec-offload", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Single run: summary.json, ue_slots.csv and pair_slots.csv.
    Run {
        #[command(flatten)]
        common: Common,
        /// Keep every K-th slot in the per-slot CSVs.
        #[arg(long, value_name = "K", default_value_t = 100)]
        decimate: u64,
    },
    /// Parameter sweep: sweep.csv with per-point mean and std over replications.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Axis and values, e.g. `V=0,1e10,1e11` or
        /// `processing_density=737.5,1760`. Axes: V, arrival_rate (Mbps),
        /// processing_density (cycles/bit), servers_per_ue.
        #[arg(long, value_name = "AXIS=V1,V2,...")]
        sweep: String,
        /// Independent replications per value.
        #[arg(long, value_name = "R", default_value_t = 1)]
        reps: usize,
    },
    /// Tail analysis: exceedances.csv, ccdf.csv, gpd_trace.csv and summary.json.
    Tail {
        #[command(flatten)]
        common: Common,
        /// Refit the GPD every N exceedances for the parameter trace.
        #[arg(long, value_name = "N", default_value_t = 10)]
        stride: usize,
    },
    /// Check a configuration and print its hash.
    Validate {
        /// TOML scenario file [default: built-in evaluation scenario].
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// TOML scenario file [default: built-in evaluation scenario].
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Number of slots T, overriding the config.
    #[arg(long, value_name = "N")]
    slots: Option<u64>,
    /// Master seed, overriding the config.
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
}

fn load(config: Option<&PathBuf>) -> Result<Scenario, Error> {
    match config {
        Some(path) => Scenario::from_toml_file(path),
        None => Ok(Scenario::baseline()),
    }
}

impl Common {
    fn scenario(&self) -> Result<Scenario, Error> {
        let mut s = load(self.config.as_ref())?;
        if let Some(n) = self.slots {
            s.config.num_slots = n;
        }
        if let Some(seed) = self.seed {
            s.config.rng_seed = seed;
        }
        s.validated()
    }
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn execute(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Validate { config } => {
            let s = load(config.as_ref())?.validated()?;
            println!(
                "ok: {} UEs, {} servers, config_sha256={}",
                s.num_ues(),
                s.num_servers(),
                s.config_hash()
            );
        }
        Command::Run { common, decimate } => {
            let s = common.scenario()?;
            let topology = build_topology(&s)?;
            let out = run(&s, &topology, RunOptions { record_stride: Some(decimate.max(1)) })?;
            report(&write_run(&common.out, &s, &out)?);
        }
        Command::Tail { common, stride } => {
            if stride == 0 {
                return Err(Error::InvalidConfig(vec![mec_offload::Violation::new(
                    "stride",
                    "must be positive",
                )]));
            }
            let s = common.scenario()?;
            let topology = build_topology(&s)?;
            let out = run(&s, &topology, RunOptions::default())?;
            report(&write_tail(&common.out, &s, &out, stride)?);
        }
        Command::Sweep { common, sweep, reps } => {
            let s = common.scenario()?;
            let spec = SweepSpec::parse(&sweep, reps)?;
            let result = run_sweep(&s, &spec)?;
            report(&write_sweep(&common.out, &s, &result)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_non_convergence() { 2 } else { 1 })
        }
    }
}
