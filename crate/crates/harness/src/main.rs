use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use muskat_core::muskat::Fault;
use muskat_harness::{
    cmd_simulate, cmd_sweep, cmd_verify, cmd_weights, load_baselines, parse_config, HarnessError,
    RunConfig, VerifyOptions, WeightTable,
};

/// Simulations, parameter sweeps and verification reports for the truncated
/// Muskat system.
#[derive(Parser)]
#[command(name = "muskat-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation: trace.csv, trace.svg, summary.json.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the `seed` of the configuration.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the inequality lab and the hard invariants.
    Verify {
        #[arg(long)]
        out: PathBuf,
        /// Inject a defect into the paralinearization.
        #[arg(long, value_enum, default_value = "none")]
        fault: FaultArg,
        /// Compare against these baselines instead of the bundled ones.
        #[arg(long)]
        baselines: Option<PathBuf>,
    },
    /// Run amplitude × cutoff × dt cells from the `sweep` section.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Tabulate φ for a weight: phi.csv.
    Weights {
        #[arg(long, value_enum)]
        kind: WeightTable,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    None,
    VSign,
    EvenOddSplit,
}

impl From<FaultArg> for Fault {
    fn from(f: FaultArg) -> Self {
        match f {
            FaultArg::None => Fault::None,
            FaultArg::VSign => Fault::VSign,
            FaultArg::EvenOddSplit => Fault::EvenOddSplit,
        }
    }
}

fn read(path: &Path, what: &str) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|e| HarnessError::Config {
        path: what.into(),
        msg: format!("{}: {e}", path.display()),
    })
}

fn load_config(path: &Path) -> Result<RunConfig, HarnessError> {
    parse_config(&read(path, "--config")?)
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Simulate { config, out, seed } => {
            let s = cmd_simulate(load_config(&config)?, seed, &out)?;
            println!(
                "completed {} steps; final l2 {:.6e}; smallness {} ({:.3e})",
                s.steps,
                s.last.l2,
                if s.smallness.pass { "pass" } else { "fail" },
                s.smallness.value
            );
        }
        Command::Verify {
            out,
            fault,
            baselines,
        } => {
            let baselines = baselines
                .map(|p| read(&p, "--baselines").and_then(|t| load_baselines(&t)))
                .transpose()?;
            let v = cmd_verify(
                &VerifyOptions {
                    fault: fault.into(),
                    baselines,
                },
                &out,
            )?;
            println!(
                "{} invariants and {} baselines pass",
                v.invariants.len(),
                v.drift.len()
            );
        }
        Command::Sweep {
            config,
            out,
            workers,
        } => {
            let rows = cmd_sweep(load_config(&config)?, workers, &out)?;
            println!("{} cells completed", rows.len());
        }
        Command::Weights { kind, a, out } => cmd_weights(kind, a, &out)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("muskat-lab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
