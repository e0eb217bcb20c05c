use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use slater_forge_core::experiment::{self, ExperimentKind, ExperimentSpec};
use slater_forge_core::Error;

/// Optimal multi-configuration approximations of fermion wave functions.
#[derive(Parser, Debug)]
#[command(name = "slater-forge", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Per-step convergence traces (ground state and released states)
    ConvergenceTrace(RunArgs),
    /// Slow late-stage convergence after a free-fermion quench
    SlowTail(RunArgs),
    /// Ground-state I_max over chain lengths and interactions
    GsSweep(RunArgs),
    /// I_max and energies along a confinement-release quench
    QuenchFidelity(RunArgs),
    /// Exact vs approximant densities at quench checkpoints
    DensityCompare(RunArgs),
    /// Optimized I next to the occupation-number upper bound
    BoundReport(RunArgs),
    /// Optimize a single state read from a wave-function dump
    Optimize(RunArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML config file
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir`)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    restarts: Option<usize>,
}

impl Command {
    fn split(self) -> (ExperimentKind, RunArgs) {
        use ExperimentKind as K;
        match self {
            Command::ConvergenceTrace(a) => (K::ConvergenceTrace, a),
            Command::SlowTail(a) => (K::SlowTail, a),
            Command::GsSweep(a) => (K::GsSweep, a),
            Command::QuenchFidelity(a) => (K::QuenchFidelity, a),
            Command::DensityCompare(a) => (K::DensityCompare, a),
            Command::BoundReport(a) => (K::BoundReport, a),
            Command::Optimize(a) => (K::Optimize, a),
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    if err.is_config_error() {
        2
    } else {
        3
    }
}

fn run(kind: ExperimentKind, args: RunArgs) -> Result<(), Error> {
    let mut spec = ExperimentSpec::from_file_as(&args.config, kind)?;
    if let Some(out) = args.out {
        spec.output_dir = out;
    }
    if args.seed.is_some() {
        spec.seed = args.seed;
    }
    if args.restarts.is_some() {
        spec.restarts = args.restarts;
    }
    let manifest = experiment::run(&spec)?;
    for entry in &manifest.outputs {
        println!("{}", manifest.spec.output_dir.join(&entry.path).display());
    }
    println!(
        "{}",
        manifest.spec.output_dir.join("manifest.json").display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let (kind, args) = Cli::parse().command.split();
    match run(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn numerical_errors_exit_with_three() {
        assert_eq!(exit_code(&Error::NoOverlap), 3);
        assert_eq!(exit_code(&Error::Eigen("x".into())), 3);
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
    }
}
