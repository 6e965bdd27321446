use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use porous_tumor::io::{load_config, run_experiment, Experiment, RunOptions, SimConfig};
use porous_tumor::par::Execution;
use porous_tumor::Error;

/// Runs the porous-medium tumor growth experiments and writes CSV output.
#[derive(Parser, Debug)]
#[command(name = "simulate", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write diagnostics every k steps (overrides `output.cadence`).
    #[arg(long)]
    cadence: Option<usize>,
    /// Run single-threaded.
    #[arg(long)]
    sequential: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Delayed Barenblatt profile against the exact solution.
    Barenblatt(Common),
    /// In vitro nutrient model.
    Vitro(Common),
    /// In vivo nutrient model.
    Vivo(Common),
    /// Proliferating and necrotic cells.
    Twospecies(Common),
    /// 2D shell closing around a hole.
    Focusing(Common),
    /// Complementarity residual across several gamma values.
    ApSweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated gamma values (overrides `sweep.gammas`).
        #[arg(long, value_delimiter = ',')]
        gammas: Vec<f64>,
    },
    /// Any experiment, failing on the first violated a priori bound.
    CheckInvariants(Common),
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_) => 2,
        Error::Assertion(_) => 3,
        _ => 1,
    }
}

fn prepare(common: &Common, expected: Option<Experiment>, gammas: &[f64]) -> Result<SimConfig, Error> {
    let mut cfg = load_config(&common.config)?;
    if let Some(exp) = expected {
        if cfg.experiment != exp {
            return Err(Error::Config(format!(
                "config runs `{}` but the `{}` subcommand was given",
                cfg.experiment.name(),
                exp.name()
            )));
        }
    }
    if let Some(k) = common.cadence {
        cfg.cadence = k;
    }
    if let Some(dir) = &common.out {
        cfg.dir = dir.clone();
    }
    if !gammas.is_empty() {
        cfg.gammas = gammas.to_vec();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    let (common, expected, gammas, check) = match &cli.command {
        Command::Barenblatt(c) => (c, Some(Experiment::Barenblatt), &[][..], false),
        Command::Vitro(c) => (c, Some(Experiment::Vitro), &[][..], false),
        Command::Vivo(c) => (c, Some(Experiment::Vivo), &[][..], false),
        Command::Twospecies(c) => (c, Some(Experiment::Twospecies), &[][..], false),
        Command::Focusing(c) => (c, Some(Experiment::Focusing), &[][..], false),
        Command::ApSweep { common, gammas } => (common, Some(Experiment::ApSweep), &gammas[..], false),
        Command::CheckInvariants(c) => (c, None, &[][..], true),
    };
    let cfg = prepare(common, expected, gammas)?;
    let opts = RunOptions {
        check_invariants: check,
        exec: if common.sequential { Execution::Sequential } else { Execution::Parallel },
    };
    let report = run_experiment(&cfg, &cfg.dir, &opts)?;
    for (key, value) in &report.summary {
        println!("{key} = {value}");
    }
    println!("wrote {} files to {}", report.files.len(), report.dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
