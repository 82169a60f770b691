use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dualdiv_cli::config::{load_config, resolve, Mode, Overrides, RunConfig};
use dualdiv_cli::{run, CliError, EXIT_INPUT};

#[derive(Parser)]
#[command(name = "dualdiv", version, about = "Optimal dividend barriers for spectrally positive Levy surplus models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal barrier and value function of the dividend-until-ruin problem.
    SolveDividend(Flags),
    /// Optimal barrier and value function with capital injections.
    SolveInjection(Flags),
    /// Checks the variational inequalities through the generator.
    Verify(Flags),
    /// Monte Carlo estimates compared with the closed forms.
    Simulate(Flags),
    /// Dividend value functions for the drift sweep 2.0, 2.33, 2.67, 3.0.
    Figure1(Flags),
    /// Injection value functions for the cost sweep 1.001, 1.5, 2, 5.
    Figure2(Flags),
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct Flags {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Drift `d` of the surplus; replaces any drift sweep.
    #[arg(long)]
    drift: Option<f64>,
    /// Discount rate.
    #[arg(long)]
    q: Option<f64>,
    /// Unit cost of injected capital; replaces any cost sweep.
    #[arg(long)]
    phi: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of simulated paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Euler step for paths with a Gaussian part.
    #[arg(long)]
    dt: Option<f64>,
}

fn execute(mode: Mode, flags: Flags) -> Result<i32, CliError> {
    let base = match &flags.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    let ov = Overrides {
        sigma: flags.sigma,
        drift: flags.drift,
        q: flags.q,
        phi: flags.phi,
        out: flags.out,
        seed: flags.seed,
        paths: flags.paths,
        dt: flags.dt,
    };
    let cfg = resolve(mode, base, &ov)?;
    let outcome = run::run(&cfg)?;
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    for failure in &outcome.failures {
        eprintln!("FAIL {failure}");
    }
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, flags) = match cli.command {
        Command::SolveDividend(f) => (Mode::SolveDividend, f),
        Command::SolveInjection(f) => (Mode::SolveInjection, f),
        Command::Verify(f) => (Mode::Verify, f),
        Command::Simulate(f) => (Mode::Simulate, f),
        Command::Figure1(f) => (Mode::Figure1, f),
        Command::Figure2(f) => (Mode::Figure2, f),
    };
    let code = match execute(mode, flags) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    };
    ExitCode::from(code as u8)
}
