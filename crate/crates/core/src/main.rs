use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use ssmparam::cli::{run, threads_from_env, RunConfig, Subcommand};
use ssmparam::manifold::ResonanceTolerance;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    /// Reduce a system and write the manifold and reduced dynamics as JSON
    Reduce,
    /// Expand the determinant, adjugate and inverse determinant of I + g mu
    Expand,
    /// Evaluate weak-form integrands at a batch of points (CSV)
    Integrand,
    /// Integrate the full and reduced models side by side (CSV)
    Simulate,
}

#[derive(Debug, Parser)]
#[command(name = "ssmparam", version, about = "Parametric invariant-manifold reduction of polynomial systems")]
struct Args {
    #[arg(value_enum)]
    command: Command,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Maximum expansion order
    #[arg(long, default_value_t = 3)]
    order: usize,
    /// 1-based spectral indices of the master modes, e.g. 1,2
    #[arg(long, value_delimiter = ',')]
    masters: Option<Vec<usize>>,
    /// Forcing frequency (overrides the file)
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long, default_value_t = ResonanceTolerance::default().rel)]
    rtol: f64,
    #[arg(long, default_value_t = ResonanceTolerance::default().abs)]
    atol: f64,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Initial modal amplitude of the internal masters
    #[arg(long, default_value_t = 0.01)]
    amplitude: f64,
    /// Parameter value for simulations of parametric systems
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    mu: f64,
    /// Reduction JSON to simulate instead of reducing in-process
    #[arg(long)]
    rom: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let subcommand = match args.command {
        Command::Reduce => Subcommand::Reduce,
        Command::Expand => Subcommand::Expand,
        Command::Integrand => Subcommand::Integrand,
        Command::Simulate => Subcommand::Simulate,
    };
    let cfg = RunConfig {
        order: args.order,
        masters: args.masters,
        tolerance: ResonanceTolerance { rel: args.rtol, abs: args.atol },
        omega: args.omega,
        t_end: args.t_end,
        dt: args.dt,
        amplitude: args.amplitude,
        mu: args.mu,
        rom: args.rom,
        threads: threads_from_env(),
        ..RunConfig::new(subcommand, args.input, args.output)
    };
    ExitCode::from(run(&cfg) as u8)
}
