use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use evtrig::commands::{self, Context};
use evtrig::config::{self, Overrides};
use evtrig::{ExitStatus, RunError};

#[derive(Parser)]
#[command(name = "evtrig", version, about = "Event-triggered robust output-feedback design and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a controller and trigger from a plant and uncertainty description.
    Synth(Common),
    /// Simulate a given controller and trigger.
    Simulate(Common),
    /// Check closed-loop stability and the norm or frequency condition for a given controller.
    Verify(Common),
    /// Run the built-in second-order design example and compare against its reported values.
    ReproducePaper(Optional),
    /// Run the design over the parameter grid in the `[sweep]` section.
    Sweep(Common),
}

#[derive(Args)]
struct Flags {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Integration step (s).
    #[arg(long)]
    dt: Option<f64>,
    /// Simulation horizon (s).
    #[arg(long)]
    horizon: Option<f64>,
    /// Seed for randomly generated filters.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args)]
struct Optional {
    /// TOML configuration file; only its simulation settings are used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: Flags,
}

fn context(f: Flags) -> Context {
    Context { out: f.out, overrides: Overrides { dt: f.dt, horizon: f.horizon, seed: f.seed } }
}

fn run(cli: Cli) -> Result<ExitStatus, RunError> {
    match cli.command {
        Command::Synth(c) => commands::synth(&config::load(&c.config)?, &context(c.flags)),
        Command::Simulate(c) => commands::simulate_cmd(&config::load(&c.config)?, &context(c.flags)),
        Command::Verify(c) => commands::verify(&config::load(&c.config)?, &context(c.flags)),
        Command::Sweep(c) => commands::sweep(&config::load(&c.config)?, &context(c.flags)),
        Command::ReproducePaper(c) => {
            let file = c.config.as_deref().map(config::load).transpose()?;
            commands::reproduce(file.as_ref(), &context(c.flags))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { ExitStatus::Usage as u8 } else { 0 });
        }
    };
    let out = cli_out(&cli);
    match run(cli) {
        Ok(status) => {
            if status != ExitStatus::Success {
                eprintln!("evtrig: checks failed, see {}", out.join("report.txt").display());
            }
            ExitCode::from(status as u8)
        }
        Err(e) => {
            eprintln!("evtrig: {e}");
            ExitCode::from(e.exit_status() as u8)
        }
    }
}

fn cli_out(cli: &Cli) -> PathBuf {
    match &cli.command {
        Command::Synth(c) | Command::Simulate(c) | Command::Verify(c) | Command::Sweep(c) => c.flags.out.clone(),
        Command::ReproducePaper(c) => c.flags.out.clone(),
    }
}
