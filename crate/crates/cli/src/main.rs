use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use calabi_cli::{cmd_baseline, cmd_curvature, cmd_energy, cmd_fiber_bound, cmd_flow, cmd_sobolev_bound, Exit};

/// Calabi flow laboratory on the Delzant triangle.
#[derive(Parser)]
#[command(name = "calabi", version)]
struct Cli {
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,
    /// Write one data file per monitored series.
    #[arg(long, global = true)]
    emit_plots: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fubini–Study golden values.
    Baseline,
    /// Run the flow described by a JSON config.
    Flow { config: PathBuf },
    /// Curvature of a snapshot at a point.
    Curvature {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long, num_args = 2, value_names = ["X", "Y"], allow_negative_numbers = true)]
        at: Vec<f64>,
        #[arg(long)]
        class: Option<PathBuf>,
    },
    /// Energies of a snapshot.
    Energy {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        class: Option<PathBuf>,
    },
    /// Yamabe and Sobolev certificate for a fiber Calabi energy.
    SobolevBound {
        #[arg(long, allow_negative_numbers = true)]
        ca: f64,
        #[arg(long)]
        class: PathBuf,
    },
    /// Fiber Calabi-energy bound and its certificate.
    FiberBound {
        #[arg(long)]
        class: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Exit::ConfigError.code() as u8 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(Exit::ConfigError.code() as u8);
        }
    }
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let result = match &cli.command {
        Command::Baseline => cmd_baseline(&mut out, cli.json),
        Command::Flow { config } => cmd_flow(&mut out, config, cli.json, cli.emit_plots),
        Command::Curvature { snapshot, at, class } => cmd_curvature(&mut out, snapshot, [at[0], at[1]], class.as_deref()),
        Command::Energy { snapshot, class } => cmd_energy(&mut out, snapshot, class.as_deref()),
        Command::SobolevBound { ca, class } => cmd_sobolev_bound(&mut out, *ca, class),
        Command::FiberBound { class } => cmd_fiber_bound(&mut out, class),
    };
    let _ = out.flush();
    let exit = result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        Exit::for_error(&e)
    });
    ExitCode::from(exit.code() as u8)
}
