use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lossq_cli::{parse_config, run, Command, RunOptions};

/// Simulate the many-server loss system, solve its fluid-limit equation, and
/// compare the two.
#[derive(Parser)]
#[command(name = "lossq", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write event logs and path summaries per (n, seed).
    Simulate(CommonArgs),
    /// Solve the fluid equation; write the solution and regime CSVs.
    Fluid(CommonArgs),
    /// Replication sweep: error table, overlays and the residual bound.
    Compare(CommonArgs),
    /// Blocked mass and congestion ratio, simulated and fluid.
    Blocked(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML run configuration.
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory (overrides the config and LOSSQ_OUT_DIR).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write gnuplot-ready two-column .dat files.
    #[arg(long)]
    emit_plot_data: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match &cli.command {
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Fluid(a) => (Command::Fluid, a),
        Cmd::Compare(a) => (Command::Compare, a),
        Cmd::Blocked(a) => (Command::Blocked, a),
    };
    match execute(cmd, args) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cmd: Command, args: &CommonArgs) -> anyhow::Result<Vec<PathBuf>> {
    let mut cfg = parse_config(&args.config)?;
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    run(cmd, &cfg, &RunOptions { emit_plot_data: args.emit_plot_data })
}
