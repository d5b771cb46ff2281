use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod args;
mod commands;
mod io;

use io::UsageError;

/// Streaming integrate-and-fire policies for simultaneous translation.
#[derive(Debug, Parser)]
#[command(name = "cif-simul", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus manifest.
    Synth(commands::synth::SynthArgs),
    /// Stream a corpus through a read/write policy and write per-utterance traces.
    Simulate(commands::simulate::SimulateArgs),
    /// Compute AP, AL, DAL and computation-aware DAL over a directory of traces.
    Metrics(commands::metrics::MetricsArgs),
    /// Render the read/write staircase of one trace as SVG and CSV.
    PlotPolicy(commands::plot::PlotArgs),
    /// Compare analytic gradients against central finite differences.
    Gradcheck(commands::gradcheck::GradcheckArgs),
    /// Train the toy weight predictor and decoder head.
    TrainToy(commands::train::TrainArgs),
    /// Concatenate utterances of the same talk into long utterances.
    Longutt(commands::longutt::LongArgs),
}

fn init_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("CIF_SIMUL_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| UsageError(format!("CIF_SIMUL_THREADS must be a positive integer, got {raw:?}")))?;
    if n == 0 {
        return Err(UsageError("CIF_SIMUL_THREADS must be at least 1".into()).into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    init_threads()?;
    match cli.command {
        Command::Synth(a) => commands::synth::run(a),
        Command::Simulate(a) => commands::simulate::run(a),
        Command::Metrics(a) => commands::metrics::run(a),
        Command::PlotPolicy(a) => commands::plot::run(a),
        Command::Gradcheck(a) => commands::gradcheck::run(a),
        Command::TrainToy(a) => commands::train::run(a),
        Command::Longutt(a) => commands::longutt::run(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<UsageError>()) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
