use std::path::PathBuf;

use anyhow::Result;
use cif_simul::simul::{synth_task, SynthConfig};
use clap::Args;

use crate::io::{write_text, UsageError};

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output manifest.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub n_utts: usize,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = cif_simul::DEFAULT_FRAME_MS)]
    pub frame_ms: f64,
    #[arg(long, default_value_t = 10)]
    pub utts_per_talk: usize,
}

pub fn run(a: SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        n_utts: a.n_utts,
        noise: a.noise,
        seed: a.seed,
        frame_ms: a.frame_ms,
        utts_per_talk: a.utts_per_talk,
        ..SynthConfig::default()
    };
    let corpus = synth_task(&cfg).map_err(|e| UsageError(e.to_string()))?;
    write_text(&a.out, &corpus.to_manifest_json()?)?;
    println!(
        "wrote {} utterances ({:.2} s mean) to {}",
        corpus.utterances.len(),
        corpus.mean_duration_s(),
        a.out.display()
    );
    Ok(())
}
