use std::path::PathBuf;

use anyhow::Result;
use cif_simul::simul::{concat_long_utterances, Corpus};
use clap::Args;

use crate::io::{load_corpus, write_text, InputContext};

#[derive(Debug, Args)]
pub struct LongArgs {
    /// Input corpus manifest.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Minimum duration of a concatenated utterance, in seconds.
    #[arg(long = "L")]
    pub min_seconds: f64,
    /// Output manifest.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(a: LongArgs) -> Result<()> {
    let corpus = load_corpus(&a.manifest)?;
    let utterances = concat_long_utterances(&corpus.utterances, a.min_seconds).input(&a.manifest)?;
    let out = Corpus { utterances, ..corpus };
    write_text(&a.out, &out.to_manifest_json()?)?;
    println!(
        "{} utterances ({:.2} s mean) written to {}",
        out.utterances.len(),
        out.mean_duration_s(),
        a.out.display()
    );
    Ok(())
}
