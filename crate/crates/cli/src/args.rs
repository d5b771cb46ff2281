use std::path::PathBuf;

use anyhow::Result;
use cif_simul::simul::{synth_task, BlockConfig, Corpus, SynthConfig};
use cif_simul::{CifConfig, LossWeights};
use clap::Args;

use crate::io::{load_corpus, UsageError};

#[derive(Debug, Clone, Args)]
pub struct CifArgs {
    /// Firing threshold.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Residual needed for a tail firing; defaults to beta / 2.
    #[arg(long)]
    pub tail: Option<f64>,
}

impl CifArgs {
    pub fn config(&self) -> Result<CifConfig<f64>> {
        let tail = self.tail.unwrap_or(self.beta / 2.0);
        CifConfig::new(self.beta, tail).map_err(|e| UsageError(e.to_string()).into())
    }
}

#[derive(Debug, Clone, Args)]
pub struct BlockArgs {
    /// Main context per streaming block.
    #[arg(long, default_value_t = 640.0)]
    pub block_ms: f64,
    /// Right context (look-ahead) per block.
    #[arg(long, default_value_t = 320.0)]
    pub lookahead_ms: f64,
}

impl BlockArgs {
    pub fn config(&self, frame_ms: f64) -> Result<BlockConfig> {
        BlockConfig::from_ms(self.block_ms, self.lookahead_ms, frame_ms).map_err(|e| UsageError(e.to_string()).into())
    }
}

#[derive(Debug, Clone, Args)]
pub struct LossArgs {
    #[arg(long, default_value_t = 0.3)]
    pub lambda_ctc: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda_qua: f64,
    #[arg(long, default_value_t = 0.0)]
    pub lambda_lat: f64,
}

impl LossArgs {
    pub fn weights(&self) -> Result<LossWeights> {
        LossWeights::new(self.lambda_ctc, self.lambda_qua, self.lambda_lat)
            .map_err(|e| UsageError(e.to_string()).into())
    }
}

/// A manifest on disk, or a synthetic corpus generated from the seed.
#[derive(Debug, Clone, Args)]
pub struct CorpusArgs {
    /// Corpus manifest; a synthetic corpus is generated when absent.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Seed of the run (synthetic data and initialization).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seed of the synthetic data when it should differ from --seed.
    #[arg(long)]
    pub data_seed: Option<u64>,
    /// Number of synthetic utterances.
    #[arg(long, default_value_t = 200)]
    pub n_utts: usize,
    /// Standard deviation of synthetic feature noise.
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    /// Frame shift of synthetic features; must match a manifest when given.
    #[arg(long)]
    pub frame_ms: Option<f64>,
}

impl CorpusArgs {
    pub fn load(&self) -> Result<Corpus> {
        match &self.corpus {
            Some(path) => {
                let c = load_corpus(path)?;
                if let Some(f) = self.frame_ms {
                    if f != c.frame_ms {
                        return Err(UsageError(format!(
                            "--frame-ms {f} does not match the manifest's {} ms frames",
                            c.frame_ms
                        ))
                        .into());
                    }
                }
                Ok(c)
            }
            None => {
                let cfg = SynthConfig {
                    n_utts: self.n_utts,
                    noise: self.noise,
                    seed: self.data_seed.unwrap_or(self.seed),
                    frame_ms: self.frame_ms.unwrap_or(cif_simul::DEFAULT_FRAME_MS),
                    ..SynthConfig::default()
                };
                synth_task(&cfg).map_err(|e| UsageError(e.to_string()).into())
            }
        }
    }
}
