use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Result};
use cif_simul::traintoy::{
    evaluate_loss, policy_stats, summarize, train_toy, BoundarySource, PolicySummary, ToyModel, TrainOptions,
};
use cif_simul::LossBreakdown;
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{BlockArgs, CifArgs, CorpusArgs, LossArgs};
use crate::io::{read_text, write_text, InputContext, UsageError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Boundaries {
    /// True segment boundaries of the synthetic corpus.
    Oracle,
    /// Forced alignment of the model's own CTC head.
    Ctc,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Trained parameters (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Per-step training losses as CSV.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    /// Start from these parameters instead of a fresh initialization.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    /// Utterances per step; 0 uses the whole training set.
    #[arg(long, default_value_t = 10)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    #[arg(long, default_value_t = 64)]
    pub max_positions: usize,
    #[command(flatten)]
    pub loss: LossArgs,
    #[command(flatten)]
    pub cif: CifArgs,
    /// Add the output cross-entropy term.
    #[arg(long)]
    pub ce: bool,
    /// Train the CTC emission head.
    #[arg(long)]
    pub ctc_head: bool,
    /// Source of the boundaries behind the quantity loss.
    #[arg(long, value_enum, default_value_t = Boundaries::Oracle)]
    pub boundaries: Boundaries,
    /// Hold out the last N utterances for evaluation.
    #[arg(long, default_value_t = 0)]
    pub heldout: usize,
    /// JSON evaluation report of the held-out set (needs --heldout).
    #[arg(long, requires = "heldout")]
    pub report: Option<PathBuf>,
    /// Firing tolerance around true boundaries, in frames.
    #[arg(long, default_value_t = 2)]
    pub tolerance: usize,
    #[command(flatten)]
    pub blocks: BlockArgs,
}

#[derive(Serialize)]
struct Report {
    train_utterances: usize,
    heldout_utterances: usize,
    steps: usize,
    final_train_loss: Option<LossBreakdown>,
    heldout_loss: LossBreakdown,
    policy: PolicySummary,
}

pub fn run(a: TrainArgs) -> Result<()> {
    let corpus = a.corpus.load()?;
    if a.heldout >= corpus.utterances.len() {
        bail!(UsageError(format!(
            "--heldout {} leaves no training utterances out of {}",
            a.heldout,
            corpus.utterances.len()
        )));
    }
    let (train, test) = corpus.utterances.split_at(corpus.utterances.len() - a.heldout);
    let opts = TrainOptions {
        lr: a.lr,
        steps: a.steps,
        seed: a.corpus.seed,
        batch_size: a.batch_size,
        hidden: a.hidden,
        max_positions: a.max_positions,
        weights: a.loss.weights()?,
        cif: a.cif.config()?,
        with_ce: a.ce,
        ctc_head: a.ctc_head,
        boundaries: match a.boundaries {
            Boundaries::Oracle => BoundarySource::Oracle,
            Boundaries::Ctc => BoundarySource::Ctc,
        },
        ..TrainOptions::default()
    };
    opts.validate().map_err(|e| UsageError(e.to_string()))?;
    let init = match &a.init {
        Some(p) => Some(ToyModel::from_json(&read_text(p)?).input(p)?),
        None => None,
    };
    let outcome = train_toy(train, init, &opts)?;
    write_text(&a.out, &outcome.model.to_json()?)?;
    if let Some(path) = &a.curve {
        let mut csv = String::from("step,ce,ctc,qua,lat,total\n");
        for (i, l) in outcome.curve.iter().enumerate() {
            let _ = writeln!(csv, "{},{},{},{},{},{}", i + 1, l.ce, l.ctc, l.qua, l.lat, l.total);
        }
        write_text(path, &csv)?;
    }
    if let Some(last) = outcome.curve.last() {
        println!(
            "step {}: total {:.6}  qua {:.6}  lat {:.6}  ctc {:.6}  ce {:.6}",
            outcome.curve.len(),
            last.total,
            last.qua,
            last.lat,
            last.ctc,
            last.ce
        );
    }

    if test.is_empty() {
        return Ok(());
    }
    let blocks = a.blocks.config(corpus.frame_ms)?;
    let stats = test
        .par_iter()
        .map(|u| policy_stats(&outcome.model, u, &opts.cif, &blocks, a.tolerance))
        .collect::<Result<Vec<_>, _>>()?;
    let policy = summarize(&stats)?;
    let heldout_loss = evaluate_loss(&outcome.model, test, &opts)?;
    println!(
        "held-out {}: exact count {:.3}  boundary hits {:.3}  DAL {:.2} frames  rate {:.2} tokens/s",
        test.len(),
        policy.exact_count,
        policy.boundary_hits,
        policy.mean_dal_frames,
        policy.mean_firing_rate
    );
    if let Some(path) = &a.report {
        let r = Report {
            train_utterances: train.len(),
            heldout_utterances: test.len(),
            steps: a.steps,
            final_train_loss: outcome.curve.last().copied(),
            heldout_loss,
            policy,
        };
        write_text(path, &(serde_json::to_string_pretty(&r)? + "\n"))?;
    }
    Ok(())
}
