use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use cif_simul::simul::{
    oracle_weights, run_cif_policy, run_waitk_policy, ComputeStamps, Decoder, EchoDecoder, ScriptedPredictor,
    WeightPredictor,
};
use cif_simul::traintoy::{ToyModel, ToyPolicy};
use cif_simul::FeatureSequence;
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{BlockArgs, CifArgs, CorpusArgs};
use crate::io::{list_files, read_text, write_text, InputContext, UsageError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Cif,
    Waitk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PredictorKind {
    /// Weights spreading one unit over each true token segment.
    Oracle,
    /// The weight predictor of a trained toy model (--model).
    Model,
    /// The last column of each feature CSV.
    Column,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DecoderKind {
    /// Writes the reference token of each position.
    Echo,
    /// Greedy argmax of a trained toy model (--model).
    Greedy,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Directory of feature CSVs (one utterance per file, rows are frames)
    /// used instead of a corpus.
    #[arg(long, conflicts_with = "corpus")]
    pub features: Option<PathBuf>,
    /// Output directory for traces and the index.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Policy::Cif)]
    pub policy: Policy,
    /// Blocks read before the first WRITE under wait-k.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[command(flatten)]
    pub cif: CifArgs,
    #[command(flatten)]
    pub blocks: BlockArgs,
    /// Source of CIF weights; defaults to `model` with --model, else `oracle`.
    #[arg(long, value_enum)]
    pub predictor: Option<PredictorKind>,
    #[arg(long, value_enum, default_value_t = DecoderKind::Echo)]
    pub decoder: DecoderKind,
    /// Trained toy parameters.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Stamp every WRITE with this fixed compute time in ms.
    #[arg(long, conflicts_with = "wall_clock")]
    pub compute_ms: Option<f64>,
    /// Stamp WRITEs with measured wall-clock compute (not reproducible).
    #[arg(long)]
    pub wall_clock: bool,
}

struct Item {
    id: String,
    features: FeatureSequence<f64>,
    reference: Option<Vec<usize>>,
    oracle: Option<Vec<f64>>,
    column: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct IndexEntry {
    id: String,
    trace: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    integration: Option<String>,
    writes: usize,
    source_frames: usize,
}

#[derive(Serialize)]
struct Index {
    policy: Policy,
    frame_ms: f64,
    utterances: Vec<IndexEntry>,
}

fn parse_csv(path: &Path, frame_ms: f64, with_column: bool) -> Result<(FeatureSequence<f64>, Option<Vec<f64>>)> {
    let text = read_text(path)?;
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| UsageError(format!("{}:{}: {e}", path.display(), n + 1)))?;
        rows.push(row);
    }
    if with_column {
        let mut alpha = Vec::with_capacity(rows.len());
        for r in &mut rows {
            alpha.push(
                r.pop()
                    .ok_or_else(|| UsageError(format!("{}: empty row", path.display())))?,
            );
        }
        if rows.first().is_some_and(|r| r.is_empty()) {
            return Err(UsageError(format!("{}: no feature columns besides the weights", path.display())).into());
        }
        return Ok((FeatureSequence::from_rows(&rows, frame_ms).input(path)?, Some(alpha)));
    }
    Ok((FeatureSequence::from_rows(&rows, frame_ms).input(path)?, None))
}

fn load_items(a: &SimulateArgs, kind: PredictorKind) -> Result<Vec<Item>> {
    if let Some(dir) = &a.features {
        let frame_ms = a.corpus.frame_ms.unwrap_or(cif_simul::DEFAULT_FRAME_MS);
        let files = list_files(dir, ".csv")?;
        if files.is_empty() {
            return Err(UsageError(format!("{}: no .csv feature files", dir.display())).into());
        }
        return files
            .iter()
            .map(|f| {
                let (features, column) = parse_csv(f, frame_ms, kind == PredictorKind::Column)?;
                let id = f.file_stem().and_then(|s| s.to_str()).unwrap_or("utt").to_string();
                Ok(Item {
                    id,
                    features,
                    reference: None,
                    oracle: None,
                    column,
                })
            })
            .collect();
    }
    let corpus = a.corpus.load()?;
    Ok(corpus
        .utterances
        .iter()
        .map(|u| Item {
            id: u.id.clone(),
            features: u.features.clone(),
            reference: Some(u.target.tokens().to_vec()),
            oracle: Some(oracle_weights(u)),
            column: None,
        })
        .collect())
}

fn stamps(a: &SimulateArgs) -> Result<ComputeStamps> {
    Ok(match (a.compute_ms, a.wall_clock) {
        (Some(ms), _) if !(ms.is_finite() && ms >= 0.0) => {
            bail!(UsageError(format!("--compute-ms must be >= 0, got {ms}")))
        }
        (Some(ms), _) => ComputeStamps::Fixed(ms),
        (None, true) => ComputeStamps::WallClock,
        (None, false) => ComputeStamps::Off,
    })
}

pub fn run(a: SimulateArgs) -> Result<()> {
    let cfg = a.cif.config()?;
    let stamps = stamps(&a)?;
    let model = match &a.model {
        Some(p) => Some(ToyModel::from_json(&read_text(p)?).input(p)?),
        None => None,
    };
    let kind = a.predictor.unwrap_or(if model.is_some() {
        PredictorKind::Model
    } else {
        PredictorKind::Oracle
    });
    if model.is_none()
        && ((a.policy == Policy::Cif && kind == PredictorKind::Model) || a.decoder == DecoderKind::Greedy)
    {
        bail!(UsageError(
            "--model is required for the model predictor and the greedy decoder".into()
        ));
    }
    let cif = a.policy == Policy::Cif;
    if !cif && a.decoder == DecoderKind::Greedy {
        bail!(UsageError(
            "the greedy toy decoder reads CIF embeddings; use it with --policy cif".into()
        ));
    }
    if cif && kind == PredictorKind::Column && a.features.is_none() {
        bail!(UsageError("--predictor column needs --features".into()));
    }
    if cif && kind == PredictorKind::Oracle && a.features.is_some() {
        bail!(UsageError("oracle weights need a corpus with true boundaries".into()));
    }
    let items = load_items(&a, kind)?;
    if a.policy == Policy::Waitk && items.iter().any(|i| i.reference.is_none()) && a.decoder == DecoderKind::Echo {
        bail!(UsageError(
            "wait-k with the echo decoder needs reference targets (a corpus)".into()
        ));
    }
    if let Some(m) = &model {
        if items.iter().any(|i| i.features.dim() != m.dim) {
            bail!(UsageError(format!("model expects {}-dimensional features", m.dim)));
        }
    }
    let frame_ms = items
        .first()
        .map_or(cif_simul::DEFAULT_FRAME_MS, |i| i.features.frame_ms());
    let blocks = a.blocks.config(frame_ms)?;
    std::fs::create_dir_all(&a.out).input(&a.out)?;

    let entries: Vec<IndexEntry> = items
        .par_iter()
        .map(|item| -> Result<IndexEntry> {
            let mut decoder: Box<dyn Decoder<f64>> = match (a.decoder, &model) {
                (DecoderKind::Greedy, Some(m)) => Box::new(ToyPolicy { model: m }),
                _ => Box::new(EchoDecoder::new(item.reference.clone().unwrap_or_default())),
            };
            let trace_name = format!("{}.trace.jsonl", item.id);
            let (trace, integration) = match a.policy {
                Policy::Waitk => (
                    run_waitk_policy(&item.features, decoder.as_mut(), a.k, &blocks, stamps)
                        .map_err(|e| UsageError(e.to_string()))?,
                    None,
                ),
                Policy::Cif => {
                    let mut predictor: Box<dyn WeightPredictor<f64>> = match (kind, &model) {
                        (PredictorKind::Model, Some(m)) => Box::new(ToyPolicy { model: m }),
                        (PredictorKind::Column, _) => {
                            Box::new(ScriptedPredictor(item.column.clone().unwrap_or_default()))
                        }
                        _ => Box::new(ScriptedPredictor(item.oracle.clone().unwrap_or_default())),
                    };
                    let out = run_cif_policy(
                        &item.features,
                        predictor.as_mut(),
                        decoder.as_mut(),
                        &cfg,
                        &blocks,
                        stamps,
                    )
                    .map_err(|e| UsageError(format!("{}: {e}", item.id)))?;
                    let name = format!("{}.cif.jsonl", item.id);
                    let mut buf = Vec::new();
                    out.integration.write_jsonl(&mut buf)?;
                    write_text(&a.out.join(&name), std::str::from_utf8(&buf)?)?;
                    (out.trace, Some(name))
                }
            };
            write_text(&a.out.join(&trace_name), &trace.to_jsonl())?;
            Ok(IndexEntry {
                id: item.id.clone(),
                trace: trace_name,
                integration,
                writes: trace.target_len(),
                source_frames: trace.source_frames(),
            })
        })
        .collect::<Result<_>>()?;

    let mut utterances = entries;
    utterances.sort_by(|x, y| x.id.cmp(&y.id));
    let n = utterances.len();
    let index = Index {
        policy: a.policy,
        frame_ms,
        utterances,
    };
    write_text(
        &a.out.join("index.json"),
        &(serde_json::to_string_pretty(&index)? + "\n"),
    )?;
    println!("simulated {n} utterances into {}", a.out.display());
    Ok(())
}
