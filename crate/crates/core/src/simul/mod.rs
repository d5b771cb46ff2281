//! Streaming execution of read/write policies.
//!
//! The source is delivered in blocks of `main_frames` with up to
//! `lookahead_frames` of right context. A READ event reports the frames that
//! became available (look-ahead included), so a WRITE's elapsed frame count
//! is exactly the source consumed when it was produced.

mod longutt;
mod synth;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cif::{CifStream, Firing, IntegrationTrace};
use crate::domain::{CifConfig, FeatureSequence, FramePrefix};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::trace::{ReadWriteTrace, TraceBuilder};

pub use longutt::{concat_long_utterances, split_concatenated};
pub use synth::{oracle_weights, synth_task, Corpus, SynthConfig, SyntheticUtterance, UtterancePart};

/// Streaming block geometry in encoder frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockConfig {
    pub main_frames: usize,
    pub lookahead_frames: usize,
}

impl Default for BlockConfig {
    /// 640 ms main context and 320 ms right context at 40 ms per frame.
    fn default() -> Self {
        Self {
            main_frames: 16,
            lookahead_frames: 8,
        }
    }
}

impl BlockConfig {
    pub fn new(main_frames: usize, lookahead_frames: usize) -> Result<Self> {
        if main_frames == 0 {
            return Err(Error::InvalidConfig("block main context must be >= 1 frame".into()));
        }
        Ok(Self {
            main_frames,
            lookahead_frames,
        })
    }

    /// Converts millisecond geometry; both spans must be whole frames.
    pub fn from_ms(block_ms: f64, lookahead_ms: f64, frame_ms: f64) -> Result<Self> {
        let whole = |ms: f64, what: &str| -> Result<usize> {
            let n = ms / frame_ms;
            if !n.is_finite() || n < 0.0 || (n - n.round()).abs() > 1e-9 {
                return Err(Error::InvalidConfig(format!(
                    "{what} of {ms} ms is not a whole number of {frame_ms} ms frames"
                )));
            }
            Ok(n.round() as usize)
        };
        Self::new(whole(block_ms, "block")?, whole(lookahead_ms, "look-ahead")?)
    }
}

/// One delivery step. Frame indices are 1-based and inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub main_start: usize,
    pub main_end: usize,
    /// Last frame visible while this block is processed (main + look-ahead, clamped).
    pub available_end: usize,
}

/// Tiles `frames` source frames into blocks.
pub fn stream_blocks(frames: usize, cfg: &BlockConfig) -> Vec<Block> {
    let step = cfg.main_frames.max(1);
    (0..frames.div_ceil(step))
        .map(|b| {
            let main_start = b * step + 1;
            let main_end = ((b + 1) * step).min(frames);
            Block {
                main_start,
                main_end,
                available_end: (main_end + cfg.lookahead_frames).min(frames),
            }
        })
        .collect()
}

/// Causal per-frame weight source: returns `alpha_j` for the last frame of
/// the prefix.
pub trait WeightPredictor<F> {
    fn weight(&mut self, prefix: FramePrefix<'_, F>) -> Result<F>;
}

/// Replays a fixed weight sequence.
#[derive(Debug, Clone)]
pub struct ScriptedPredictor<F>(pub Vec<F>);

impl<F: Real> WeightPredictor<F> for ScriptedPredictor<F> {
    fn weight(&mut self, prefix: FramePrefix<'_, F>) -> Result<F> {
        self.0.get(prefix.len() - 1).copied().ok_or(Error::LengthMismatch {
            what: "scripted weights",
            expected: prefix.len(),
            found: self.0.len(),
        })
    }
}

/// What the decoder is asked to produce.
#[derive(Debug, Clone, Copy)]
pub struct DecodeInput<'a, F> {
    /// 1-based position of the token being produced.
    pub position: usize,
    /// The integrated embedding behind this WRITE (CIF policy only).
    pub firing: Option<&'a Firing<F>>,
    pub frames_available: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decoded {
    Token(usize),
    /// Write this token, then end the hypothesis.
    Final(usize),
    /// End without writing.
    Stop,
}

pub trait Decoder<F> {
    fn decode(&mut self, input: DecodeInput<'_, F>) -> Result<Decoded>;
}

/// Emits a fixed token list, then stops.
#[derive(Debug, Clone)]
pub struct ScriptedDecoder {
    pub tokens: Vec<usize>,
    /// Marks the last scripted token as end-of-sequence.
    pub end_on_last: bool,
}

impl ScriptedDecoder {
    pub fn new(tokens: Vec<usize>) -> Self {
        Self {
            tokens,
            end_on_last: false,
        }
    }
}

impl<F> Decoder<F> for ScriptedDecoder {
    fn decode(&mut self, input: DecodeInput<'_, F>) -> Result<Decoded> {
        let i = input.position - 1;
        Ok(match self.tokens.get(i) {
            Some(&t) if self.end_on_last && i + 1 == self.tokens.len() => Decoded::Final(t),
            Some(&t) => Decoded::Token(t),
            None => Decoded::Stop,
        })
    }
}

/// Writes the reference token of each position. Under the CIF policy it
/// never stops on its own (extra firings write `filler`), so the trace shows
/// every firing; without firings it stops after the reference.
#[derive(Debug, Clone)]
pub struct EchoDecoder {
    pub reference: Vec<usize>,
    pub filler: usize,
}

impl EchoDecoder {
    pub fn new(reference: Vec<usize>) -> Self {
        Self { reference, filler: 0 }
    }
}

impl<F> Decoder<F> for EchoDecoder {
    fn decode(&mut self, input: DecodeInput<'_, F>) -> Result<Decoded> {
        let tok = self.reference.get(input.position - 1).copied();
        Ok(match (tok, input.firing) {
            (Some(t), _) => Decoded::Token(t),
            (None, Some(_)) => Decoded::Token(self.filler),
            (None, None) => Decoded::Stop,
        })
    }
}

/// How WRITE events are stamped with compute time.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComputeStamps {
    #[default]
    Off,
    /// Deterministic cost model: this many ms per WRITE.
    Fixed(f64),
    /// Measured wall-clock time of prediction and decoding since the last WRITE.
    WallClock,
}

struct Stamper {
    mode: ComputeStamps,
    pending: f64,
}

impl Stamper {
    fn new(mode: ComputeStamps) -> Self {
        Self { mode, pending: 0.0 }
    }

    fn time<T>(&mut self, f: impl FnOnce() -> T) -> T {
        if self.mode == ComputeStamps::WallClock {
            let start = Instant::now();
            let out = f();
            self.pending += start.elapsed().as_secs_f64() * 1e3;
            out
        } else {
            f()
        }
    }

    fn take(&mut self) -> Option<f64> {
        match self.mode {
            ComputeStamps::Off => None,
            ComputeStamps::Fixed(ms) => Some(ms),
            ComputeStamps::WallClock => Some(std::mem::take(&mut self.pending)),
        }
    }
}

/// Result of streaming one utterance through the CIF policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutcome<F = f64> {
    pub trace: ReadWriteTrace,
    pub integration: IntegrationTrace<F>,
    /// Raw weights produced by the predictor, one per committed frame.
    pub weights: Vec<F>,
}

/// Handles one decoder answer; returns `true` when decoding must end.
fn apply_decoded(tb: &mut TraceBuilder, d: Decoded, stamp: Option<f64>) -> bool {
    match d {
        Decoded::Token(t) => {
            tb.write(t, stamp);
            false
        }
        Decoded::Final(t) => {
            tb.write(t, stamp);
            true
        }
        Decoded::Stop => true,
    }
}

/// Streams `features` block by block, integrating raw predictor weights with
/// CIF; every firing becomes a WRITE. The residual is tail-fired after the
/// last block. Decoding ends early when the decoder signals the end.
pub fn run_cif_policy<F, P, D>(
    features: &FeatureSequence<F>,
    predictor: &mut P,
    decoder: &mut D,
    cfg: &CifConfig<F>,
    blocks: &BlockConfig,
    stamps: ComputeStamps,
) -> Result<PolicyOutcome<F>>
where
    F: Real,
    P: WeightPredictor<F> + ?Sized,
    D: Decoder<F> + ?Sized,
{
    let u = features.len();
    let mut stream = CifStream::new(*cfg)?;
    let mut tb = TraceBuilder::new(features.frame_ms().to_f64_lossy(), u);
    let mut stamper = Stamper::new(stamps);
    let mut weights = Vec::with_capacity(u);
    let mut done = false;

    'blocks: for block in stream_blocks(u, blocks) {
        tb.read(block.available_end - tb.frames_read());
        for j in block.main_start..=block.main_end {
            let alpha = stamper.time(|| predictor.weight(features.prefix(j)))?;
            weights.push(alpha);
            let fired = stream.push(features.frame(j), alpha)?.to_vec();
            for f in &fired {
                let input = DecodeInput {
                    position: f.index,
                    firing: Some(f),
                    frames_available: tb.frames_read(),
                };
                let d = stamper.time(|| decoder.decode(input))?;
                if apply_decoded(&mut tb, d, stamper.take()) {
                    done = true;
                    break 'blocks;
                }
            }
        }
    }

    let integration = if done {
        stream.finish_without_tail()
    } else {
        let (integration, tail) = stream.finish();
        if let Some(idx) = tail {
            let f = &integration.firings[idx];
            let input = DecodeInput {
                position: f.index,
                firing: Some(f),
                frames_available: tb.frames_read(),
            };
            let d = stamper.time(|| decoder.decode(input))?;
            apply_decoded(&mut tb, d, stamper.take());
        }
        integration
    };
    Ok(PolicyOutcome {
        trace: tb.finish()?,
        integration,
        weights,
    })
}

/// Fixed wait-k schedule over blocks: read `k` blocks, then alternate one
/// WRITE and one block READ; once the source is exhausted keep writing until
/// the decoder stops. Capped at `4 * U + 16` writes.
pub fn run_waitk_policy<F, D>(
    features: &FeatureSequence<F>,
    decoder: &mut D,
    k: usize,
    blocks: &BlockConfig,
    stamps: ComputeStamps,
) -> Result<ReadWriteTrace>
where
    F: Real,
    D: Decoder<F> + ?Sized,
{
    if k == 0 {
        return Err(Error::InvalidConfig("wait-k needs k >= 1".into()));
    }
    let u = features.len();
    let plan = stream_blocks(u, blocks);
    let mut tb = TraceBuilder::new(features.frame_ms().to_f64_lossy(), u);
    let mut stamper = Stamper::new(stamps);
    let mut next = k.min(plan.len());
    for block in &plan[..next] {
        tb.read(block.available_end - tb.frames_read());
    }
    let cap = 4 * u + 16;
    for position in 1..=cap {
        let input = DecodeInput {
            position,
            firing: None,
            frames_available: tb.frames_read(),
        };
        let d = stamper.time(|| decoder.decode(input))?;
        if apply_decoded(&mut tb, d, stamper.take()) {
            break;
        }
        if next < plan.len() {
            tb.read(plan[next].available_end - tb.frames_read());
            next += 1;
        }
    }
    tb.finish()
}

/// Closed-form wait-k delay of token `i` (1-based) in frames.
pub fn waitk_delay(i: usize, k: usize, frames: usize, blocks: &BlockConfig) -> usize {
    ((k + i - 1) * blocks.main_frames + blocks.lookahead_frames).min(frames)
}
