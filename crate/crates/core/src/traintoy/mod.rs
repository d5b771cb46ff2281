//! A minimal differentiable stack trained with plain gradient descent on the
//! synthetic task: causal weight predictor, position-wise fusion of integrated
//! embeddings with learned per-position states, a softmax output head and an
//! optional CTC emission head.

mod gradcheck;
mod nn;
mod suite;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cif::{embeddings_vjp, integrate_and_fire, scale_weights, scale_weights_vjp};
use crate::ctc::{ctc_forced_alignment, ctc_loss_grad, EmissionGrid};
use crate::domain::{CifConfig, FeatureSequence, FramePrefix, LossWeights, WeightSequence};
use crate::error::{Error, Result};
use crate::losses::{
    combined_objective, grad_quantity_seq, grad_quantity_token, latency_loss_and_grad, quantity_loss_seq,
    quantity_loss_token, LatencyWeights, LossBreakdown, LossParts,
};
use crate::metrics::dal_metric;
use crate::simul::{
    run_cif_policy, BlockConfig, ComputeStamps, DecodeInput, Decoded, Decoder, EchoDecoder, SyntheticUtterance,
    WeightPredictor,
};

pub use gradcheck::{fd_gradcheck, GradCheck};
pub use nn::{
    gelu, gelu_grad, ila_attention, ila_mask, positionwise_fusion, weight_predictor_forward, FusionGrad, FusionParams,
    PredictorPass, WeightPredictorParams, KERNEL_WIDTH,
};
pub use suite::{run_gradient_check, CheckReport, EXTRA_CHECKS, GRADIENT_CHECKS};

use nn::{matvec, matvec_t, outer_add};

/// Schema version of serialized parameters.
pub const PARAMS_VERSION: u32 = 1;

/// Where the boundaries of the token-level quantity loss come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundarySource {
    /// Segment ends of the synthetic generator.
    #[default]
    Oracle,
    /// Viterbi alignment of the model's own CTC head.
    Ctc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantityLevel {
    #[default]
    Token,
    Sequence,
}

/// All trainable parameters. Also used as the container for their gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyModel {
    pub version: u32,
    pub dim: usize,
    /// Output vocabulary including the blank (last id).
    pub vocab_size: usize,
    pub predictor: WeightPredictorParams,
    pub fusion: FusionParams,
    /// Learned state `s_i` per target position (`positions x dim`); later
    /// positions reuse the last row.
    pub positions: Vec<f64>,
    pub out_w: Vec<f64>,
    pub out_b: Vec<f64>,
    pub ctc_w: Vec<f64>,
    pub ctc_b: Vec<f64>,
}

impl ToyModel {
    pub fn zeros(dim: usize, hidden: usize, vocab_size: usize, positions: usize) -> Self {
        Self {
            version: PARAMS_VERSION,
            dim,
            vocab_size,
            predictor: WeightPredictorParams::zeros(dim, hidden),
            fusion: FusionParams::zeros(dim),
            positions: vec![0.0; positions.max(1) * dim],
            out_w: vec![0.0; vocab_size * dim],
            out_b: vec![0.0; vocab_size],
            ctc_w: vec![0.0; vocab_size * dim],
            ctc_b: vec![0.0; vocab_size],
        }
    }

    /// Matrices uniform in [-0.1, 0.1]; layer-norm gain 1; biases 0.
    pub fn init(dim: usize, hidden: usize, vocab_size: usize, positions: usize, seed: u64) -> Self {
        let mut m = Self::zeros(dim, hidden, vocab_size, positions);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |v: &mut Vec<f64>| v.iter_mut().for_each(|x| *x = rng.random_range(-0.1..=0.1));
        fill(&mut m.predictor.kernel);
        fill(&mut m.predictor.proj);
        fill(&mut m.fusion.w_o);
        fill(&mut m.fusion.w_s);
        fill(&mut m.fusion.w_t);
        fill(&mut m.positions);
        fill(&mut m.out_w);
        fill(&mut m.ctc_w);
        m.predictor.ln_gain.fill(1.0);
        m
    }

    fn zeros_like(&self) -> Self {
        Self::zeros(self.dim, self.predictor.hidden, self.vocab_size, self.max_positions())
    }

    pub fn max_positions(&self) -> usize {
        self.positions.len() / self.dim.max(1)
    }

    pub fn check(&self) -> Result<()> {
        if self.version != PARAMS_VERSION {
            return Err(Error::InvalidConfig(format!(
                "parameter schema version {} (expected {PARAMS_VERSION})",
                self.version
            )));
        }
        self.predictor.check()?;
        let (d, v) = (self.dim, self.vocab_size);
        let sizes = [
            (self.predictor.dim_in, d),
            (self.fusion.w_o.len(), d * d),
            (self.fusion.w_s.len(), d * d),
            (self.fusion.w_t.len(), d * d),
            (self.fusion.b.len(), d),
            (self.positions.len() % d.max(1), 0),
            (self.out_w.len(), v * d),
            (self.out_b.len(), v),
            (self.ctc_w.len(), v * d),
            (self.ctc_b.len(), v),
        ];
        for (found, expected) in sizes {
            if found != expected {
                return Err(Error::DimensionMismatch { expected, found });
            }
        }
        if self.positions.is_empty() {
            return Err(Error::Empty("position states"));
        }
        if let Some(k) = self.flatten().iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                what: "parameter",
                index: k,
            });
        }
        Ok(())
    }

    fn segments(&self) -> [&[f64]; 15] {
        let p = &self.predictor;
        let f = &self.fusion;
        [
            &p.kernel,
            &p.conv_bias,
            &p.ln_gain,
            &p.ln_bias,
            &p.proj,
            std::slice::from_ref(&p.proj_bias),
            &f.w_o,
            &f.w_s,
            &f.w_t,
            &f.b,
            &self.positions,
            &self.out_w,
            &self.out_b,
            &self.ctc_w,
            &self.ctc_b,
        ]
    }

    fn segments_mut(&mut self) -> [&mut [f64]; 15] {
        let p = &mut self.predictor;
        let f = &mut self.fusion;
        [
            &mut p.kernel,
            &mut p.conv_bias,
            &mut p.ln_gain,
            &mut p.ln_bias,
            &mut p.proj,
            std::slice::from_mut(&mut p.proj_bias),
            &mut f.w_o,
            &mut f.w_s,
            &mut f.w_t,
            &mut f.b,
            &mut self.positions,
            &mut self.out_w,
            &mut self.out_b,
            &mut self.ctc_w,
            &mut self.ctc_b,
        ]
    }

    pub fn num_params(&self) -> usize {
        self.segments().iter().map(|s| s.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.segments().concat()
    }

    /// Overwrites the parameters from a flat vector in [`Self::flatten`] order.
    pub fn unflatten(&mut self, flat: &[f64]) -> Result<()> {
        let n = self.num_params();
        if flat.len() != n {
            return Err(Error::LengthMismatch {
                what: "flat parameters",
                expected: n,
                found: flat.len(),
            });
        }
        let mut off = 0;
        for seg in self.segments_mut() {
            seg.copy_from_slice(&flat[off..off + seg.len()]);
            off += seg.len();
        }
        Ok(())
    }

    /// `self += scale * other`.
    fn axpy(&mut self, scale: f64, other: &ToyModel) {
        for (a, b) in self.segments_mut().into_iter().zip(other.segments()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        m.check()?;
        Ok(m)
    }

    fn position_state(&self, i: usize) -> &[f64] {
        let row = i.clamp(1, self.max_positions()) - 1;
        &self.positions[row * self.dim..(row + 1) * self.dim]
    }

    fn position_row(&self, i: usize) -> usize {
        i.clamp(1, self.max_positions()) - 1
    }

    /// Output logits for the `i`-th (1-based) integrated embedding.
    pub fn logits(&self, i: usize, c: &[f64]) -> Result<Vec<f64>> {
        let z = positionwise_fusion(c, self.position_state(i), &self.fusion)?;
        let mut l = matvec(&self.out_w, self.vocab_size, self.dim, &z);
        for (a, b) in l.iter_mut().zip(&self.out_b) {
            *a += b;
        }
        Ok(l)
    }

    /// Most probable non-blank token for the `i`-th embedding.
    pub fn greedy_token(&self, i: usize, c: &[f64]) -> Result<usize> {
        let l = self.logits(i, c)?;
        let blank = self.vocab_size - 1;
        Ok(l[..blank]
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |best, (k, &v)| if v > best.1 { (k, v) } else { best },
            )
            .0)
    }

    /// CTC emission grid from the linear head over the input frames.
    pub fn ctc_emissions(&self, x: &FeatureSequence<f64>) -> Result<EmissionGrid<f64>> {
        let mut logits = Vec::with_capacity(x.len() * self.vocab_size);
        for row in x.rows() {
            let l = matvec(&self.ctc_w, self.vocab_size, self.dim, row);
            logits.extend(l.iter().zip(&self.ctc_b).map(|(a, b)| a + b));
        }
        EmissionGrid::from_logits(&logits, self.vocab_size)
    }

    pub fn weights(&self, x: &FeatureSequence<f64>) -> Result<WeightSequence<f64>> {
        weight_predictor_forward(x, &self.predictor, true)
    }

    /// Loss of one utterance and its gradients.
    pub fn loss_and_grad(&self, utt: &SyntheticUtterance, opts: &TrainOptions) -> Result<UttGrad> {
        let x = &utt.features;
        let target = &utt.target;
        let t_len = target.len();
        let cfg = &opts.cif;
        let w = &opts.weights;
        let mut grad = self.zeros_like();
        let mut grad_x = vec![0.0; x.len() * x.dim()];
        let mut parts = LossParts::default();

        let pass = self.predictor.pass(x, opts.stop_gradient)?;
        let alpha = pass.weights().0;
        let mut g_alpha = vec![0.0; alpha.len()];
        let add = |g: &mut Vec<f64>, src: &[f64], s: f64| g.iter_mut().zip(src).for_each(|(a, b)| *a += s * b);

        let emissions = match opts.ctc_head {
            true => Some(self.ctc_emissions(x)?),
            false => None,
        };

        if w.lambda_qua != 0.0 {
            match opts.quantity {
                QuantityLevel::Sequence => {
                    parts.qua = quantity_loss_seq(&alpha, t_len, cfg.beta);
                    add(&mut g_alpha, &grad_quantity_seq(&alpha, t_len, cfg.beta), w.lambda_qua);
                }
                QuantityLevel::Token => {
                    let boundaries: BTreeMap<usize, usize> = match (opts.boundaries, &emissions) {
                        (BoundarySource::Ctc, Some(e)) => ctc_forced_alignment(e, target)?.boundaries().clone(),
                        (BoundarySource::Ctc, None) => {
                            return Err(Error::InvalidConfig("ctc boundaries need the ctc head".into()))
                        }
                        (BoundarySource::Oracle, _) => utt.boundary_map(),
                    };
                    parts.qua = quantity_loss_token(&alpha, &boundaries, t_len, cfg.beta)?;
                    let g = grad_quantity_token(&alpha, &boundaries, t_len, cfg.beta)?;
                    add(&mut g_alpha, &g, w.lambda_qua);
                }
            }
        }

        if w.lambda_lat != 0.0 {
            let (l, g) = latency_loss_and_grad(&alpha, t_len, cfg, opts.latency)?;
            parts.lat = l;
            add(&mut g_alpha, &g, w.lambda_lat);
        }

        if let (Some(e), true) = (&emissions, w.lambda_ctc != 0.0) {
            let (l, g_lp) = ctc_loss_grad(e, target)?;
            let scale = 1.0 / t_len as f64;
            parts.ctc = l * scale;
            let v = self.vocab_size;
            for (t, row) in x.rows().enumerate() {
                let lp = &e.as_slice()[t * v..(t + 1) * v];
                let g = &g_lp[t * v..(t + 1) * v];
                let total: f64 = g.iter().sum();
                let g_logit: Vec<f64> = g
                    .iter()
                    .zip(lp)
                    .map(|(gi, l)| w.lambda_ctc * scale * (gi - l.exp() * total))
                    .collect();
                outer_add(&mut grad.ctc_w, self.dim, &g_logit, row);
                add(&mut grad.ctc_b, &g_logit, 1.0);
            }
        }

        if opts.with_ce {
            let scaled = scale_weights(&WeightSequence(alpha.clone()), t_len, cfg)?;
            let trace = integrate_and_fire(x, &scaled, cfg)?;
            if trace.len() < t_len {
                return Err(Error::TooFewFirings {
                    needed: t_len,
                    found: trace.len(),
                });
            }
            let inv_t = 1.0 / t_len as f64;
            let mut upstream = Vec::with_capacity(t_len);
            for (k, (f, &tok)) in trace.firings.iter().zip(target.tokens()).enumerate() {
                let i = k + 1;
                let c = &f.embedding;
                let s = self.position_state(i);
                let z = positionwise_fusion(c, s, &self.fusion)?;
                let l = self.logits(i, c)?;
                let m = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + l.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                parts.ce += (lse - l[tok]) * inv_t;
                let mut g_logit: Vec<f64> = l.iter().map(|v| (v - lse).exp() * inv_t).collect();
                g_logit[tok] -= inv_t;
                outer_add(&mut grad.out_w, self.dim, &g_logit, &z);
                add(&mut grad.out_b, &g_logit, 1.0);
                let g_z = matvec_t(&self.out_w, self.vocab_size, self.dim, &g_logit);
                let fg = self.fusion.backward(c, s, &g_z);
                grad.fusion
                    .w_o
                    .iter_mut()
                    .zip(&fg.params.w_o)
                    .for_each(|(a, b)| *a += b);
                grad.fusion
                    .w_s
                    .iter_mut()
                    .zip(&fg.params.w_s)
                    .for_each(|(a, b)| *a += b);
                grad.fusion
                    .w_t
                    .iter_mut()
                    .zip(&fg.params.w_t)
                    .for_each(|(a, b)| *a += b);
                add(&mut grad.fusion.b, &fg.params.b, 1.0);
                let row = self.position_row(i);
                add_slice(&mut grad.positions[row * self.dim..(row + 1) * self.dim], &fg.s);
                upstream.push(fg.c);
            }
            let (g_scaled, g_h) = embeddings_vjp(x, scaled.as_slice(), cfg, &upstream)?;
            let g = scale_weights_vjp(&alpha, t_len, cfg.beta, &g_scaled);
            add(&mut g_alpha, &g, 1.0);
            add(&mut grad_x, &g_h, 1.0);
        }

        let gx = self.predictor.backward(x, &pass, &g_alpha, &mut grad.predictor);
        add(&mut grad_x, &gx, 1.0);
        Ok(UttGrad {
            loss: combined_objective(parts, w)?,
            params: grad,
            features: grad_x,
        })
    }
}

fn add_slice(a: &mut [f64], b: &[f64]) {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
}

/// Loss and gradients of one utterance.
#[derive(Debug, Clone)]
pub struct UttGrad {
    pub loss: LossBreakdown,
    pub params: ToyModel,
    /// Gradient with respect to the input features, row-major `U x d`.
    pub features: Vec<f64>,
}

/// Everything besides the data that defines a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub lr: f64,
    pub steps: usize,
    pub seed: u64,
    /// Utterances per step; 0 means the full corpus every step.
    pub batch_size: usize,
    pub hidden: usize,
    pub max_positions: usize,
    pub weights: LossWeights,
    pub cif: CifConfig<f64>,
    /// Adds output cross-entropy with weight 1.
    pub with_ce: bool,
    /// Trains the CTC emission head with weight `lambda_ctc`.
    pub ctc_head: bool,
    pub boundaries: BoundarySource,
    pub quantity: QuantityLevel,
    pub latency: LatencyWeights,
    pub stop_gradient: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            lr: 0.05,
            steps: 2000,
            seed: 0,
            batch_size: 10,
            hidden: 16,
            max_positions: 64,
            weights: LossWeights::default(),
            cif: CifConfig::default(),
            with_ce: false,
            ctc_head: false,
            boundaries: BoundarySource::Oracle,
            quantity: QuantityLevel::Token,
            latency: LatencyWeights::Scaled,
            stop_gradient: true,
        }
    }
}

impl TrainOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be > 0, got {}",
                self.lr
            )));
        }
        if self.hidden == 0 || self.max_positions == 0 {
            return Err(Error::InvalidConfig("hidden size and positions must be >= 1".into()));
        }
        if self.boundaries == BoundarySource::Ctc && !self.ctc_head {
            return Err(Error::InvalidConfig("ctc boundaries need the ctc head".into()));
        }
        LossWeights::new(
            self.weights.lambda_ctc,
            self.weights.lambda_qua,
            self.weights.lambda_lat,
        )?;
        self.cif.validate()
    }
}

/// Trained parameters and the mean training loss of every step.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ToyModel,
    pub curve: Vec<LossBreakdown>,
}

/// Mean loss and gradient over a set of utterances.
pub fn batch_loss_and_grad(
    model: &ToyModel,
    batch: &[&SyntheticUtterance],
    opts: &TrainOptions,
) -> Result<(LossBreakdown, ToyModel)> {
    let mut grad = model.zeros_like();
    let mut mean = LossBreakdown::default();
    let scale = 1.0 / batch.len().max(1) as f64;
    for utt in batch {
        let g = model.loss_and_grad(utt, opts)?;
        grad.axpy(scale, &g.params);
        mean.ce += g.loss.ce * scale;
        mean.ctc += g.loss.ctc * scale;
        mean.qua += g.loss.qua * scale;
        mean.lat += g.loss.lat * scale;
        mean.total += g.loss.total * scale;
    }
    Ok((mean, grad))
}

/// Mean loss over `data` without updating anything.
pub fn evaluate_loss(model: &ToyModel, data: &[SyntheticUtterance], opts: &TrainOptions) -> Result<LossBreakdown> {
    let batch: Vec<&SyntheticUtterance> = data.iter().collect();
    Ok(batch_loss_and_grad(model, &batch, opts)?.0)
}

/// Plain gradient descent with a constant learning rate. Starts from `init`
/// when given, else from a fresh initialization drawn from `opts.seed`.
/// Minibatches walk a seeded permutation of the corpus in fixed order.
pub fn train_toy(data: &[SyntheticUtterance], init: Option<ToyModel>, opts: &TrainOptions) -> Result<TrainOutcome> {
    opts.validate()?;
    let first = data.first().ok_or(Error::Empty("training corpus"))?;
    let mut model = match init {
        Some(m) => {
            m.check()?;
            if m.dim != first.features.dim() || m.vocab_size != first.target.vocab_size() {
                return Err(Error::InvalidConfig(
                    "initial parameters do not match the corpus dimensions".into(),
                ));
            }
            m
        }
        None => ToyModel::init(
            first.features.dim(),
            opts.hidden,
            first.target.vocab_size(),
            opts.max_positions,
            opts.seed,
        ),
    };
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed);
    for i in (1..order.len()).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let bs = if opts.batch_size == 0 {
        data.len()
    } else {
        opts.batch_size.min(data.len())
    };
    let mut cursor = 0;
    let mut curve = Vec::with_capacity(opts.steps);
    for step in 0..opts.steps {
        let batch: Vec<&SyntheticUtterance> = (0..bs).map(|k| &data[order[(cursor + k) % data.len()]]).collect();
        cursor = (cursor + bs) % data.len();
        let (loss, grad) = batch_loss_and_grad(&model, &batch, opts).map_err(|e| match e {
            Error::NonFinite { .. } => Error::Divergence { step },
            e => e,
        })?;
        if !loss.total.is_finite() {
            return Err(Error::Divergence { step });
        }
        model.axpy(-opts.lr, &grad);
        if model.flatten().iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step });
        }
        curve.push(loss);
    }
    Ok(TrainOutcome { model, curve })
}

/// The toy model as a streaming weight predictor and greedy decoder.
#[derive(Debug, Clone, Copy)]
pub struct ToyPolicy<'a> {
    pub model: &'a ToyModel,
}

impl WeightPredictor<f64> for ToyPolicy<'_> {
    fn weight(&mut self, prefix: FramePrefix<'_, f64>) -> Result<f64> {
        self.model.predictor.predict_last(prefix)
    }
}

impl Decoder<f64> for ToyPolicy<'_> {
    fn decode(&mut self, input: DecodeInput<'_, f64>) -> Result<Decoded> {
        match input.firing {
            Some(f) => Ok(Decoded::Token(self.model.greedy_token(input.position, &f.embedding)?)),
            None => Ok(Decoded::Stop),
        }
    }
}

/// Policy statistics of one utterance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyStats {
    pub target_len: usize,
    pub firings: usize,
    /// Firings within `tolerance` frames of some true boundary.
    pub hits: usize,
    /// Firings within `tolerance` frames of the boundary of the same index.
    pub ordinal_hits: usize,
    /// DAL in frames over the measured WRITE delays.
    pub dal_frames: f64,
    pub frames: usize,
    pub frame_ms: f64,
}

impl PolicyStats {
    /// Tokens per second of committed source.
    pub fn firing_rate(&self) -> f64 {
        self.firings as f64 / (self.frames as f64 * self.frame_ms / 1000.0)
    }
}

/// Streams one utterance through the learned policy and compares its firing
/// frames with the true boundaries.
pub fn policy_stats(
    model: &ToyModel,
    utt: &SyntheticUtterance,
    cfg: &CifConfig<f64>,
    blocks: &BlockConfig,
    tolerance: usize,
) -> Result<PolicyStats> {
    let mut predictor = ToyPolicy { model };
    let mut echo = EchoDecoder::new(utt.target.tokens().to_vec());
    let out = run_cif_policy(
        &utt.features,
        &mut predictor,
        &mut echo,
        cfg,
        blocks,
        ComputeStamps::Off,
    )?;
    let fires = out.integration.fire_frames();
    let near = |f: usize| {
        let k = utt.true_boundaries.partition_point(|&b| b < f);
        [k.checked_sub(1), Some(k)]
            .into_iter()
            .flatten()
            .filter_map(|k| utt.true_boundaries.get(k))
            .any(|&b| b.abs_diff(f) <= tolerance)
    };
    let hits = fires.iter().filter(|&&f| near(f)).count();
    let ordinal_hits = fires
        .iter()
        .zip(&utt.true_boundaries)
        .filter(|(f, b)| f.abs_diff(**b) <= tolerance)
        .count();
    let delays: Vec<f64> = out.trace.writes().map(|(_, e, _)| e as f64).collect();
    let dal_frames = if delays.is_empty() {
        utt.frames() as f64
    } else {
        dal_metric(&delays, utt.frames() as f64, delays.len())?
    };
    Ok(PolicyStats {
        target_len: utt.target.len(),
        firings: fires.len(),
        hits,
        ordinal_hits,
        dal_frames,
        frames: utt.frames(),
        frame_ms: utt.features.frame_ms(),
    })
}

/// Corpus-level summary of [`PolicyStats`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub utterances: usize,
    /// Share of utterances with exactly `T` firings.
    pub exact_count: f64,
    /// Share of firings within tolerance of a true boundary.
    pub boundary_hits: f64,
    /// Same, matching the `i`-th firing to the `i`-th boundary only.
    pub ordinal_hits: f64,
    pub mean_dal_frames: f64,
    pub mean_firing_rate: f64,
}

pub fn summarize(stats: &[PolicyStats]) -> Result<PolicySummary> {
    if stats.is_empty() {
        return Err(Error::Empty("policy statistics"));
    }
    let n = stats.len() as f64;
    let fires: usize = stats.iter().map(|s| s.firings).sum();
    Ok(PolicySummary {
        utterances: stats.len(),
        exact_count: stats.iter().filter(|s| s.firings == s.target_len).count() as f64 / n,
        boundary_hits: stats.iter().map(|s| s.hits).sum::<usize>() as f64 / fires.max(1) as f64,
        ordinal_hits: stats.iter().map(|s| s.ordinal_hits).sum::<usize>() as f64 / fires.max(1) as f64,
        mean_dal_frames: stats.iter().map(|s| s.dal_frames).sum::<f64>() / n,
        mean_firing_rate: stats.iter().map(|s| s.firing_rate()).sum::<f64>() / n,
    })
}
