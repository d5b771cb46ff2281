//! Continuous integrate-and-fire.
//!
//! Each frame's weight is poured into an accumulator. When the accumulator
//! reaches `beta` the incoming weight is split: the left part tops the
//! accumulator up to exactly `beta` and the queued frames are integrated into
//! one embedding (a *firing*, i.e. a WRITE); the right part stays queued with a
//! copy of the frame for the next integration.
//!
//! Offline integration is literally a fold of [`CifState::step`], so any
//! streaming segmentation reproduces the offline trace bit for bit.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::domain::{CifConfig, FeatureSequence, WeightSequence};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// One integrated embedding `c_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Firing<F = f64> {
    /// 1-based target position.
    pub index: usize,
    /// 1-based frame at which the firing triggered.
    pub fire_frame: usize,
    /// `(frame, weight)` pairs, contiguous and increasing in frame.
    pub terms: Vec<(usize, F)>,
    pub embedding: Vec<F>,
    pub is_tail: bool,
}

impl<F: Real> Firing<F> {
    pub fn weight(&self) -> F {
        self.terms.iter().map(|t| t.1).sum()
    }

    /// Expected source position `(1/beta) * sum(weight * frame)`.
    pub fn expected_delay(&self, beta: F) -> F {
        self.terms.iter().map(|&(k, w)| w * F::of_usize(k)).sum::<F>() / beta
    }
}

/// Every firing of one sequence plus the residual left unfired.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrationTrace<F = f64> {
    pub frames: usize,
    pub dim: usize,
    pub beta: F,
    pub firings: Vec<Firing<F>>,
    /// Weight still queued at the end and discarded (zero when the tail fired).
    pub residual: F,
}

#[derive(Serialize, Deserialize)]
struct TraceHeader<F> {
    frames: usize,
    dim: usize,
    beta: F,
    residual: F,
    firings: usize,
}

impl<F: Real + Serialize + for<'de> Deserialize<'de>> IntegrationTrace<F> {
    /// JSON lines: a header object followed by one firing per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        let header = TraceHeader {
            frames: self.frames,
            dim: self.dim,
            beta: self.beta,
            residual: self.residual,
            firings: self.firings.len(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for f in &self.firings {
            serde_json::to_writer(&mut out, f)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(Error::MalformedTrace {
            line: 1,
            message: "missing header".into(),
        })?;
        let header: TraceHeader<F> = serde_json::from_str(first).map_err(|e| Error::MalformedTrace {
            line: 1,
            message: e.to_string(),
        })?;
        let mut firings = Vec::with_capacity(header.firings);
        for (i, line) in lines {
            firings.push(serde_json::from_str(line).map_err(|e| Error::MalformedTrace {
                line: i + 1,
                message: e.to_string(),
            })?);
        }
        if firings.len() != header.firings {
            return Err(Error::MalformedTrace {
                line: 1,
                message: format!("header declares {} firings, found {}", header.firings, firings.len()),
            });
        }
        Ok(Self {
            frames: header.frames,
            dim: header.dim,
            beta: header.beta,
            firings,
            residual: header.residual,
        })
    }
}

impl<F: Real> IntegrationTrace<F> {
    pub fn len(&self) -> usize {
        self.firings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.firings.is_empty()
    }

    pub fn fire_frames(&self) -> Vec<usize> {
        self.firings.iter().map(|f| f.fire_frame).collect()
    }

    pub fn embeddings(&self) -> Vec<&[F]> {
        self.firings.iter().map(|f| f.embedding.as_slice()).collect()
    }
}

/// Accumulation queues of a running integrate-and-fire.
#[derive(Debug, Clone, PartialEq)]
pub struct CifState<F = f64> {
    /// Queued `(frame, weight)` pairs.
    queue: Vec<(usize, F)>,
    /// Running weighted sum of the queued frames.
    partial: Vec<F>,
    accumulated: F,
    frames_seen: usize,
    fired: usize,
    dim: Option<usize>,
}

impl<F: Real> Default for CifState<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Real> CifState<F> {
    pub fn new() -> Self {
        Self {
            queue: Vec::new(),
            partial: Vec::new(),
            accumulated: F::zero(),
            frames_seen: 0,
            fired: 0,
            dim: None,
        }
    }

    pub fn accumulated(&self) -> F {
        self.accumulated
    }

    pub fn frames_seen(&self) -> usize {
        self.frames_seen
    }

    pub fn fired(&self) -> usize {
        self.fired
    }

    pub fn queue(&self) -> &[(usize, F)] {
        &self.queue
    }

    /// Consumes frame `frames_seen + 1` with weight `alpha`, returning the
    /// firings it triggers (several when a scaled weight exceeds `beta`).
    pub fn step(&mut self, h: &[F], alpha: F, cfg: &CifConfig<F>) -> Result<Vec<Firing<F>>> {
        let dim = *self.dim.get_or_insert(h.len());
        if h.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: h.len(),
            });
        }
        let j = self.frames_seen + 1;
        if !alpha.is_finite() || alpha < F::zero() {
            return Err(Error::InvalidWeight {
                index: j,
                value: alpha.to_f64_lossy(),
                reason: "weight must be finite and >= 0",
            });
        }
        if let Some(k) = h.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                what: "frame component",
                index: k,
            });
        }
        if self.partial.is_empty() {
            self.partial = vec![F::zero(); dim];
        }
        self.frames_seen = j;

        let mut out = Vec::new();
        let mut remaining = alpha;
        loop {
            if self.accumulated + remaining < cfg.beta {
                self.push(j, h, remaining);
                break;
            }
            let left = cfg.beta - self.accumulated;
            self.push(j, h, left);
            self.fired += 1;
            out.push(Firing {
                index: self.fired,
                fire_frame: j,
                terms: std::mem::take(&mut self.queue),
                embedding: std::mem::replace(&mut self.partial, vec![F::zero(); dim]),
                is_tail: false,
            });
            self.accumulated = F::zero();
            remaining = remaining - left;
        }
        Ok(out)
    }

    fn push(&mut self, j: usize, h: &[F], w: F) {
        self.queue.push((j, w));
        for (p, &x) in self.partial.iter_mut().zip(h) {
            *p = *p + w * x;
        }
        self.accumulated = self.accumulated + w;
    }

    /// End-of-input handling: fires the residual if it reaches the tail
    /// threshold, keeping its unnormalized weighted sum.
    pub fn tail(&mut self, cfg: &CifConfig<F>) -> Option<Firing<F>> {
        if self.frames_seen == 0 || self.accumulated < cfg.tail_threshold {
            return None;
        }
        self.fired += 1;
        let dim = self.partial.len();
        let firing = Firing {
            index: self.fired,
            fire_frame: self.frames_seen,
            terms: std::mem::take(&mut self.queue),
            embedding: std::mem::replace(&mut self.partial, vec![F::zero(); dim]),
            is_tail: true,
        };
        self.accumulated = F::zero();
        Some(firing)
    }
}

/// Single-step form of [`CifState::step`] returning the new state.
pub fn cif_step<F: Real>(
    state: &CifState<F>,
    h: &[F],
    alpha: F,
    cfg: &CifConfig<F>,
) -> Result<(CifState<F>, Vec<Firing<F>>)> {
    let mut next = state.clone();
    let firings = next.step(h, alpha, cfg)?;
    Ok((next, firings))
}

/// Applies tail handling to a finished state.
pub fn tail_handle<F: Real>(state: &CifState<F>, cfg: &CifConfig<F>) -> (CifState<F>, Option<Firing<F>>) {
    let mut next = state.clone();
    let f = next.tail(cfg);
    (next, f)
}

/// Streaming integrator that collects an [`IntegrationTrace`].
#[derive(Debug, Clone)]
pub struct CifStream<F = f64> {
    cfg: CifConfig<F>,
    state: CifState<F>,
    firings: Vec<Firing<F>>,
}

impl<F: Real> CifStream<F> {
    pub fn new(cfg: CifConfig<F>) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            state: CifState::new(),
            firings: Vec::new(),
        })
    }

    pub fn state(&self) -> &CifState<F> {
        &self.state
    }

    /// Pushes one frame and returns the firings it produced.
    pub fn push(&mut self, h: &[F], alpha: F) -> Result<&[Firing<F>]> {
        let before = self.firings.len();
        let new = self.state.step(h, alpha, &self.cfg)?;
        self.firings.extend(new);
        Ok(&self.firings[before..])
    }

    pub fn finish(mut self) -> (IntegrationTrace<F>, Option<usize>) {
        let tail = self.state.tail(&self.cfg);
        let tail_idx = tail.as_ref().map(|_| self.firings.len());
        self.firings.extend(tail);
        let dim = self.state.dim.unwrap_or(0);
        (
            IntegrationTrace {
                frames: self.state.frames_seen,
                dim,
                beta: self.cfg.beta,
                firings: self.firings,
                residual: self.state.accumulated,
            },
            tail_idx,
        )
    }

    /// Ends the stream without tail handling; the queued weight is reported
    /// as residual.
    pub fn finish_without_tail(self) -> IntegrationTrace<F> {
        IntegrationTrace {
            frames: self.state.frames_seen,
            dim: self.state.dim.unwrap_or(0),
            beta: self.cfg.beta,
            firings: self.firings,
            residual: self.state.accumulated,
        }
    }

    pub fn into_trace(self) -> IntegrationTrace<F> {
        self.finish().0
    }
}

/// Integrates a whole sequence offline, including tail handling.
pub fn integrate_and_fire<F: Real>(
    h: &FeatureSequence<F>,
    alpha: &WeightSequence<F>,
    cfg: &CifConfig<F>,
) -> Result<IntegrationTrace<F>> {
    if h.len() != alpha.len() {
        return Err(Error::LengthMismatch {
            what: "weights",
            expected: h.len(),
            found: alpha.len(),
        });
    }
    let mut stream = CifStream::new(*cfg)?;
    for (row, &a) in h.rows().zip(alpha.as_slice()) {
        stream.push(row, a)?;
    }
    Ok(stream.into_trace())
}

/// Firing structure of a weight sequence alone (1-dimensional dummy frames).
pub fn fire_weights<F: Real>(alpha: &[F], cfg: &CifConfig<F>) -> Result<IntegrationTrace<F>> {
    let mut stream = CifStream::new(*cfg)?;
    let zero = [F::zero()];
    for &a in alpha {
        stream.push(&zero, a)?;
    }
    Ok(stream.into_trace())
}

/// Rescales weights so they sum to `beta * target_len`.
pub fn scale_weights<F: Real>(
    alpha: &WeightSequence<F>,
    target_len: usize,
    cfg: &CifConfig<F>,
) -> Result<WeightSequence<F>> {
    if target_len == 0 {
        return Err(Error::Empty("target sequence"));
    }
    let total = alpha.sum();
    if !(total > F::zero()) || !total.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    let factor = cfg.beta * F::of_usize(target_len) / total;
    Ok(WeightSequence(alpha.as_slice().iter().map(|&a| a * factor).collect()))
}

/// Vector-Jacobian product of [`scale_weights`]: maps a gradient with
/// respect to the scaled weights back to the raw weights.
pub fn scale_weights_vjp<F: Real>(alpha: &[F], target_len: usize, beta: F, upstream: &[F]) -> Vec<F> {
    let total: F = alpha.iter().copied().sum();
    let factor = beta * F::of_usize(target_len) / total;
    let dot: F = alpha.iter().zip(upstream).map(|(&a, &g)| a * g).sum::<F>() / total;
    upstream.iter().map(|&g| factor * (g - dot)).collect()
}

/// Expected source position of each of the first `target_len` firings, in
/// frames. Tail firings count when they occur.
pub fn expected_delays<F: Real>(alpha: &WeightSequence<F>, cfg: &CifConfig<F>, target_len: usize) -> Result<Vec<F>> {
    let trace = fire_weights(alpha.as_slice(), cfg)?;
    if trace.len() < target_len {
        return Err(Error::TooFewFirings {
            needed: target_len,
            found: trace.len(),
        });
    }
    Ok(trace.firings[..target_len]
        .iter()
        .map(|f| f.expected_delay(cfg.beta))
        .collect())
}

/// Measured per-token delay of each firing: its trigger frame plus the
/// look-ahead, clamped to the source length.
pub fn inference_delays<F: Real>(trace: &IntegrationTrace<F>, lookahead_frames: usize) -> Vec<usize> {
    trace
        .firings
        .iter()
        .map(|f| (f.fire_frame + lookahead_frames).min(trace.frames))
        .collect()
}

/// Index (1-based) of the firing whose accumulation band `((i-1)beta, i*beta)`
/// strictly contains `s`, or `None` when `s` sits exactly on a band edge.
fn band<F: Real>(s: F, beta: F) -> Option<usize> {
    let q = s / beta;
    let fl = q.floor();
    if q == fl {
        return None;
    }
    fl.to_usize().map(|i| i + 1)
}

/// Gradient of `sum_i <upstream_i, c_i>` with respect to the weights and the
/// frames, where `c_i` are the embeddings of the first `upstream.len()`
/// firings.
///
/// With `S_k` the prefix sums of `alpha` and `C^i_k = clamp(S_k, (i-1)beta, i*beta)`,
/// the `i`-th embedding is `sum_k (C^i_k - C^i_{k-1}) h_k`. The split points
/// are held fixed, so only frames whose prefix sum lies strictly inside a
/// band propagate gradient to the weights.
pub fn embeddings_vjp<F: Real>(
    h: &FeatureSequence<F>,
    alpha: &[F],
    cfg: &CifConfig<F>,
    upstream: &[Vec<F>],
) -> Result<(Vec<F>, Vec<F>)> {
    let u = h.len();
    if alpha.len() != u {
        return Err(Error::LengthMismatch {
            what: "weights",
            expected: u,
            found: alpha.len(),
        });
    }
    let trace = fire_weights(alpha, cfg)?;
    let n = upstream.len();
    if trace.len() < n {
        return Err(Error::TooFewFirings {
            needed: n,
            found: trace.len(),
        });
    }
    let d = h.dim();
    let dot = |g: &[F], a: &[F], b: Option<&[F]>| -> F {
        match b {
            Some(b) => g.iter().zip(a).zip(b).map(|((&g, &x), &y)| g * (x - y)).sum(),
            None => g.iter().zip(a).map(|(&g, &x)| g * x).sum(),
        }
    };

    // Contribution of each prefix sum S_k, then suffix-accumulated.
    let mut prefix = F::zero();
    let mut contrib = vec![F::zero(); u];
    for k in 1..=u {
        prefix = prefix + alpha[k - 1];
        if let Some(i) = band(prefix, cfg.beta) {
            if i <= n {
                let g = &upstream[i - 1];
                let next = if k < u { Some(h.frame(k + 1)) } else { None };
                contrib[k - 1] = dot(g, h.frame(k), next);
            }
        }
    }
    let mut grad_alpha = vec![F::zero(); u];
    let mut acc = F::zero();
    for k in (0..u).rev() {
        acc = acc + contrib[k];
        grad_alpha[k] = acc;
    }

    let mut grad_h = vec![F::zero(); u * d];
    for (f, g) in trace.firings.iter().zip(upstream) {
        for &(k, w) in &f.terms {
            let row = &mut grad_h[(k - 1) * d..k * d];
            for (r, &gi) in row.iter_mut().zip(g) {
                *r = *r + w * gi;
            }
        }
    }
    Ok((grad_alpha, grad_h))
}

/// Gradient of `sum_i upstream_i * d(y_i)` with respect to the weights.
pub fn expected_delays_vjp<F: Real>(alpha: &[F], cfg: &CifConfig<F>, upstream: &[F]) -> Result<Vec<F>> {
    let positions: Vec<F> = (1..=alpha.len()).map(F::of_usize).collect();
    let h = FeatureSequence::new(positions, 1, F::one())?;
    let up: Vec<Vec<F>> = upstream.iter().map(|&g| vec![g / cfg.beta]).collect();
    Ok(embeddings_vjp(&h, alpha, cfg, &up)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(rows: &[&[f64]]) -> FeatureSequence<f64> {
        FeatureSequence::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>(), 40.0).unwrap()
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    fn cfg() -> CifConfig<f64> {
        CifConfig::default()
    }

    #[test]
    fn step_splits_weight_across_threshold() {
        let h1 = [1.0, 0.0];
        let h2 = [0.0, 1.0];
        let mut s = CifState::new();
        assert!(s.step(&h1, 0.6, &cfg()).unwrap().is_empty());
        let fired = s.step(&h2, 0.7, &cfg()).unwrap();
        assert_eq!(fired.len(), 1);
        let f = &fired[0];
        assert!(close(&f.embedding, &[0.6, 0.4]));
        assert_eq!(f.terms[0], (1, 0.6));
        assert!((f.terms[1].1 - 0.4).abs() < 1e-12);
        assert_eq!(f.fire_frame, 2);
        assert!((s.accumulated() - 0.3).abs() < 1e-12);
        assert_eq!(s.queue().len(), 1);
        assert_eq!(s.queue()[0].0, 2);
    }

    #[test]
    fn step_fires_on_equality_and_keeps_zero_copy() {
        let (s, fired) = cif_step(&CifState::new(), &[3.0], 1.0, &cfg()).unwrap();
        assert_eq!(fired.len(), 1);
        assert_eq!(fired[0].embedding, vec![3.0]);
        assert_eq!(s.accumulated(), 0.0);
        assert_eq!(s.queue(), &[(1, 0.0)]);
    }

    #[test]
    fn step_repeats_split_for_large_weight() {
        let (s, fired) = cif_step(&CifState::new(), &[2.0], 2.5, &cfg()).unwrap();
        assert_eq!(fired.len(), 2);
        assert_eq!(fired[0].embedding, vec![2.0]);
        assert_eq!(fired[1].embedding, vec![2.0]);
        assert_eq!(fired[1].index, 2);
        assert_eq!(s.accumulated(), 0.5);
    }

    #[test]
    fn step_rejects_bad_input() {
        let mut s = CifState::new();
        s.step(&[1.0, 2.0], 0.1, &cfg()).unwrap();
        assert!(matches!(
            s.step(&[1.0], 0.1, &cfg()),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(s.step(&[1.0, 2.0], f64::NAN, &cfg()).is_err());
        assert!(s.step(&[1.0, 2.0], -0.1, &cfg()).is_err());
        assert!(s.step(&[f64::INFINITY, 2.0], 0.1, &cfg()).is_err());
    }

    #[test]
    fn integrate_examples() {
        let h = seq(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let t = integrate_and_fire(&h, &WeightSequence(vec![0.6, 0.7, 0.9]), &cfg()).unwrap();
        assert_eq!(t.len(), 2);
        assert!(close(&t.firings[0].embedding, &[0.6, 0.4, 0.0]));
        assert!(close(&t.firings[1].embedding, &[0.0, 0.3, 0.7]));
        assert_eq!(t.fire_frames(), vec![2, 3]);
        assert!((t.residual - 0.2).abs() < 1e-12);

        let h = seq(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let t = integrate_and_fire(&h, &WeightSequence(vec![1.0, 1.0]), &cfg()).unwrap();
        assert_eq!(t.embeddings(), vec![&[1.0, 2.0][..], &[3.0, 4.0][..]]);

        let t = integrate_and_fire(&h, &WeightSequence(vec![0.4, 0.3]), &cfg()).unwrap();
        assert_eq!(t.len(), 1);
        assert!(t.firings[0].is_tail);
        assert_eq!(t.firings[0].fire_frame, 2);
        assert!(close(&t.firings[0].embedding, &[0.4 + 0.9, 0.8 + 1.2]));
        assert_eq!(t.residual, 0.0);

        assert!(integrate_and_fire(&h, &WeightSequence(vec![0.4]), &cfg()).is_err());
    }

    #[test]
    fn tail_threshold_examples() {
        let c = cfg();
        let mut s = CifState::new();
        s.step(&[1.0], 0.4, &c).unwrap();
        s.step(&[2.0], 0.3, &c).unwrap();
        let (_, f) = tail_handle(&s, &c);
        let f = f.unwrap();
        assert!((f.embedding[0] - 1.0).abs() < 1e-12);
        assert!(f.is_tail);

        let mut s = CifState::new();
        s.step(&[1.0], 0.2, &c).unwrap();
        assert!(tail_handle(&s, &c).1.is_none());

        let mut s = CifState::new();
        s.step(&[1.0], 0.5, &c).unwrap();
        assert!(tail_handle(&s, &c).1.is_some());
    }

    #[test]
    fn scale_weights_examples() {
        let s = scale_weights(&WeightSequence(vec![0.6, 0.7, 0.9]), 2, &cfg()).unwrap();
        assert!(close(s.as_slice(), &[6.0 / 11.0, 7.0 / 11.0, 9.0 / 11.0]));
        assert!((s.sum() - 2.0).abs() < 1e-12);
        let already = WeightSequence(vec![0.5, 1.0, 0.5]);
        assert_eq!(scale_weights(&already, 2, &cfg()).unwrap(), already);
        assert!(matches!(
            scale_weights(&WeightSequence(vec![0.0, 0.0, 0.0]), 2, &cfg()),
            Err(Error::DegenerateWeights)
        ));
    }

    #[test]
    fn expected_delay_examples() {
        let d = expected_delays(&WeightSequence(vec![0.6, 0.7, 0.9]), &cfg(), 2).unwrap();
        assert!(close(&d, &[1.4, 2.7]));
        let d = expected_delays(&WeightSequence(vec![1.0, 1.0]), &cfg(), 2).unwrap();
        assert!(close(&d, &[1.0, 2.0]));
        let d = expected_delays(&WeightSequence(vec![0.5; 4]), &cfg(), 2).unwrap();
        assert!(close(&d, &[1.5, 3.5]));
        assert!(matches!(
            expected_delays(&WeightSequence(vec![0.2, 0.2]), &cfg(), 1),
            Err(Error::TooFewFirings { .. })
        ));
    }

    #[test]
    fn inference_delay_examples() {
        let h = seq(&[&[0.0], &[0.0], &[0.0]]);
        let t = integrate_and_fire(&h, &WeightSequence(vec![0.6, 0.7, 0.9]), &cfg()).unwrap();
        assert_eq!(inference_delays(&t, 0), vec![2, 3]);
        assert_eq!(inference_delays(&t, 8), vec![3, 3]);
        let mut wide = t.clone();
        wide.frames = 100;
        wide.firings[0].fire_frame = 16;
        wide.firings[1].fire_frame = 20;
        assert_eq!(inference_delays(&wide, 8), vec![24, 28]);
    }

    #[test]
    fn integration_trace_jsonl_round_trip() {
        let h = seq(&[&[0.25, 1.0], &[0.5, -1.0], &[2.0, 0.1]]);
        let t = integrate_and_fire(&h, &WeightSequence(vec![0.6, 0.7, 0.9]), &cfg()).unwrap();
        let mut buf = Vec::new();
        t.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(IntegrationTrace::<f64>::from_jsonl(&text).unwrap(), t);
    }

    #[test]
    fn f32_path_matches_example() {
        let h = FeatureSequence::<f32>::new(vec![1.0, 2.0, 3.0], 1, 40.0).unwrap();
        let t = integrate_and_fire(&h, &WeightSequence(vec![0.5f32, 0.75, 0.75]), &CifConfig::default()).unwrap();
        assert_eq!(t.len(), 2);
        assert!((t.firings[0].embedding[0] - (0.5 + 0.5 * 2.0)).abs() < 1e-6);
    }
}
