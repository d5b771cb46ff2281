//! Domain values shared across the crate.
//!
//! Frame and token positions that appear in traces, alignments and boundary
//! maps are 1-based, matching the way delays are counted in source frames.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Encoder frame duration: 10 ms shift subsampled by two stride-2 convolutions.
pub const DEFAULT_FRAME_MS: f64 = 40.0;

/// Encoder states `h_1..h_U`, stored row-major as a `U x dim` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence<F = f64> {
    data: Vec<F>,
    dim: usize,
    frame_ms: F,
}

impl<F: Real> FeatureSequence<F> {
    pub fn new(data: Vec<F>, dim: usize, frame_ms: F) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("feature dimension must be >= 1".into()));
        }
        if data.is_empty() {
            return Err(Error::Empty("feature sequence"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: data.len() % dim,
            });
        }
        if !(frame_ms > F::zero()) || !frame_ms.is_finite() {
            return Err(Error::InvalidConfig("frame duration must be positive".into()));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                what: "feature",
                index: i / dim + 1,
            });
        }
        Ok(Self { data, dim, frame_ms })
    }

    pub fn from_rows(rows: &[Vec<F>], frame_ms: F) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or(Error::Empty("feature sequence"))?;
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(data, dim, frame_ms)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame_ms(&self) -> F {
        self.frame_ms
    }

    /// Frame `j`, 1-based.
    pub fn frame(&self, j: usize) -> &[F] {
        assert!(j >= 1 && j <= self.len(), "frame index {j} out of range");
        &self.data[(j - 1) * self.dim..j * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[F]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn duration_ms(&self) -> F {
        frames_to_ms(self.len(), self.frame_ms)
    }

    /// Causal view onto frames `1..=len`.
    pub fn prefix(&self, len: usize) -> FramePrefix<'_, F> {
        assert!(len <= self.len());
        FramePrefix { seq: self, len }
    }
}

/// Read-only view of the first `len` frames of a sequence.
#[derive(Debug, Clone, Copy)]
pub struct FramePrefix<'a, F> {
    seq: &'a FeatureSequence<F>,
    len: usize,
}

impl<'a, F: Real> FramePrefix<'a, F> {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.seq.dim()
    }

    /// Frame `j`, 1-based; panics past the end of the prefix.
    pub fn frame(&self, j: usize) -> &'a [F] {
        assert!(j <= self.len, "frame {j} is beyond the causal prefix");
        self.seq.frame(j)
    }
}

/// Per-frame firing weights `alpha_1..alpha_U`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightSequence<F = f64>(pub Vec<F>);

impl<F: Real> WeightSequence<F> {
    pub fn new(weights: Vec<F>) -> Self {
        Self(weights)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[F] {
        &self.0
    }

    pub fn sum(&self) -> F {
        self.0.iter().copied().sum()
    }

    pub fn validate(&self, scaled: bool) -> Result<()> {
        validate_weights(self, scaled)
    }
}

/// Checks the weight invariants: raw weights lie in `(0, 1)`, scaled weights
/// are only required to be finite and non-negative. Reports the first
/// offending index (1-based).
pub fn validate_weights<F: Real>(w: &WeightSequence<F>, scaled: bool) -> Result<()> {
    for (i, &a) in w.0.iter().enumerate() {
        let reason = if !a.is_finite() {
            Some("not finite")
        } else if scaled && a < F::zero() {
            Some("negative scaled weight")
        } else if !scaled && a <= F::zero() {
            Some("raw weight <= 0")
        } else if !scaled && a >= F::one() {
            Some("raw weight >= 1")
        } else {
            None
        };
        if let Some(reason) = reason {
            return Err(Error::InvalidWeight {
                index: i + 1,
                value: a.to_f64_lossy(),
                reason,
            });
        }
    }
    Ok(())
}

/// Firing threshold and residual (tail) threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CifConfig<F = f64> {
    pub beta: F,
    pub tail_threshold: F,
}

impl<F: Real> CifConfig<F> {
    pub fn new(beta: F, tail_threshold: F) -> Result<Self> {
        let cfg = Self { beta, tail_threshold };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Threshold `beta` with the tail threshold at `beta / 2`.
    pub fn with_beta(beta: F) -> Result<Self> {
        Self::new(beta, beta / F::lit(2.0))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > F::zero()) || !self.beta.is_finite() {
            return Err(Error::InvalidConfig(format!("beta must be > 0, got {}", self.beta)));
        }
        if !(self.tail_threshold > F::zero()) || self.tail_threshold > self.beta {
            return Err(Error::InvalidConfig(format!(
                "tail threshold must lie in (0, beta], got {}",
                self.tail_threshold
            )));
        }
        Ok(())
    }
}

impl<F: Real> Default for CifConfig<F> {
    fn default() -> Self {
        Self {
            beta: F::one(),
            tail_threshold: F::lit(0.5),
        }
    }
}

/// Target token ids `y_1..y_T`. The last id of the vocabulary is the CTC
/// blank and never appears as a target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSequence {
    tokens: Vec<usize>,
    vocab_size: usize,
}

impl TargetSequence {
    pub fn new(tokens: Vec<usize>, vocab_size: usize) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::Empty("target sequence"));
        }
        if vocab_size < 2 {
            return Err(Error::InvalidConfig(
                "vocabulary needs at least one token besides blank".into(),
            ));
        }
        let blank = vocab_size - 1;
        if let Some(&bad) = tokens.iter().find(|&&t| t >= blank) {
            return Err(Error::InvalidConfig(format!(
                "token id {bad} is blank or outside vocabulary of {vocab_size}"
            )));
        }
        Ok(Self { tokens, vocab_size })
    }

    pub fn tokens(&self) -> &[usize] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn blank(&self) -> usize {
        self.vocab_size - 1
    }

    /// Number of adjacent equal tokens; each forces an extra blank frame in CTC.
    pub fn repeats(&self) -> usize {
        self.tokens.windows(2).filter(|w| w[0] == w[1]).count()
    }
}

/// One CTC alignment label: blank, or the 1-based position of a target token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Blank,
    Token(usize),
}

/// Frame-level CTC alignment `a_1..a_U` with its boundary map `j -> t_j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentPath {
    labels: Vec<Label>,
    boundaries: BTreeMap<usize, usize>,
}

impl AlignmentPath {
    /// Builds a path; token positions must start at 1 and advance by at most
    /// one per frame.
    pub fn new(labels: Vec<Label>) -> Result<Self> {
        let mut last = 0usize;
        for (j, l) in labels.iter().enumerate() {
            if let Label::Token(p) = *l {
                let prev = if j > 0 { labels[j - 1] } else { Label::Blank };
                let ok = match prev {
                    Label::Token(q) => p == q || p == q + 1,
                    Label::Blank => p == last + 1,
                };
                if !ok || p == 0 {
                    return Err(Error::InvalidConfig(format!(
                        "alignment is not monotone at frame {}",
                        j + 1
                    )));
                }
                last = p;
            }
        }
        let boundaries = crate::ctc::extract_boundaries(&labels);
        Ok(Self { labels, boundaries })
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    /// Boundary frame (1-based) to target length.
    pub fn boundaries(&self) -> &BTreeMap<usize, usize> {
        &self.boundaries
    }

    /// Number of aligned target tokens.
    pub fn target_len(&self) -> usize {
        self.boundaries.len()
    }

    /// Collapses the path into target token ids.
    pub fn collapse(&self, targets: &[usize]) -> Vec<usize> {
        self.boundaries.values().map(|&t| targets[t - 1]).collect()
    }
}

/// Loss mixing coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_ctc: f64,
    pub lambda_qua: f64,
    pub lambda_lat: f64,
}

impl LossWeights {
    /// Latency weights swept during fine-tuning.
    pub const LATENCY_SWEEP: [f64; 5] = [0.0, 0.5, 1.0, 1.5, 2.0];

    pub fn new(lambda_ctc: f64, lambda_qua: f64, lambda_lat: f64) -> Result<Self> {
        let w = Self {
            lambda_ctc,
            lambda_qua,
            lambda_lat,
        };
        for (name, v) in [("ctc", lambda_ctc), ("qua", lambda_qua), ("lat", lambda_lat)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "lambda_{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(w)
    }

    pub fn with_latency(lambda_lat: f64) -> Result<Self> {
        Self::new(0.3, 1.0, lambda_lat)
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_ctc: 0.3,
            lambda_qua: 1.0,
            lambda_lat: 0.0,
        }
    }
}

/// Duration of `n` frames.
pub fn frames_to_ms<F: Real>(n: usize, frame_ms: F) -> F {
    F::of_usize(n) * frame_ms
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn frames_to_ms_examples() {
        assert_eq!(frames_to_ms(0, DEFAULT_FRAME_MS), 0.0);
        assert_eq!(frames_to_ms(16, DEFAULT_FRAME_MS), 640.0);
        assert_eq!(frames_to_ms(8, DEFAULT_FRAME_MS), 320.0);
    }

    #[test]
    fn validate_weights_examples() {
        assert!(validate_weights(&WeightSequence(vec![0.6, 0.7, 0.9]), false).is_ok());
        match validate_weights(&WeightSequence(vec![1.2, 0.5]), false) {
            Err(Error::InvalidWeight { index, value, .. }) => {
                assert_eq!(index, 1);
                assert_eq!(value, 1.2);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(validate_weights(&WeightSequence(vec![1.2, 0.8]), true).is_ok());
        assert!(validate_weights(&WeightSequence(vec![0.2, -0.1]), true).is_err());
        assert!(validate_weights(&WeightSequence(vec![0.2, f64::NAN]), true).is_err());
    }

    #[test]
    fn cif_config_defaults_and_bounds() {
        let c = CifConfig::<f64>::default();
        assert_eq!(c.beta, 1.0);
        assert_eq!(c.tail_threshold, 0.5);
        assert!(CifConfig::new(1.0, 1.5).is_err());
        assert!(CifConfig::new(0.0, 0.0).is_err());
        assert_eq!(CifConfig::with_beta(2.0).unwrap().tail_threshold, 1.0);
    }

    #[test]
    fn target_sequence_rejects_blank() {
        assert!(TargetSequence::new(vec![0, 1], 3).is_ok());
        assert!(TargetSequence::new(vec![0, 2], 3).is_err());
        assert!(TargetSequence::new(vec![], 3).is_err());
        assert_eq!(TargetSequence::new(vec![1, 1, 0, 0], 3).unwrap().repeats(), 2);
    }

    #[test]
    fn feature_sequence_rejects_bad_input() {
        assert!(FeatureSequence::new(vec![1.0, 2.0, 3.0], 2, 40.0).is_err());
        assert!(FeatureSequence::new(vec![1.0, f64::INFINITY], 1, 40.0).is_err());
        assert!(FeatureSequence::new(vec![1.0], 1, 0.0).is_err());
        let f = FeatureSequence::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]], 40.0).unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(f.frame(2), &[3.0, 4.0]);
        assert_eq!(f.duration_ms(), 80.0);
    }

    #[test]
    #[should_panic(expected = "causal prefix")]
    fn prefix_blocks_future_frames() {
        let f = FeatureSequence::from_rows(&[vec![1.0], vec![2.0]], 40.0).unwrap();
        let p = f.prefix(1);
        let _ = p.frame(2);
    }

    #[test]
    fn alignment_path_rejects_skips() {
        use Label::*;
        assert!(AlignmentPath::new(vec![Token(1), Blank, Token(2)]).is_ok());
        assert!(AlignmentPath::new(vec![Token(2)]).is_err());
        assert!(AlignmentPath::new(vec![Token(1), Token(3)]).is_err());
    }

    proptest! {
        #[test]
        fn frames_to_ms_is_linear(a in 0usize..100_000, b in 0usize..100_000, ms in 1.0f64..100.0) {
            let lhs = frames_to_ms(a + b, ms);
            let rhs = frames_to_ms(a, ms) + frames_to_ms(b, ms);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0));
        }
    }
}
