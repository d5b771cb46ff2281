//! Synthetic corpora with known token boundaries and variable speaking rate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{FeatureSequence, TargetSequence, DEFAULT_FRAME_MS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_utts: usize,
    /// Inclusive range of target lengths.
    pub tokens: (usize, usize),
    /// Inclusive range of frames per token.
    pub segment: (usize, usize),
    pub dim: usize,
    /// Number of real tokens; the blank is appended as id `vocab`.
    pub vocab: usize,
    pub noise: f64,
    pub cue_amplitude: f64,
    pub utts_per_talk: usize,
    pub frame_ms: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_utts: 200,
            tokens: (4, 10),
            segment: (3, 8),
            dim: 8,
            vocab: 12,
            noise: 0.1,
            cue_amplitude: 1.0,
            utts_per_talk: 10,
            frame_ms: DEFAULT_FRAME_MS,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.tokens.0 == 0 || self.tokens.0 > self.tokens.1 {
            return bad("token range must satisfy 1 <= min <= max");
        }
        if self.segment.0 == 0 || self.segment.0 > self.segment.1 {
            return bad("segment range must satisfy 1 <= min <= max");
        }
        if self.dim < 2 {
            return bad("feature dimension must be >= 2 (cue channel + token channels)");
        }
        if self.vocab == 0 {
            return bad("vocabulary must be non-empty");
        }
        if !(self.noise >= 0.0) || !self.noise.is_finite() {
            return bad("noise must be finite and >= 0");
        }
        if !(self.frame_ms > 0.0) {
            return bad("frame_ms must be positive");
        }
        if self.utts_per_talk == 0 {
            return bad("utts_per_talk must be >= 1");
        }
        Ok(())
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab + 1
    }
}

/// Provenance of a piece of a (possibly concatenated) utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtterancePart {
    pub id: String,
    pub frame_offset: usize,
    pub frames: usize,
    pub token_offset: usize,
    pub tokens: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticUtterance {
    pub id: String,
    pub talk_id: usize,
    pub features: FeatureSequence<f64>,
    pub target: TargetSequence,
    /// Last frame (1-based) of each token's segment.
    pub true_boundaries: Vec<usize>,
    pub parts: Vec<UtterancePart>,
}

impl SyntheticUtterance {
    pub fn new(
        id: String,
        talk_id: usize,
        features: FeatureSequence<f64>,
        target: TargetSequence,
        true_boundaries: Vec<usize>,
    ) -> Result<Self> {
        if true_boundaries.len() != target.len() {
            return Err(Error::LengthMismatch {
                what: "boundaries",
                expected: target.len(),
                found: true_boundaries.len(),
            });
        }
        if true_boundaries.windows(2).any(|w| w[0] >= w[1])
            || true_boundaries.first().is_some_and(|&b| b == 0)
            || true_boundaries.last().is_some_and(|&b| b > features.len())
        {
            return Err(Error::InvalidConfig(format!(
                "boundaries of {id} must be strictly increasing within 1..={}",
                features.len()
            )));
        }
        let parts = vec![UtterancePart {
            id: id.clone(),
            frame_offset: 0,
            frames: features.len(),
            token_offset: 0,
            tokens: target.len(),
        }];
        Ok(Self {
            id,
            talk_id,
            features,
            target,
            true_boundaries,
            parts,
        })
    }

    pub fn frames(&self) -> usize {
        self.features.len()
    }

    pub fn duration_s(&self) -> f64 {
        self.features.duration_ms() / 1000.0
    }

    /// Boundary map `frame -> token position` for the token-level quantity loss.
    pub fn boundary_map(&self) -> std::collections::BTreeMap<usize, usize> {
        self.true_boundaries
            .iter()
            .enumerate()
            .map(|(i, &j)| (j, i + 1))
            .collect()
    }
}

/// Raw weights that spread one unit over each token's segment, so that
/// CIF with `beta = 1` fires exactly at the true boundaries. The last frame of
/// a segment carries an extra `1e-9` so rounding in `n * (1/n)` never delays
/// a firing by a frame.
pub fn oracle_weights(utt: &SyntheticUtterance) -> Vec<f64> {
    let mut out = Vec::with_capacity(utt.frames());
    let mut start = 0usize;
    for &end in &utt.true_boundaries {
        let n = end - start;
        out.extend(std::iter::repeat_n(1.0 / n as f64, n));
        *out.last_mut().expect("segments are non-empty") += 1e-9;
        start = end;
    }
    out.resize(utt.frames(), 1e-3);
    out
}

/// Generates a corpus deterministically from `cfg.seed`.
///
/// Channel 0 carries a boundary cue on the last frame of every token segment;
/// the remaining channels carry a fixed unit-norm embedding of the token.
/// Gaussian noise of standard deviation `noise` is added everywhere.
pub fn synth_task(cfg: &SynthConfig) -> Result<Corpus> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let width = cfg.dim - 1;
    let table: Vec<Vec<f64>> = (0..cfg.vocab)
        .map(|_| {
            let v: Vec<f64> = (0..width).map(|_| std_normal.sample(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect();

    let mut utterances = Vec::with_capacity(cfg.n_utts);
    for n in 0..cfg.n_utts {
        let t_len = rng.random_range(cfg.tokens.0..=cfg.tokens.1);
        let tokens: Vec<usize> = (0..t_len).map(|_| rng.random_range(0..cfg.vocab)).collect();
        let mut data = Vec::new();
        let mut boundaries = Vec::with_capacity(t_len);
        let mut frames = 0usize;
        for &tok in &tokens {
            let seg = rng.random_range(cfg.segment.0..=cfg.segment.1);
            for p in 0..seg {
                let cue = if p + 1 == seg { cfg.cue_amplitude } else { 0.0 };
                data.push(cue + cfg.noise * std_normal.sample(&mut rng));
                for &e in &table[tok] {
                    data.push(e + cfg.noise * std_normal.sample(&mut rng));
                }
            }
            frames += seg;
            boundaries.push(frames);
        }
        utterances.push(SyntheticUtterance::new(
            format!("utt{n:05}"),
            n / cfg.utts_per_talk,
            FeatureSequence::new(data, cfg.dim, cfg.frame_ms)?,
            TargetSequence::new(tokens, cfg.vocab_size())?,
            boundaries,
        )?);
    }
    Ok(Corpus {
        frame_ms: cfg.frame_ms,
        dim: cfg.dim,
        vocab_size: cfg.vocab_size(),
        utterances,
    })
}

/// A set of utterances sharing frame rate, feature dimension and vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub frame_ms: f64,
    pub dim: usize,
    pub vocab_size: usize,
    pub utterances: Vec<SyntheticUtterance>,
}

#[derive(Serialize, Deserialize)]
struct ManifestUtterance {
    id: String,
    talk_id: usize,
    tokens: Vec<usize>,
    boundaries: Vec<usize>,
    #[serde(default)]
    parts: Vec<UtterancePart>,
    frames: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    version: u32,
    frame_ms: f64,
    dim: usize,
    vocab_size: usize,
    utterances: Vec<ManifestUtterance>,
}

const MANIFEST_VERSION: u32 = 1;

impl Corpus {
    pub fn total_frames(&self) -> usize {
        self.utterances.iter().map(|u| u.frames()).sum()
    }

    pub fn mean_duration_s(&self) -> f64 {
        if self.utterances.is_empty() {
            return 0.0;
        }
        self.utterances.iter().map(|u| u.duration_s()).sum::<f64>() / self.utterances.len() as f64
    }

    /// Serializes to the JSON corpus manifest (features inline).
    pub fn to_manifest_json(&self) -> Result<String> {
        let m = Manifest {
            version: MANIFEST_VERSION,
            frame_ms: self.frame_ms,
            dim: self.dim,
            vocab_size: self.vocab_size,
            utterances: self
                .utterances
                .iter()
                .map(|u| ManifestUtterance {
                    id: u.id.clone(),
                    talk_id: u.talk_id,
                    tokens: u.target.tokens().to_vec(),
                    boundaries: u.true_boundaries.clone(),
                    parts: u.parts.clone(),
                    frames: u.features.rows().map(<[f64]>::to_vec).collect(),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&m)?)
    }

    pub fn from_manifest_json(text: &str) -> Result<Self> {
        let m: Manifest = serde_json::from_str(text)?;
        if m.version != MANIFEST_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported manifest version {}",
                m.version
            )));
        }
        let utterances = m
            .utterances
            .into_iter()
            .map(|u| {
                let features = FeatureSequence::from_rows(&u.frames, m.frame_ms)?;
                if features.dim() != m.dim {
                    return Err(Error::DimensionMismatch {
                        expected: m.dim,
                        found: features.dim(),
                    });
                }
                let mut utt = SyntheticUtterance::new(
                    u.id,
                    u.talk_id,
                    features,
                    TargetSequence::new(u.tokens, m.vocab_size)?,
                    u.boundaries,
                )?;
                if !u.parts.is_empty() {
                    utt.parts = u.parts;
                }
                Ok(utt)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            frame_ms: m.frame_ms,
            dim: m.dim,
            vocab_size: m.vocab_size,
            utterances,
        })
    }
}
