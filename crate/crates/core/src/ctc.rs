//! Connectionist temporal classification: loss, gradient, Viterbi forced
//! alignment and an exhaustive oracle for small instances.
//!
//! The blank is always the last vocabulary entry (`V - 1`). Dynamic programs
//! run over the extended label sequence `blank y_1 blank y_2 ... y_T blank`,
//! in log space.

use std::collections::BTreeMap;

use crate::domain::{AlignmentPath, Label, TargetSequence};
use crate::error::{Error, Result};
use crate::scalar::{log_add, log_sum_exp, Real};

/// Per-frame log-probabilities of the auxiliary CTC head, `U x V`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionGrid<F = f64> {
    log_probs: Vec<F>,
    vocab: usize,
}

impl<F: Real> EmissionGrid<F> {
    /// Requires every row to be a normalized log-distribution (within 1e-6).
    pub fn from_log_probs(log_probs: Vec<F>, vocab: usize) -> Result<Self> {
        let grid = Self::unnormalized(log_probs, vocab)?;
        for (j, row) in grid.rows().enumerate() {
            let z = log_sum_exp(row);
            if (z.to_f64_lossy()).abs() > 1e-6 {
                return Err(Error::MalformedGrid(format!(
                    "row {} log-sums to {z}, expected 0",
                    j + 1
                )));
            }
        }
        Ok(grid)
    }

    /// Skips the normalization check; entries may be any finite value or
    /// `-inf`. Used when differentiating with respect to individual entries.
    pub fn unnormalized(log_probs: Vec<F>, vocab: usize) -> Result<Self> {
        if vocab < 2 {
            return Err(Error::MalformedGrid("vocabulary needs a token and a blank".into()));
        }
        if log_probs.is_empty() || !log_probs.len().is_multiple_of(vocab) {
            return Err(Error::MalformedGrid(format!(
                "{} entries do not form rows of {vocab}",
                log_probs.len()
            )));
        }
        if log_probs.iter().any(|x| x.is_nan() || *x == F::infinity()) {
            return Err(Error::MalformedGrid("NaN or +inf entry".into()));
        }
        Ok(Self { log_probs, vocab })
    }

    pub fn from_probs(rows: &[Vec<F>]) -> Result<Self> {
        let vocab = rows.first().map(Vec::len).ok_or(Error::Empty("emission grid"))?;
        let mut data = Vec::with_capacity(rows.len() * vocab);
        for row in rows {
            if row.len() != vocab {
                return Err(Error::MalformedGrid("ragged probability rows".into()));
            }
            if row.iter().any(|&p| p < F::zero()) {
                return Err(Error::MalformedGrid("negative probability".into()));
            }
            data.extend(row.iter().map(|p| p.ln()));
        }
        Self::from_log_probs(data, vocab)
    }

    /// Applies a row-wise log-softmax to unnormalized scores.
    pub fn from_logits(logits: &[F], vocab: usize) -> Result<Self> {
        if vocab == 0 || !logits.len().is_multiple_of(vocab) {
            return Err(Error::MalformedGrid("logits do not form rows".into()));
        }
        let mut out = Vec::with_capacity(logits.len());
        for row in logits.chunks_exact(vocab) {
            let z = log_sum_exp(row);
            out.extend(row.iter().map(|&x| x - z));
        }
        Self::unnormalized(out, vocab)
    }

    /// Parses comma-separated probability rows, one frame per line.
    pub fn from_prob_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split(',')
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .map(F::lit)
                        .map_err(|e| Error::MalformedGrid(format!("line {}: {e}", i + 1)))
                })
                .collect::<Result<Vec<F>>>()?;
            rows.push(row);
        }
        Self::from_probs(&rows)
    }

    pub fn frames(&self) -> usize {
        self.log_probs.len() / self.vocab
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn blank(&self) -> usize {
        self.vocab - 1
    }

    /// Log-probability of token `v` at frame `t` (0-based frame).
    pub fn get(&self, t: usize, v: usize) -> F {
        self.log_probs[t * self.vocab + v]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[F]> {
        self.log_probs.chunks_exact(self.vocab)
    }

    pub fn as_slice(&self) -> &[F] {
        &self.log_probs
    }
}

fn check_feasible<F: Real>(e: &EmissionGrid<F>, y: &TargetSequence) -> Result<Vec<usize>> {
    if y.vocab_size() != e.vocab() {
        return Err(Error::MalformedGrid(format!(
            "grid has {} columns, target vocabulary is {}",
            e.vocab(),
            y.vocab_size()
        )));
    }
    let required = y.len() + y.repeats();
    if e.frames() < required {
        return Err(Error::InfeasibleAlignment {
            frames: e.frames(),
            required,
        });
    }
    let blank = e.blank();
    let mut ext = Vec::with_capacity(2 * y.len() + 1);
    ext.push(blank);
    for &t in y.tokens() {
        ext.push(t);
        ext.push(blank);
    }
    Ok(ext)
}

/// Whether position `s` of the extended sequence may be entered from `s - 2`.
fn can_skip(ext: &[usize], s: usize, blank: usize) -> bool {
    s >= 2 && ext[s] != blank && ext[s] != ext[s - 2]
}

fn forward<F: Real>(e: &EmissionGrid<F>, ext: &[usize]) -> Vec<F> {
    let (u, s_len, blank) = (e.frames(), ext.len(), e.blank());
    let ninf = F::neg_infinity();
    let mut alpha = vec![ninf; u * s_len];
    alpha[0] = e.get(0, ext[0]);
    if s_len > 1 {
        alpha[1] = e.get(0, ext[1]);
    }
    for t in 1..u {
        let (prev, cur) = alpha.split_at_mut(t * s_len);
        let prev = &prev[(t - 1) * s_len..];
        for s in 0..s_len {
            let mut acc = prev[s];
            if s >= 1 {
                acc = log_add(acc, prev[s - 1]);
            }
            if can_skip(ext, s, blank) {
                acc = log_add(acc, prev[s - 2]);
            }
            cur[s] = if acc == ninf { ninf } else { acc + e.get(t, ext[s]) };
        }
    }
    alpha
}

fn backward<F: Real>(e: &EmissionGrid<F>, ext: &[usize]) -> Vec<F> {
    let (u, s_len, blank) = (e.frames(), ext.len(), e.blank());
    let ninf = F::neg_infinity();
    let mut beta = vec![ninf; u * s_len];
    let last = (u - 1) * s_len;
    beta[last + s_len - 1] = e.get(u - 1, ext[s_len - 1]);
    if s_len > 1 {
        beta[last + s_len - 2] = e.get(u - 1, ext[s_len - 2]);
    }
    for t in (0..u - 1).rev() {
        let (cur, next) = beta.split_at_mut((t + 1) * s_len);
        let cur = &mut cur[t * s_len..];
        let next = &next[..s_len];
        for s in 0..s_len {
            let mut acc = next[s];
            if s + 1 < s_len {
                acc = log_add(acc, next[s + 1]);
            }
            if s + 2 < s_len && can_skip(ext, s + 2, blank) {
                acc = log_add(acc, next[s + 2]);
            }
            cur[s] = if acc == ninf { ninf } else { acc + e.get(t, ext[s]) };
        }
    }
    beta
}

fn total_log_prob<F: Real>(alpha: &[F], u: usize, s_len: usize) -> F {
    let last = &alpha[(u - 1) * s_len..];
    if s_len > 1 {
        log_add(last[s_len - 1], last[s_len - 2])
    } else {
        last[0]
    }
}

/// Negative log-likelihood of `y`, summed over every valid alignment.
pub fn ctc_loss<F: Real>(e: &EmissionGrid<F>, y: &TargetSequence) -> Result<F> {
    let ext = check_feasible(e, y)?;
    let alpha = forward(e, &ext);
    Ok(-total_log_prob(&alpha, e.frames(), ext.len()))
}

/// Loss together with its gradient with respect to every log-probability
/// entry (row-major `U x V`), from forward-backward occupancies.
pub fn ctc_loss_grad<F: Real>(e: &EmissionGrid<F>, y: &TargetSequence) -> Result<(F, Vec<F>)> {
    let ext = check_feasible(e, y)?;
    let (u, s_len, v) = (e.frames(), ext.len(), e.vocab());
    let alpha = forward(e, &ext);
    let beta = backward(e, &ext);
    let log_p = total_log_prob(&alpha, u, s_len);
    let mut grad = vec![F::zero(); u * v];
    for t in 0..u {
        for (s, &lab) in ext.iter().enumerate() {
            let a = alpha[t * s_len + s];
            let b = beta[t * s_len + s];
            if a == F::neg_infinity() || b == F::neg_infinity() {
                continue;
            }
            let occ = (a + b - e.get(t, lab) - log_p).exp();
            grad[t * v + lab] = grad[t * v + lab] - occ;
        }
    }
    Ok((-log_p, grad))
}

/// Maximum-probability valid path (Viterbi over the extended labels).
///
/// Ties prefer staying on the current extended position, then the
/// neighbouring position, then the skip; at the end a blank finish wins ties.
pub fn ctc_forced_alignment<F: Real>(e: &EmissionGrid<F>, y: &TargetSequence) -> Result<AlignmentPath> {
    let ext = check_feasible(e, y)?;
    let (u, s_len, blank) = (e.frames(), ext.len(), e.blank());
    let ninf = F::neg_infinity();
    let mut score = vec![ninf; u * s_len];
    let mut back = vec![0u8; u * s_len];
    score[0] = e.get(0, ext[0]);
    if s_len > 1 {
        score[1] = e.get(0, ext[1]);
    }
    for t in 1..u {
        for s in 0..s_len {
            let prev = (t - 1) * s_len;
            let mut best = score[prev + s];
            let mut step = 0u8;
            if s >= 1 && score[prev + s - 1] > best {
                best = score[prev + s - 1];
                step = 1;
            }
            if can_skip(&ext, s, blank) && score[prev + s - 2] > best {
                best = score[prev + s - 2];
                step = 2;
            }
            if best != ninf {
                score[t * s_len + s] = best + e.get(t, ext[s]);
                back[t * s_len + s] = step;
            }
        }
    }
    let last = (u - 1) * s_len;
    let mut s = if s_len > 1 && score[last + s_len - 2] > score[last + s_len - 1] {
        s_len - 2
    } else {
        s_len - 1
    };
    let mut states = vec![0usize; u];
    for t in (0..u).rev() {
        states[t] = s;
        if t > 0 {
            s -= back[t * s_len + s] as usize;
        }
    }
    let labels = states
        .into_iter()
        .map(|s| {
            if s % 2 == 0 {
                Label::Blank
            } else {
                Label::Token(s.div_ceil(2))
            }
        })
        .collect();
    AlignmentPath::new(labels)
}

/// Boundary frames: every `j` with `a_j` non-blank and `a_j != a_{j+1}`
/// (`a_{U+1}` is blank), mapped to the 1-based target position of `a_j`.
pub fn extract_boundaries(labels: &[Label]) -> BTreeMap<usize, usize> {
    let mut out = BTreeMap::new();
    for (j, &a) in labels.iter().enumerate() {
        let next = labels.get(j + 1).copied().unwrap_or(Label::Blank);
        if let Label::Token(p) = a {
            if a != next {
                out.insert(j + 1, p);
            }
        }
    }
    out
}

/// Log-probability of one alignment path under the grid.
pub fn path_log_prob<F: Real>(e: &EmissionGrid<F>, y: &TargetSequence, path: &AlignmentPath) -> F {
    path.labels()
        .iter()
        .enumerate()
        .map(|(t, l)| match *l {
            Label::Blank => e.get(t, e.blank()),
            Label::Token(p) => e.get(t, y.tokens()[p - 1]),
        })
        .sum()
}

/// Exhaustive CTC result for small instances.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForce<F = f64> {
    pub loss: F,
    pub best_log_prob: F,
    pub best_path: AlignmentPath,
    pub valid_paths: usize,
}

/// Enumerates every length-`U` label sequence, keeps those collapsing to `y`,
/// and returns the exact loss and the most probable path.
/// Limited to `U <= 8`, `T <= 4`, `V <= 4`.
pub fn brute_force_ctc<F: Real>(e: &EmissionGrid<F>, y: &TargetSequence) -> Result<BruteForce<F>> {
    let (u, v) = (e.frames(), e.vocab());
    if u > 8 || y.len() > 4 || v > 4 {
        return Err(Error::OracleBounds(format!(
            "U={u}, T={}, V={v} exceeds U<=8, T<=4, V<=4",
            y.len()
        )));
    }
    if y.vocab_size() != v {
        return Err(Error::MalformedGrid("vocabulary mismatch".into()));
    }
    let blank = e.blank();
    let mut path = vec![0usize; u];
    let mut log_probs = Vec::new();
    let mut best: Option<(F, Vec<usize>)> = None;
    let total = v.pow(u as u32);
    for code in 0..total {
        let mut c = code;
        for slot in path.iter_mut().rev() {
            *slot = c % v;
            c /= v;
        }
        let mut collapsed = Vec::new();
        let mut prev = None;
        for &p in &path {
            if Some(p) != prev && p != blank {
                collapsed.push(p);
            }
            prev = Some(p);
        }
        if collapsed != y.tokens() {
            continue;
        }
        let lp: F = path.iter().enumerate().map(|(t, &p)| e.get(t, p)).sum();
        log_probs.push(lp);
        if best.as_ref().is_none_or(|b| lp > b.0) {
            best = Some((lp, path.clone()));
        }
    }
    let (best_lp, best_ids) = best.ok_or(Error::InfeasibleAlignment {
        frames: u,
        required: y.len() + y.repeats(),
    })?;
    let mut labels = Vec::with_capacity(u);
    let mut pos = 0usize;
    let mut prev = None;
    for &p in &best_ids {
        if p == blank {
            labels.push(Label::Blank);
        } else {
            if Some(p) != prev {
                pos += 1;
            }
            labels.push(Label::Token(pos));
        }
        prev = Some(p);
    }
    Ok(BruteForce {
        loss: -log_sum_exp(&log_probs),
        best_log_prob: best_lp,
        best_path: AlignmentPath::new(labels)?,
        valid_paths: log_probs.len(),
    })
}
