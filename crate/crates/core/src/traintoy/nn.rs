//! Layers of the toy stack with hand-written backward passes.

use libm::erf;
use serde::{Deserialize, Serialize};

use crate::domain::{FeatureSequence, FramePrefix, WeightSequence};
use crate::error::{Error, Result};

const LN_EPS: f64 = 1e-5;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Causal convolution width of the weight predictor.
pub const KERNEL_WIDTH: usize = 3;

/// Exact GELU, `x * Phi(x)`.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

pub fn gelu_grad(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2));
    cdf + x * INV_SQRT_2PI * (-0.5 * x * x).exp()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `y = W x` for a row-major `rows x cols` matrix.
pub(crate) fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    (0..rows)
        .map(|r| w[r * cols..(r + 1) * cols].iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

/// `y = W^T g`.
pub(crate) fn matvec_t(w: &[f64], rows: usize, cols: usize, g: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for (r, &gr) in g.iter().enumerate().take(rows) {
        for (o, &wv) in out.iter_mut().zip(&w[r * cols..(r + 1) * cols]) {
            *o += gr * wv;
        }
    }
    out
}

/// `W += g x^T`.
pub(crate) fn outer_add(w: &mut [f64], cols: usize, g: &[f64], x: &[f64]) {
    for (r, &gr) in g.iter().enumerate() {
        for (wv, &xv) in w[r * cols..(r + 1) * cols].iter_mut().zip(x) {
            *wv += gr * xv;
        }
    }
}

/// Causal conv (width 3) -> layer norm -> GELU -> linear(1) -> sigmoid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightPredictorParams {
    pub dim_in: usize,
    pub hidden: usize,
    /// `[tap][hidden][dim_in]`; tap 0 is the current frame, tap 2 two frames back.
    pub kernel: Vec<f64>,
    pub conv_bias: Vec<f64>,
    pub ln_gain: Vec<f64>,
    pub ln_bias: Vec<f64>,
    pub proj: Vec<f64>,
    pub proj_bias: f64,
}

/// Intermediate values of one frame, kept for the backward pass.
#[derive(Debug, Clone)]
struct FrameCache {
    normed: Vec<f64>,
    inv_std: f64,
    pre_act: Vec<f64>,
    act: Vec<f64>,
    alpha: f64,
}

impl WeightPredictorParams {
    pub fn zeros(dim_in: usize, hidden: usize) -> Self {
        Self {
            dim_in,
            hidden,
            kernel: vec![0.0; KERNEL_WIDTH * hidden * dim_in],
            conv_bias: vec![0.0; hidden],
            ln_gain: vec![0.0; hidden],
            ln_bias: vec![0.0; hidden],
            proj: vec![0.0; hidden],
            proj_bias: 0.0,
        }
    }

    pub fn check(&self) -> Result<()> {
        let (h, d) = (self.hidden, self.dim_in);
        let sizes = [
            (self.kernel.len(), KERNEL_WIDTH * h * d),
            (self.conv_bias.len(), h),
            (self.ln_gain.len(), h),
            (self.ln_bias.len(), h),
            (self.proj.len(), h),
        ];
        for (found, expected) in sizes {
            if found != expected {
                return Err(Error::DimensionMismatch { expected, found });
            }
        }
        Ok(())
    }

    /// `window[tap]` is the frame `tap` steps back; missing history is zero padding.
    fn frame_forward(&self, window: &[Option<&[f64]>; KERNEL_WIDTH]) -> FrameCache {
        let (h, d) = (self.hidden, self.dim_in);
        let mut z = self.conv_bias.clone();
        for (tap, x) in window.iter().enumerate() {
            if let Some(x) = x {
                let k = &self.kernel[tap * h * d..(tap + 1) * h * d];
                for (zh, row) in z.iter_mut().zip(k.chunks_exact(d)) {
                    *zh += row.iter().zip(*x).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }
        let mean = z.iter().sum::<f64>() / h as f64;
        let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / h as f64;
        let inv_std = 1.0 / (var + LN_EPS).sqrt();
        let normed: Vec<f64> = z.iter().map(|v| (v - mean) * inv_std).collect();
        let pre_act: Vec<f64> = normed
            .iter()
            .zip(&self.ln_gain)
            .zip(&self.ln_bias)
            .map(|((n, g), b)| n * g + b)
            .collect();
        let act: Vec<f64> = pre_act.iter().map(|&y| gelu(y)).collect();
        let s = self.proj.iter().zip(&act).map(|(w, a)| w * a).sum::<f64>() + self.proj_bias;
        FrameCache {
            normed,
            inv_std,
            pre_act,
            act,
            alpha: sigmoid(s),
        }
    }

    fn window(frames: &FeatureSequence<f64>, j: usize) -> [Option<&[f64]>; KERNEL_WIDTH] {
        std::array::from_fn(|tap| (j > tap).then(|| frames.frame(j - tap)))
    }

    /// Weight of the last frame of a causal prefix.
    pub fn predict_last(&self, prefix: FramePrefix<'_, f64>) -> Result<f64> {
        if prefix.dim() != self.dim_in {
            return Err(Error::DimensionMismatch {
                expected: self.dim_in,
                found: prefix.dim(),
            });
        }
        let j = prefix.len();
        let window: [Option<&[f64]>; KERNEL_WIDTH] =
            std::array::from_fn(|tap| (j > tap).then(|| prefix.frame(j - tap)));
        Ok(self.frame_forward(&window).alpha)
    }

    pub fn pass(&self, x: &FeatureSequence<f64>, stop_gradient: bool) -> Result<PredictorPass> {
        if x.dim() != self.dim_in {
            return Err(Error::DimensionMismatch {
                expected: self.dim_in,
                found: x.dim(),
            });
        }
        Ok(PredictorPass {
            caches: (1..=x.len()).map(|j| self.frame_forward(&Self::window(x, j))).collect(),
            stop_gradient,
        })
    }

    /// Accumulates parameter gradients into `grad`. Returns the flat gradient
    /// with respect to the input frames, all zeros under stop-gradient.
    pub fn backward(
        &self,
        x: &FeatureSequence<f64>,
        pass: &PredictorPass,
        grad_alpha: &[f64],
        grad: &mut WeightPredictorParams,
    ) -> Vec<f64> {
        let (h, d) = (self.hidden, self.dim_in);
        let mut grad_x = vec![0.0; x.len() * d];
        for (t, (c, &ga)) in pass.caches.iter().zip(grad_alpha).enumerate() {
            if ga == 0.0 {
                continue;
            }
            let gs = ga * c.alpha * (1.0 - c.alpha);
            grad.proj_bias += gs;
            for k in 0..h {
                grad.proj[k] += gs * c.act[k];
            }
            let gy: Vec<f64> = (0..h).map(|k| gs * self.proj[k] * gelu_grad(c.pre_act[k])).collect();
            for (k, g) in gy.iter().enumerate() {
                grad.ln_gain[k] += g * c.normed[k];
                grad.ln_bias[k] += g;
            }
            let gn: Vec<f64> = (0..h).map(|k| gy[k] * self.ln_gain[k]).collect();
            let mean_gn = gn.iter().sum::<f64>() / h as f64;
            let mean_gnn = gn.iter().zip(&c.normed).map(|(a, b)| a * b).sum::<f64>() / h as f64;
            let gz: Vec<f64> = (0..h)
                .map(|k| c.inv_std * (gn[k] - mean_gn - c.normed[k] * mean_gnn))
                .collect();
            for (b, g) in grad.conv_bias.iter_mut().zip(&gz) {
                *b += g;
            }
            let j = t + 1;
            for (tap, frame) in Self::window(x, j).iter().enumerate() {
                let Some(frame) = frame else { continue };
                let base = tap * h * d;
                outer_add(&mut grad.kernel[base..base + h * d], d, &gz, frame);
                if !pass.stop_gradient {
                    let back = matvec_t(&self.kernel[base..base + h * d], h, d, &gz);
                    let row = j - tap - 1;
                    for (g, b) in grad_x[row * d..(row + 1) * d].iter_mut().zip(back) {
                        *g += b;
                    }
                }
            }
        }
        grad_x
    }
}

/// Forward pass over a whole sequence, kept for [`WeightPredictorParams::backward`].
#[derive(Debug, Clone)]
pub struct PredictorPass {
    caches: Vec<FrameCache>,
    stop_gradient: bool,
}

impl PredictorPass {
    pub fn weights(&self) -> WeightSequence<f64> {
        WeightSequence(self.caches.iter().map(|c| c.alpha).collect())
    }
}

/// Per-frame weights `alpha_j` in (0, 1). With `stop_gradient` set the
/// backward pass contributes nothing to the input features.
pub fn weight_predictor_forward(
    x: &FeatureSequence<f64>,
    p: &WeightPredictorParams,
    stop_gradient: bool,
) -> Result<WeightSequence<f64>> {
    Ok(p.pass(x, stop_gradient)?.weights())
}

/// `W_o GELU(W_s c + W_t s + b)`, all matrices `dim x dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionParams {
    pub dim: usize,
    pub w_o: Vec<f64>,
    pub w_s: Vec<f64>,
    pub w_t: Vec<f64>,
    pub b: Vec<f64>,
}

/// Gradients of one fusion call.
#[derive(Debug, Clone)]
pub struct FusionGrad {
    pub params: FusionParams,
    pub c: Vec<f64>,
    pub s: Vec<f64>,
}

impl FusionParams {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            w_o: vec![0.0; dim * dim],
            w_s: vec![0.0; dim * dim],
            w_t: vec![0.0; dim * dim],
            b: vec![0.0; dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut eye = vec![0.0; dim * dim];
        for i in 0..dim {
            eye[i * dim + i] = 1.0;
        }
        Self {
            dim,
            w_o: eye.clone(),
            w_s: eye.clone(),
            w_t: eye,
            b: vec![0.0; dim],
        }
    }

    fn pre_activation(&self, c: &[f64], s: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let a = matvec(&self.w_s, d, d, c);
        let b = matvec(&self.w_t, d, d, s);
        a.iter().zip(&b).zip(&self.b).map(|((x, y), z)| x + y + z).collect()
    }

    /// Backward of [`positionwise_fusion`] for upstream gradient `g`.
    pub fn backward(&self, c: &[f64], s: &[f64], g: &[f64]) -> FusionGrad {
        let d = self.dim;
        let u = self.pre_activation(c, s);
        let v: Vec<f64> = u.iter().map(|&x| gelu(x)).collect();
        let mut gp = FusionParams::zeros(d);
        outer_add(&mut gp.w_o, d, g, &v);
        let gv = matvec_t(&self.w_o, d, d, g);
        let gu: Vec<f64> = gv.iter().zip(&u).map(|(a, &x)| a * gelu_grad(x)).collect();
        outer_add(&mut gp.w_s, d, &gu, c);
        outer_add(&mut gp.w_t, d, &gu, s);
        gp.b.copy_from_slice(&gu);
        FusionGrad {
            c: matvec_t(&self.w_s, d, d, &gu),
            s: matvec_t(&self.w_t, d, d, &gu),
            params: gp,
        }
    }
}

pub fn positionwise_fusion(c: &[f64], s: &[f64], p: &FusionParams) -> Result<Vec<f64>> {
    for v in [c.len(), s.len(), p.b.len()] {
        if v != p.dim {
            return Err(Error::DimensionMismatch {
                expected: p.dim,
                found: v,
            });
        }
    }
    let u = p.pre_activation(c, s);
    let v: Vec<f64> = u.iter().map(|&x| gelu(x)).collect();
    Ok(matvec(&p.w_o, p.dim, p.dim, &v))
}

/// Infinite-lookback mask: position `i` may attend to `k` iff `k <= i`.
/// Entry `[i][k]` is 0-based.
pub fn ila_mask(t: usize) -> Vec<Vec<bool>> {
    (0..t).map(|i| (0..t).map(|k| k <= i).collect()).collect()
}

/// Single-head scaled dot-product attention of decoder states over
/// integrated embeddings under the infinite-lookback mask.
pub fn ila_attention(queries: &[Vec<f64>], embeddings: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let t = queries.len();
    if embeddings.len() < t {
        return Err(Error::LengthMismatch {
            what: "integrated embeddings",
            expected: t,
            found: embeddings.len(),
        });
    }
    let d = queries.first().map_or(0, Vec::len);
    let scale = 1.0 / (d.max(1) as f64).sqrt();
    let mask = ila_mask(t);
    let mut out = Vec::with_capacity(t);
    for (i, q) in queries.iter().enumerate() {
        let scores: Vec<f64> = (0..t)
            .filter(|&k| mask[i][k])
            .map(|k| q.iter().zip(&embeddings[k]).map(|(a, b)| a * b).sum::<f64>() * scale)
            .collect();
        let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
        let z: f64 = w.iter().sum();
        let mut row = vec![0.0; d];
        for (k, wk) in w.iter().enumerate() {
            for (r, e) in row.iter_mut().zip(&embeddings[k]) {
                *r += wk / z * e;
            }
        }
        out.push(row);
    }
    Ok(out)
}
