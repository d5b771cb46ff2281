//! Training objectives on top of the integrate-and-fire weights: the
//! sequence- and token-level quantity losses, the differentiable average
//! lagging latency loss, and their analytic gradients.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cif::{expected_delays, expected_delays_vjp, scale_weights, scale_weights_vjp};
use crate::domain::{CifConfig, LossWeights, WeightSequence};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Unweighted loss components.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub ce: f64,
    pub ctc: f64,
    pub qua: f64,
    pub lat: f64,
}

/// Components together with their weighted total.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub ce: f64,
    pub ctc: f64,
    pub qua: f64,
    pub lat: f64,
    pub total: f64,
}

/// `total = ce + lambda_ctc * ctc + lambda_qua * qua + lambda_lat * lat`.
pub fn combined_objective(parts: LossParts, w: &LossWeights) -> Result<LossBreakdown> {
    for (name, v) in [
        ("ce", parts.ce),
        ("ctc", parts.ctc),
        ("qua", parts.qua),
        ("lat", parts.lat),
    ] {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                what: match name {
                    "ce" => "cross-entropy loss",
                    "ctc" => "ctc loss",
                    "qua" => "quantity loss",
                    _ => "latency loss",
                },
                index: 0,
            });
        }
    }
    // lambda = 0 drops a term outright, even if its value is huge.
    let term = |lambda: f64, v: f64| if lambda == 0.0 { 0.0 } else { lambda * v };
    Ok(LossBreakdown {
        ce: parts.ce,
        ctc: parts.ctc,
        qua: parts.qua,
        lat: parts.lat,
        total: parts.ce + term(w.lambda_ctc, parts.ctc) + term(w.lambda_qua, parts.qua) + term(w.lambda_lat, parts.lat),
    })
}

/// `(T - sum(alpha) / beta)^2`.
pub fn quantity_loss_seq<F: Real>(alpha: &[F], target_len: usize, beta: F) -> F {
    let diff = F::of_usize(target_len) - alpha.iter().copied().sum::<F>() / beta;
    diff * diff
}

pub fn grad_quantity_seq<F: Real>(alpha: &[F], target_len: usize, beta: F) -> Vec<F> {
    let g = F::lit(2.0) * (alpha.iter().copied().sum::<F>() / beta - F::of_usize(target_len)) / beta;
    vec![g; alpha.len()]
}

fn check_boundaries<F>(alpha: &[F], boundaries: &BTreeMap<usize, usize>, target_len: usize) -> Result<()> {
    if boundaries.is_empty() && target_len > 0 {
        return Err(Error::Empty("boundary map"));
    }
    if target_len == 0 {
        return Err(Error::Empty("target sequence"));
    }
    if let Some((&j, _)) = boundaries.iter().next_back() {
        if j == 0 || j > alpha.len() {
            return Err(Error::InvalidConfig(format!(
                "boundary frame {j} outside 1..={}",
                alpha.len()
            )));
        }
    }
    if boundaries.contains_key(&0) {
        return Err(Error::InvalidConfig("boundary frame 0; frames are 1-based".into()));
    }
    Ok(())
}

/// `(1/T) * sum over boundary frames j of (t_j - cumsum_j / beta)^2`.
pub fn quantity_loss_token<F: Real>(
    alpha: &[F],
    boundaries: &BTreeMap<usize, usize>,
    target_len: usize,
    beta: F,
) -> Result<F> {
    check_boundaries(alpha, boundaries, target_len)?;
    let mut cum = F::zero();
    let mut next = 1usize;
    let mut total = F::zero();
    for (&j, &t) in boundaries {
        while next <= j {
            cum = cum + alpha[next - 1];
            next += 1;
        }
        let r = F::of_usize(t) - cum / beta;
        total = total + r * r;
    }
    Ok(total / F::of_usize(target_len))
}

/// `d/d alpha_k = -(2 / (T beta)) * sum over boundaries j >= k of (t_j - cumsum_j / beta)`.
pub fn grad_quantity_token<F: Real>(
    alpha: &[F],
    boundaries: &BTreeMap<usize, usize>,
    target_len: usize,
    beta: F,
) -> Result<Vec<F>> {
    check_boundaries(alpha, boundaries, target_len)?;
    let mut cum = vec![F::zero(); alpha.len() + 1];
    for (k, &a) in alpha.iter().enumerate() {
        cum[k + 1] = cum[k] + a;
    }
    let scale = -F::lit(2.0) / (F::of_usize(target_len) * beta);
    let mut residual_at = vec![F::zero(); alpha.len() + 1];
    for (&j, &t) in boundaries {
        residual_at[j] = F::of_usize(t) - cum[j] / beta;
    }
    let mut grad = vec![F::zero(); alpha.len()];
    let mut acc = F::zero();
    for k in (1..=alpha.len()).rev() {
        acc = acc + residual_at[k];
        grad[k - 1] = scale * acc;
    }
    Ok(grad)
}

/// Running lagged delays `g'_1 = d_1`, `g'_i = max(d_i, g'_{i-1} + gamma)`.
fn lagged<F: Real>(d: &[F], gamma: F) -> (Vec<F>, Vec<bool>) {
    let mut g = Vec::with_capacity(d.len());
    let mut own = Vec::with_capacity(d.len());
    for (i, &di) in d.iter().enumerate() {
        if i == 0 {
            g.push(di);
            own.push(true);
        } else {
            let carried = g[i - 1] + gamma;
            if di >= carried {
                g.push(di);
                own.push(true);
            } else {
                g.push(carried);
                own.push(false);
            }
        }
    }
    (g, own)
}

/// Differentiable average lagging over per-token delays `d`, with
/// `gamma = source_len / target_len`: `(1/T) * sum_i (g'_i - (i-1) gamma)`.
/// Units follow the inputs (frames for training, ms for evaluation).
pub fn dal<F: Real>(d: &[F], source_len: F, target_len: usize) -> Result<F> {
    if d.is_empty() || target_len == 0 {
        return Err(Error::Empty("delay sequence"));
    }
    if d.len() != target_len {
        return Err(Error::LengthMismatch {
            what: "delays",
            expected: target_len,
            found: d.len(),
        });
    }
    let gamma = source_len / F::of_usize(target_len);
    let (g, _) = lagged(d, gamma);
    let sum: F = g.iter().enumerate().map(|(i, &gi)| gi - F::of_usize(i) * gamma).sum();
    Ok(sum / F::of_usize(target_len))
}

/// DAL latency loss over expected delays in frames (`gamma = U / T`).
pub fn dal_latency_loss<F: Real>(d: &[F], source_frames: usize, target_len: usize) -> Result<F> {
    dal(d, F::of_usize(source_frames), target_len)
}

/// Subgradient of [`dal`] with respect to the delays. Gradient reaches `d_i`
/// only where `d_i` attains the max; ties go to `d_i`.
pub fn grad_dal<F: Real>(d: &[F], source_len: F, target_len: usize) -> Result<Vec<F>> {
    dal(d, source_len, target_len)?;
    let gamma = source_len / F::of_usize(target_len);
    let (_, own) = lagged(d, gamma);
    let inv_t = F::one() / F::of_usize(target_len);
    let mut grad = vec![F::zero(); d.len()];
    let mut carry = F::zero();
    for i in (0..d.len()).rev() {
        let gg = inv_t + carry;
        if own[i] {
            grad[i] = gg;
            carry = F::zero();
        } else {
            carry = gg;
        }
    }
    Ok(grad)
}

/// Which weights feed the expected delays during latency training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatencyWeights {
    /// Weights rescaled to sum to `beta * T` (matches training-time firing).
    #[default]
    Scaled,
    Raw,
}

/// Latency loss of raw weights and its gradient with respect to them.
pub fn latency_loss_and_grad<F: Real>(
    alpha: &[F],
    target_len: usize,
    cfg: &CifConfig<F>,
    source: LatencyWeights,
) -> Result<(F, Vec<F>)> {
    let w = WeightSequence(alpha.to_vec());
    let used = match source {
        LatencyWeights::Scaled => scale_weights(&w, target_len, cfg)?,
        LatencyWeights::Raw => w,
    };
    let d = expected_delays(&used, cfg, target_len)?;
    let u = F::of_usize(alpha.len());
    let loss = dal(&d, u, target_len)?;
    let gd = grad_dal(&d, u, target_len)?;
    let g_used = expected_delays_vjp(used.as_slice(), cfg, &gd)?;
    let grad = match source {
        LatencyWeights::Scaled => scale_weights_vjp(alpha, target_len, cfg.beta, &g_used),
        LatencyWeights::Raw => g_used,
    };
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bmap(pairs: &[(usize, usize)]) -> BTreeMap<usize, usize> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn quantity_seq_examples() {
        assert!((quantity_loss_seq(&[1.0f64, 1.2], 2, 1.0) - 0.04).abs() < 1e-12);
        assert_eq!(quantity_loss_seq(&[0.5f64, 1.5], 2, 1.0), 0.0);
        assert_eq!(quantity_loss_seq(&[0.0f64, 0.0], 3, 1.0), 9.0);
        let g = grad_quantity_seq(&[1.0f64, 1.2], 2, 1.0);
        assert!(g.iter().all(|x| (x - 0.4).abs() < 1e-12));
        assert_eq!(grad_quantity_seq(&[0.5, 1.5], 2, 1.0), vec![0.0, 0.0]);
    }

    #[test]
    fn quantity_token_examples() {
        let a = [0.4f64, 0.5, 0.3, 0.4, 0.6, 0.2];
        let l = quantity_loss_token(&a, &bmap(&[(3, 1), (5, 2)]), 2, 1.0).unwrap();
        assert!((l - 0.04).abs() < 1e-12);
        let exact = [0.25f64, 0.75, 0.5, 0.5];
        assert_eq!(
            quantity_loss_token(&exact, &bmap(&[(2, 1), (4, 2)]), 2, 1.0).unwrap(),
            0.0
        );
        let l = quantity_loss_token(&[0.0f64, 0.0], &bmap(&[(2, 1)]), 1, 1.0).unwrap();
        assert_eq!(l, 1.0);
        assert!(quantity_loss_token(&a, &BTreeMap::new(), 2, 1.0).is_err());
        assert!(quantity_loss_token(&a, &bmap(&[(7, 1)]), 1, 1.0).is_err());
    }

    #[test]
    fn dal_examples() {
        assert!((dal_latency_loss(&[1.4f64, 2.7], 3, 2).unwrap() - 1.4).abs() < 1e-12);
        assert!((dal_latency_loss(&[1.5f64, 3.0], 3, 2).unwrap() - 1.5).abs() < 1e-12);
        assert!((dal_latency_loss(&[5.0f64, 5.0, 5.0], 5, 3).unwrap() - 5.0).abs() < 1e-12);
        assert!(dal_latency_loss::<f64>(&[], 3, 0).is_err());
    }

    #[test]
    fn dal_gradient_routes_through_max() {
        // g' = [1.4, 2.9]: second token is carried, so d_2 gets nothing.
        let g = grad_dal(&[1.4f64, 2.7], 3.0, 2).unwrap();
        assert_eq!(g, vec![1.0, 0.0]);
        let g = grad_dal(&[1.0f64, 3.0], 3.0, 2).unwrap();
        assert_eq!(g, vec![0.5, 0.5]);
    }

    #[test]
    fn combined_examples() {
        let parts = LossParts {
            ce: 1.0,
            ctc: 1.0,
            qua: 1.0,
            lat: 1.0,
        };
        let b = combined_objective(parts, &LossWeights::with_latency(0.5).unwrap()).unwrap();
        assert!((b.total - 2.8).abs() < 1e-12);
        let z = combined_objective(LossParts::default(), &LossWeights::default()).unwrap();
        assert_eq!(z.total, 0.0);
        let no_lat = combined_objective(
            LossParts { lat: 1e9, ..parts },
            &LossWeights::with_latency(0.0).unwrap(),
        )
        .unwrap();
        assert!((no_lat.total - 2.3).abs() < 1e-12);
        assert!(combined_objective(LossParts { ce: f64::NAN, ..parts }, &LossWeights::default()).is_err());
    }

    #[test]
    fn latency_loss_scaled_matches_manual() {
        let cfg = CifConfig::default();
        let a = [0.3f64, 0.5, 0.4, 0.6];
        let (loss, grad) = latency_loss_and_grad(&a, 2, &cfg, LatencyWeights::Scaled).unwrap();
        let scaled = scale_weights(&WeightSequence(a.to_vec()), 2, &cfg).unwrap();
        let d = expected_delays(&scaled, &cfg, 2).unwrap();
        assert!((loss - dal_latency_loss(&d, 4, 2).unwrap()).abs() < 1e-12);
        assert_eq!(grad.len(), 4);
        // Scaling removes the overall magnitude, so the gradient is orthogonal to alpha.
        let dot: f64 = grad.iter().zip(&a).map(|(g, x)| g * x).sum();
        assert!(dot.abs() < 1e-12);
    }
}
