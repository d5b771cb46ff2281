//! Finite-difference checks of every analytic gradient at random points.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::nn::{positionwise_fusion, FusionParams, WeightPredictorParams};
use super::{fd_gradcheck, BoundarySource, ToyModel, TrainOptions};
use crate::cif::{embeddings_vjp, expected_delays, expected_delays_vjp, fire_weights, integrate_and_fire};
use crate::ctc::{ctc_loss, ctc_loss_grad, EmissionGrid};
use crate::domain::{CifConfig, FeatureSequence, LossWeights, TargetSequence, WeightSequence};
use crate::error::{Error, Result};
use crate::losses::{dal, grad_dal, grad_quantity_seq, grad_quantity_token, quantity_loss_seq, quantity_loss_token};
use crate::simul::{synth_task, SynthConfig};

/// Checks of smooth operations, run by the full suite.
pub const GRADIENT_CHECKS: [&str; 8] = [
    "quantity_seq",
    "quantity_token",
    "dal",
    "fusion",
    "expected_delays",
    "embeddings",
    "ctc",
    "predictor",
];

/// The whole toy objective. It is only piecewise smooth (firing kinks, forced
/// alignments that switch near ties) and its loss is large enough for
/// finite-difference roundoff to show, so it is run on request only.
pub const EXTRA_CHECKS: [&str; 1] = ["toy_objective"];

/// Worst relative error of one check over all its points.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub points: usize,
    pub max_rel_err: f64,
}

/// Minimum distance kept between any prefix sum and a multiple of beta.
const TIE_GAP: f64 = 1e-3;

fn weights(rng: &mut ChaCha8Rng, u: usize) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..u).map(|_| rng.random_range(0.05..0.95)).collect();
        let mut s = 0.0;
        if w.iter().all(|a| {
            s += a;
            (s - s.round()).abs() >= TIE_GAP
        }) {
            return w;
        }
    }
}

fn vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Runs check `name` at `points` random points drawn from `seed`.
pub fn run_gradient_check(name: &str, seed: u64, points: usize, eps: f64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = CifConfig::default();
    let mut worst = 0.0f64;
    let mut done = 0;
    let toy_data = if name == "toy_objective" {
        synth_task(&SynthConfig {
            n_utts: points.max(1),
            seed,
            tokens: (2, 4),
            ..SynthConfig::default()
        })?
        .utterances
    } else {
        Vec::new()
    };
    while done < points {
        let err = match name {
            "quantity_seq" => {
                let u = rng.random_range(2..30);
                let a = weights(&mut rng, u);
                let t = rng.random_range(1..10);
                fd_gradcheck(
                    |x| quantity_loss_seq(x, t, 1.0),
                    &grad_quantity_seq(&a, t, 1.0),
                    &a,
                    eps,
                )?
            }
            "quantity_token" => {
                let u = rng.random_range(2..30);
                let a = weights(&mut rng, u);
                let mut frames: Vec<usize> = (1..=u).filter(|_| rng.random_bool(0.3)).collect();
                if frames.is_empty() {
                    frames.push(u);
                }
                let b: BTreeMap<usize, usize> = frames.iter().enumerate().map(|(i, &j)| (j, i + 1)).collect();
                let t = b.len();
                let g = grad_quantity_token(&a, &b, t, 1.0)?;
                fd_gradcheck(|x| quantity_loss_token(x, &b, t, 1.0).unwrap_or(f64::NAN), &g, &a, eps)?
            }
            "dal" => {
                let t = rng.random_range(1..15);
                let u: f64 = rng.random_range(10.0..100.0);
                let d: Vec<f64> = (0..t).map(|_| rng.random_range(0.0..u)).collect();
                let gamma = u / t as f64;
                let mut g = d[0];
                let tie = d.iter().skip(1).any(|&x| {
                    let carried = g + gamma;
                    g = x.max(carried);
                    (x - carried).abs() <= TIE_GAP
                });
                if tie {
                    continue;
                }
                let grad = grad_dal(&d, u, t)?;
                fd_gradcheck(|x| dal(x, u, t).unwrap_or(f64::NAN), &grad, &d, eps)?
            }
            "fusion" => {
                let d = rng.random_range(1..6);
                let p = FusionParams {
                    dim: d,
                    w_o: vector(&mut rng, d * d),
                    w_s: vector(&mut rng, d * d),
                    w_t: vector(&mut rng, d * d),
                    b: vector(&mut rng, d),
                };
                let (c, s, up) = (vector(&mut rng, d), vector(&mut rng, d), vector(&mut rng, d));
                let g = p.backward(&c, &s, &up);
                // All inputs and parameters in one flat vector.
                let point = [
                    c.clone(),
                    s.clone(),
                    p.w_o.clone(),
                    p.w_s.clone(),
                    p.w_t.clone(),
                    p.b.clone(),
                ]
                .concat();
                let analytic = [g.c, g.s, g.params.w_o, g.params.w_s, g.params.w_t, g.params.b].concat();
                let f = |x: &[f64]| {
                    let dd = d * d;
                    let q = FusionParams {
                        dim: d,
                        w_o: x[2 * d..2 * d + dd].to_vec(),
                        w_s: x[2 * d + dd..2 * d + 2 * dd].to_vec(),
                        w_t: x[2 * d + 2 * dd..2 * d + 3 * dd].to_vec(),
                        b: x[2 * d + 3 * dd..].to_vec(),
                    };
                    positionwise_fusion(&x[..d], &x[d..2 * d], &q).map_or(f64::NAN, |z| dot(&z, &up))
                };
                fd_gradcheck(f, &analytic, &point, eps)?
            }
            "expected_delays" => {
                let u = rng.random_range(3..40);
                let a = weights(&mut rng, u);
                let n = fire_weights(&a, &cfg)?.len();
                if n == 0 {
                    continue;
                }
                let up = vector(&mut rng, n);
                let g = expected_delays_vjp(&a, &cfg, &up)?;
                let f = |x: &[f64]| {
                    expected_delays(&WeightSequence(x.to_vec()), &cfg, n).map_or(f64::NAN, |d| dot(&d, &up))
                };
                fd_gradcheck(f, &g, &a, eps)?
            }
            "embeddings" => {
                let u = rng.random_range(3..25);
                let d = rng.random_range(1..4);
                let a = weights(&mut rng, u);
                let hv = vector(&mut rng, u * d);
                let n = fire_weights(&a, &cfg)?.len();
                if n == 0 {
                    continue;
                }
                let up: Vec<Vec<f64>> = (0..n).map(|_| vector(&mut rng, d)).collect();
                let h = FeatureSequence::new(hv.clone(), d, 40.0)?;
                let (ga, gh) = embeddings_vjp(&h, &a, &cfg, &up)?;
                let f = |x: &[f64]| -> f64 {
                    let Ok(h) = FeatureSequence::new(x[u..].to_vec(), d, 40.0) else {
                        return f64::NAN;
                    };
                    integrate_and_fire(&h, &WeightSequence(x[..u].to_vec()), &cfg).map_or(f64::NAN, |tr| {
                        tr.firings.iter().zip(&up).map(|(fi, g)| dot(&fi.embedding, g)).sum()
                    })
                };
                fd_gradcheck(f, &[ga, gh].concat(), &[a, hv].concat(), eps)?
            }
            "ctc" => {
                let v = rng.random_range(2..6);
                let t = rng.random_range(1..5);
                let y: Vec<usize> = (0..t).map(|_| rng.random_range(0..v - 1)).collect();
                let y = TargetSequence::new(y, v)?;
                let u = y.len() + y.repeats() + rng.random_range(0..6);
                let logits = vector(&mut rng, u * v);
                let e = EmissionGrid::from_logits(&logits, v)?;
                let (_, g) = ctc_loss_grad(&e, &y)?;
                let f = |x: &[f64]| {
                    EmissionGrid::unnormalized(x.to_vec(), v)
                        .and_then(|e| ctc_loss(&e, &y))
                        .unwrap_or(f64::NAN)
                };
                fd_gradcheck(f, &g, e.as_slice(), eps)?
            }
            "predictor" => {
                let d = rng.random_range(1..5);
                let hidden = rng.random_range(2..6);
                let u = rng.random_range(1..12);
                let mut p = WeightPredictorParams::zeros(d, hidden);
                let flat = |p: &WeightPredictorParams| {
                    [
                        &p.kernel[..],
                        &p.conv_bias,
                        &p.ln_gain,
                        &p.ln_bias,
                        &p.proj,
                        &[p.proj_bias],
                    ]
                    .concat()
                };
                let set = |p: &mut WeightPredictorParams, x: &[f64]| {
                    let mut off = 0;
                    for seg in [
                        &mut p.kernel,
                        &mut p.conv_bias,
                        &mut p.ln_gain,
                        &mut p.ln_bias,
                        &mut p.proj,
                    ] {
                        let n = seg.len();
                        seg.copy_from_slice(&x[off..off + n]);
                        off += n;
                    }
                    p.proj_bias = x[off];
                };
                let point = vector(&mut rng, flat(&p).len());
                set(&mut p, &point);
                let x = FeatureSequence::new(vector(&mut rng, u * d), d, 40.0)?;
                let up = vector(&mut rng, u);
                let pass = p.pass(&x, false)?;
                let mut grad = WeightPredictorParams::zeros(d, hidden);
                let gx = p.backward(&x, &pass, &up, &mut grad);
                let mut probe = p.clone();
                let r = fd_gradcheck(
                    |z| {
                        set(&mut probe, z);
                        probe.pass(&x, false).map_or(f64::NAN, |ps| dot(&ps.weights().0, &up))
                    },
                    &flat(&grad),
                    &point,
                    eps,
                )?;
                let rx = fd_gradcheck(
                    |z| {
                        FeatureSequence::new(z.to_vec(), d, 40.0)
                            .and_then(|xx| p.pass(&xx, false))
                            .map_or(f64::NAN, |ps| dot(&ps.weights().0, &up))
                    },
                    &gx,
                    x.as_slice(),
                    eps,
                )?;
                if rx.max_rel_err > r.max_rel_err {
                    rx
                } else {
                    r
                }
            }
            "toy_objective" => {
                let utt = &toy_data[done % toy_data.len()];
                let mut m = ToyModel::init(utt.features.dim(), 3, utt.target.vocab_size(), 6, rng.random());
                let point: Vec<f64> = m.flatten().iter().map(|v| v + rng.random_range(-0.3..0.3)).collect();
                m.unflatten(&point)?;
                let opts = TrainOptions {
                    weights: LossWeights::new(0.3, 1.0, rng.random_range(0.0..2.0))?,
                    with_ce: true,
                    ctc_head: true,
                    boundaries: if rng.random_bool(0.5) {
                        BoundarySource::Ctc
                    } else {
                        BoundarySource::Oracle
                    },
                    ..TrainOptions::default()
                };
                let g = m.loss_and_grad(utt, &opts)?;
                let mut probe = m.clone();
                fd_gradcheck(
                    |z| {
                        if probe.unflatten(z).is_err() {
                            return f64::NAN;
                        }
                        probe.loss_and_grad(utt, &opts).map_or(f64::NAN, |g| g.loss.total)
                    },
                    &g.params.flatten(),
                    &point,
                    eps,
                )?
            }
            other => return Err(Error::InvalidConfig(format!("unknown gradient check {other:?}"))),
        };
        worst = worst.max(err.max_rel_err);
        done += 1;
    }
    Ok(CheckReport {
        name: name.to_string(),
        points,
        max_rel_err: worst,
    })
}
