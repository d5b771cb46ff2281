//! Reference implementations used as test oracles. They share no code with
//! the library algorithms they check.
#![allow(dead_code)]

use rand::Rng;

/// One firing of the reference integrator.
#[derive(Debug, Clone)]
pub struct RefFiring {
    pub frame: usize,
    pub embedding: Vec<f64>,
    pub weight: f64,
    pub tail: bool,
}

/// Integrate-and-fire from prefix sums: the `i`-th firing collects
/// `clamp(S_k, (i-1)b, ib) - clamp(S_{k-1}, (i-1)b, ib)` of every frame `k`
/// and fires at the first `k` with `S_k >= i*b`. The residual band fires at
/// the end when it holds at least `tail`.
pub fn cif_reference(h: &[Vec<f64>], alpha: &[f64], beta: f64, tail: f64) -> Vec<RefFiring> {
    let d = h.first().map_or(0, Vec::len);
    let mut prefix = vec![0.0];
    for a in alpha {
        prefix.push(prefix.last().unwrap() + a);
    }
    let total = *prefix.last().unwrap();
    let mut out = Vec::new();
    let mut i = 1usize;
    loop {
        let lo = (i - 1) as f64 * beta;
        let hi = i as f64 * beta;
        let fire = (1..prefix.len()).find(|&k| prefix[k] >= hi);
        let last = fire.unwrap_or(alpha.len());
        let mut e = vec![0.0; d];
        let mut weight = 0.0;
        for k in 1..=last {
            let w = prefix[k].clamp(lo, hi) - prefix[k - 1].clamp(lo, hi);
            weight += w;
            for (x, y) in e.iter_mut().zip(&h[k - 1]) {
                *x += w * y;
            }
        }
        match fire {
            Some(k) => out.push(RefFiring {
                frame: k,
                embedding: e,
                weight,
                tail: false,
            }),
            None => {
                if !alpha.is_empty() && total - lo >= tail {
                    out.push(RefFiring {
                        frame: alpha.len(),
                        embedding: e,
                        weight,
                        tail: true,
                    });
                }
                return out;
            }
        }
        i += 1;
    }
}

/// CTC negative log-likelihood by enumerating every per-frame labelling and
/// collapsing it. Also returns the best labelling and its log-probability.
pub fn ctc_enumerate(probs: &[Vec<f64>], target: &[usize], blank: usize) -> (f64, f64, Vec<usize>) {
    let u = probs.len();
    let v = probs[0].len();
    let mut total = 0.0;
    let mut best = (f64::NEG_INFINITY, Vec::new());
    let mut labels = vec![0usize; u];
    for code in 0..v.pow(u as u32) {
        let mut c = code;
        for l in labels.iter_mut().rev() {
            *l = c % v;
            c /= v;
        }
        let mut collapsed = Vec::new();
        let mut prev = None;
        for &l in &labels {
            if Some(l) != prev && l != blank {
                collapsed.push(l);
            }
            prev = Some(l);
        }
        if collapsed != target {
            continue;
        }
        let p: f64 = labels.iter().enumerate().map(|(t, &l)| probs[t][l]).product();
        total += p;
        let lp: f64 = labels.iter().enumerate().map(|(t, &l)| probs[t][l].ln()).sum();
        if lp > best.0 {
            best = (lp, labels.clone());
        }
    }
    (-total.ln(), best.0, best.1)
}

/// DAL straight from its definition.
pub fn dal_reference(d: &[f64], source: f64) -> f64 {
    let t = d.len() as f64;
    let gamma = source / t;
    let mut g = Vec::new();
    for (i, &x) in d.iter().enumerate() {
        let v = if i == 0 { x } else { x.max(g[i - 1] + gamma) };
        g.push(v);
    }
    g.iter().enumerate().map(|(i, gi)| gi - i as f64 * gamma).sum::<f64>() / t
}

/// Random probability rows bounded away from zero.
pub fn random_probs<R: Rng>(rng: &mut R, u: usize, v: usize) -> Vec<Vec<f64>> {
    (0..u)
        .map(|_| {
            let raw: Vec<f64> = (0..v).map(|_| rng.random_range(0.05..1.0)).collect();
            let z: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / z).collect()
        })
        .collect()
}

pub fn random_rows<R: Rng>(rng: &mut R, u: usize, d: usize) -> Vec<Vec<f64>> {
    (0..u)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

/// Weights in (0, 1) whose prefix sums stay at least `gap` away from every
/// multiple of `beta`.
pub fn weights_away_from_ties<R: Rng>(rng: &mut R, u: usize, beta: f64, gap: f64) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..u).map(|_| rng.random_range(0.05..0.95)).collect();
        let mut s = 0.0;
        let ok = w.iter().all(|a| {
            s += a;
            let r = s / beta - (s / beta).round();
            r.abs() * beta >= gap
        });
        if ok {
            return w;
        }
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
