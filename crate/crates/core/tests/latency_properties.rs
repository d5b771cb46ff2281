mod oracle;

use std::collections::BTreeMap;

use cif_simul::losses::{dal, dal_latency_loss, grad_dal, grad_quantity_token, quantity_loss_seq, quantity_loss_token};
use cif_simul::metrics::{average_lagging, dal_metric, evaluate_trace};
use cif_simul::trace::{ReadWriteTrace, TraceBuilder};
use cif_simul::traintoy::fd_gradcheck;
use oracle::dal_reference;
use proptest::prelude::*;

fn delays() -> impl Strategy<Value = (Vec<f64>, f64)> {
    (1usize..25, 10.0f64..200.0).prop_flat_map(|(t, u)| (prop::collection::vec(0.0f64..u, t), Just(u)))
}

/// Far enough from every max-tie that finite differences stay on one branch.
fn away_from_ties(d: &[f64], source: f64) -> bool {
    let gamma = source / d.len() as f64;
    let mut g = d[0];
    d.iter().skip(1).all(|&x| {
        let carried = g + gamma;
        g = x.max(carried);
        (x - carried).abs() > 1e-3
    })
}

proptest! {
    #[test]
    fn dal_matches_reference((d, u) in delays()) {
        let v = dal(&d, u, d.len()).unwrap();
        prop_assert!((v - dal_reference(&d, u)).abs() < 1e-9);
        prop_assert!(v >= d[0] - 1e-12);
    }

    #[test]
    fn dal_is_monotone((d, u) in delays(), i in any::<prop::sample::Index>(), bump in 0.0f64..50.0) {
        let mut e = d.clone();
        let k = i.index(d.len());
        e[k] += bump;
        prop_assert!(dal(&e, u, d.len()).unwrap() >= dal(&d, u, d.len()).unwrap() - 1e-12);
    }

    #[test]
    fn dal_is_scale_equivariant((d, u) in delays(), c in 0.1f64..10.0) {
        let scaled: Vec<f64> = d.iter().map(|x| x * c).collect();
        let a = dal(&scaled, u * c, d.len()).unwrap();
        let b = c * dal(&d, u, d.len()).unwrap();
        prop_assert!((a - b).abs() < 1e-9 * b.abs().max(1.0));
    }

    #[test]
    fn metric_and_loss_agree_after_unit_conversion(d in prop::collection::vec(1usize..100, 1..20), frame_ms in 10.0f64..80.0) {
        let u = 100usize;
        let frames: Vec<f64> = d.iter().map(|&x| x as f64).collect();
        let ms: Vec<f64> = frames.iter().map(|x| x * frame_ms).collect();
        let loss = dal_latency_loss(&frames, u, d.len()).unwrap();
        let metric = dal_metric(&ms, u as f64 * frame_ms, d.len()).unwrap();
        prop_assert!((loss * frame_ms - metric).abs() < 1e-9 * metric.max(1.0));
    }

    #[test]
    fn al_never_exceeds_dal_when_no_token_waits_for_the_end((d, u) in delays()) {
        let d: Vec<f64> = d.into_iter().map(|x| x.min(u * 0.999)).collect();
        let al = average_lagging(&d, u, d.len());
        prop_assert!(al <= dal(&d, u, d.len()).unwrap() + 1e-9);
    }

    #[test]
    fn quantity_losses_vanish_exactly_at_the_target(
        segments in prop::collection::vec(prop::collection::vec(0.05f64..1.0, 1..6), 1..8),
        beta in 0.5f64..2.0,
        bump in 0.01f64..0.5,
    ) {
        // Each segment is normalized to carry exactly beta; its last frame is a boundary.
        let mut alpha = Vec::new();
        let mut b = BTreeMap::new();
        for (i, seg) in segments.iter().enumerate() {
            let z: f64 = seg.iter().sum();
            alpha.extend(seg.iter().map(|x| x * beta / z));
            b.insert(alpha.len(), i + 1);
        }
        let t = segments.len();
        prop_assert!(quantity_loss_seq(&alpha, t, beta) < 1e-20);
        prop_assert!(quantity_loss_token(&alpha, &b, t, beta).unwrap() < 1e-20);
        alpha[0] += bump;
        prop_assert!(quantity_loss_seq(&alpha, t, beta) > 0.0);
        prop_assert!(quantity_loss_token(&alpha, &b, t, beta).unwrap() > 0.0);
    }

    #[test]
    fn metrics_survive_reserialization(reads in prop::collection::vec(1usize..6, 1..10), frame_ms in 10.0f64..60.0) {
        let u: usize = reads.iter().sum();
        let mut tb = TraceBuilder::new(frame_ms, u);
        for (i, &r) in reads.iter().enumerate() {
            tb.read(r);
            tb.write(i, Some(1.5));
        }
        let t = tb.finish().unwrap();
        let back = ReadWriteTrace::from_jsonl(&t.to_jsonl()).unwrap();
        prop_assert_eq!(evaluate_trace(&t, None).unwrap(), evaluate_trace(&back, None).unwrap());
    }
}

#[test]
fn quantity_token_gradient_matches_fd() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for point in 0..100 {
        let u = 5 + point % 20;
        let alpha: Vec<f64> = (0..u).map(|_| rng.random_range(0.01..0.99)).collect();
        let mut frames: Vec<usize> = (1..=u).filter(|_| rng.random_bool(0.4)).collect();
        if frames.is_empty() {
            frames.push(u);
        }
        let b: BTreeMap<usize, usize> = frames.iter().enumerate().map(|(i, &j)| (j, i + 1)).collect();
        let t = b.len();
        let g = grad_quantity_token(&alpha, &b, t, 1.0).unwrap();
        let r = fd_gradcheck(|a| quantity_loss_token(a, &b, t, 1.0).unwrap(), &g, &alpha, 1e-5).unwrap();
        assert!(r.max_rel_err < 1e-4, "{point}: {r:?}");
    }
}

#[test]
fn dal_gradient_matches_fd_away_from_ties() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
    let mut checked = 0;
    while checked < 100 {
        let t = rng.random_range(1..15);
        let u = rng.random_range(10.0..100.0);
        let d: Vec<f64> = (0..t).map(|_| rng.random_range(0.0..u)).collect();
        if !away_from_ties(&d, u) {
            continue;
        }
        let g = grad_dal(&d, u, t).unwrap();
        let r = fd_gradcheck(|x| dal(x, u, t).unwrap(), &g, &d, 1e-5).unwrap();
        assert!(r.max_rel_err < 1e-4, "{r:?}");
        checked += 1;
    }
}
