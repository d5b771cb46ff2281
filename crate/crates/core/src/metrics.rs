//! Streaming latency metrics over read/write traces: average proportion,
//! average lagging, differentiable average lagging, and the
//! computation-aware DAL with its per-token overhead.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::dal;
use crate::scalar::Real;
use crate::trace::ReadWriteTrace;

/// Latency summary of one utterance (or the mean over a corpus).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub ap: f64,
    pub al_ms: f64,
    pub dal_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dal_ca_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_ms: Option<f64>,
    pub target_len: f64,
    pub source_ms: f64,
}

/// Source time consumed before each WRITE.
pub fn delays_from_trace(t: &ReadWriteTrace) -> Vec<f64> {
    t.writes()
        .map(|(_, elapsed, _)| elapsed as f64 * t.frame_ms())
        .collect()
}

/// `sum(d) / (T * source)`.
pub fn average_proportion<F: Real>(d: &[F], source_ms: F, target_len: usize) -> F {
    d.iter().copied().sum::<F>() / (F::of_usize(target_len) * source_ms)
}

/// Average lagging with rate `r = source / T_ref`, averaged up to the first
/// token that waited for the whole source (all tokens when none did).
pub fn average_lagging<F: Real>(d: &[F], source_ms: F, target_ref: usize) -> F {
    if d.is_empty() {
        return F::zero();
    }
    let r = source_ms / F::of_usize(target_ref);
    let tau = d.iter().position(|&x| x >= source_ms).map_or(d.len(), |i| i + 1);
    d[..tau]
        .iter()
        .enumerate()
        .map(|(i, &x)| x - F::of_usize(i) * r)
        .sum::<F>()
        / F::of_usize(tau)
}

/// Differentiable average lagging in the units of `d`.
pub fn dal_metric<F: Real>(d: &[F], source_ms: F, target_len: usize) -> Result<F> {
    dal(d, source_ms, target_len)
}

/// Delays that also count model compute: each WRITE's source time plus all
/// compute spent up to and including it.
pub fn computation_aware_delays(t: &ReadWriteTrace) -> Result<Vec<f64>> {
    let mut spent = 0.0;
    t.writes()
        .map(|(_, elapsed, compute)| {
            spent += compute.ok_or(Error::MissingComputeStamps)?;
            Ok(elapsed as f64 * t.frame_ms() + spent)
        })
        .collect()
}

/// `(DAL-CA, DAL-CA - DAL)` in ms.
pub fn dal_computation_aware(t: &ReadWriteTrace) -> Result<(f64, f64)> {
    let n = t.target_len();
    if n == 0 {
        return Err(Error::Empty("write events"));
    }
    let ca = dal(&computation_aware_delays(t)?, t.source_ms(), n)?;
    let plain = dal(&delays_from_trace(t), t.source_ms(), n)?;
    Ok((ca, ca - plain))
}

/// All metrics of one trace. `target_ref` feeds AL's rate when given;
/// otherwise the hypothesis length is used. Computation-aware fields are
/// `None` when any WRITE lacks a compute stamp.
pub fn evaluate_trace(t: &ReadWriteTrace, target_ref: Option<usize>) -> Result<LatencyReport> {
    let n = t.target_len();
    if n == 0 {
        return Err(Error::Empty("write events"));
    }
    let d = delays_from_trace(t);
    let source = t.source_ms();
    let dal_ms = dal(&d, source, n)?;
    let (dal_ca_ms, delta_ms) = match dal_computation_aware(t) {
        Ok((ca, delta)) => (Some(ca), Some(delta)),
        Err(Error::MissingComputeStamps) => (None, None),
        Err(e) => return Err(e),
    };
    Ok(LatencyReport {
        ap: average_proportion(&d, source, n),
        al_ms: average_lagging(&d, source, target_ref.unwrap_or(n)),
        dal_ms,
        dal_ca_ms,
        delta_ms,
        target_len: n as f64,
        source_ms: source,
    })
}

/// Unweighted mean of per-utterance reports. CA fields survive only when
/// every report has them.
pub fn corpus_mean(reports: &[LatencyReport]) -> Result<LatencyReport> {
    if reports.is_empty() {
        return Err(Error::Empty("report list"));
    }
    let n = reports.len() as f64;
    let mean = |f: &dyn Fn(&LatencyReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let all_ca = reports.iter().all(|r| r.dal_ca_ms.is_some());
    Ok(LatencyReport {
        ap: mean(&|r| r.ap),
        al_ms: mean(&|r| r.al_ms),
        dal_ms: mean(&|r| r.dal_ms),
        dal_ca_ms: all_ca.then(|| mean(&|r| r.dal_ca_ms.unwrap_or(0.0))),
        delta_ms: all_ca.then(|| mean(&|r| r.delta_ms.unwrap_or(0.0))),
        target_len: mean(&|r| r.target_len),
        source_ms: mean(&|r| r.source_ms),
    })
}

/// Evaluates `(utterance id, trace, reference length)` triples; the mean is
/// taken in utterance-id order.
pub fn evaluate_corpus(
    items: &[(String, ReadWriteTrace, Option<usize>)],
) -> Result<(Vec<(String, LatencyReport)>, LatencyReport)> {
    let mut rows = items
        .iter()
        .map(|(id, t, r)| Ok((id.clone(), evaluate_trace(t, *r)?)))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    let reports: Vec<_> = rows.iter().map(|r| r.1.clone()).collect();
    let mean = corpus_mean(&reports)?;
    Ok((rows, mean))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::TraceBuilder;

    fn shared() -> [f64; 2] {
        [56.0, 108.0]
    }

    #[test]
    fn delays_examples() {
        let mut b = TraceBuilder::new(40.0, 12);
        b.read(4).read(4).write(0, None).write(1, None).read(4).write(2, None);
        assert_eq!(delays_from_trace(&b.finish().unwrap()), vec![320.0, 320.0, 480.0]);

        let mut b = TraceBuilder::new(40.0, 12);
        b.write(0, None).read(12).write(1, None);
        assert_eq!(delays_from_trace(&b.finish().unwrap())[0], 0.0);

        let mut b = TraceBuilder::new(40.0, 12);
        b.read(12).write(0, None).write(1, None);
        assert_eq!(delays_from_trace(&b.finish().unwrap()), vec![480.0, 480.0]);
    }

    #[test]
    fn ap_examples() {
        assert!((average_proportion(&shared(), 120.0, 2) - 164.0 / 240.0).abs() < 1e-12);
        assert_eq!(average_proportion(&[120.0, 120.0], 120.0, 2), 1.0);
        assert_eq!(average_proportion(&[0.0, 0.0], 120.0, 2), 0.0);
    }

    #[test]
    fn al_examples() {
        assert!((average_lagging(&shared(), 120.0, 2) - 52.0).abs() < 1e-12);
        assert_eq!(average_lagging(&[120.0, 120.0], 120.0, 2), 120.0);
        assert!((average_lagging(&[60.0f64, 120.0], 120.0, 2) - 60.0).abs() < 1e-12);
        assert!((average_lagging(&[40.0f64, 80.0, 120.0], 120.0, 3) - 40.0).abs() < 1e-12);
    }

    #[test]
    fn dal_examples() {
        assert!((dal_metric(&shared(), 120.0, 2).unwrap() - 56.0).abs() < 1e-12);
        assert!((dal_metric(&[60.0f64, 120.0], 120.0, 2).unwrap() - 60.0).abs() < 1e-12);
        let base = dal_metric(&shared(), 120.0, 2).unwrap();
        assert!(dal_metric(&[56.0, 118.0], 120.0, 2).unwrap() >= base);
    }

    #[test]
    fn computation_aware_examples() {
        let mut b = TraceBuilder::new(40.0, 3);
        b.read(1)
            .write(0, Some(0.0))
            .read(1)
            .write(1, Some(0.0))
            .read(1)
            .write(2, Some(0.0));
        let (ca, delta) = dal_computation_aware(&b.finish().unwrap()).unwrap();
        assert_eq!(delta, 0.0);
        assert!((ca - 40.0).abs() < 1e-12);

        // Three tokens, 10 ms compute each: CA delays [50, 100, 150] against
        // plain [40, 80, 120], gamma = 40.
        // CA: g' = [50, 100, 150] -> (50 + 60 + 70) / 3 = 60. Plain DAL = 40.
        let mut b = TraceBuilder::new(40.0, 3);
        b.read(1)
            .write(0, Some(10.0))
            .read(1)
            .write(1, Some(10.0))
            .read(1)
            .write(2, Some(10.0));
        let (ca, delta) = dal_computation_aware(&b.finish().unwrap()).unwrap();
        assert!((ca - 60.0).abs() < 1e-12);
        assert!((delta - 20.0).abs() < 1e-12);

        let mut b = TraceBuilder::new(40.0, 3);
        b.read(3).write(0, None);
        assert!(matches!(
            dal_computation_aware(&b.finish().unwrap()),
            Err(Error::MissingComputeStamps)
        ));
    }

    #[test]
    fn evaluate_examples() {
        // Shared fixture: 3 frames of 40 ms, writes after 1.4 and 2.7 frames
        // cannot be expressed in whole frames, so use 1 ms frames instead.
        let mut b = TraceBuilder::new(1.0, 120);
        b.read(56).write(0, Some(2.0)).read(52).write(1, Some(2.0)).read(12);
        let r = evaluate_trace(&b.finish().unwrap(), None).unwrap();
        assert!((r.ap - 164.0 / 240.0).abs() < 1e-12);
        assert!((r.al_ms - 52.0).abs() < 1e-12);
        assert!((r.dal_ms - 56.0).abs() < 1e-12);
        assert!(r.dal_ca_ms.unwrap() >= r.dal_ms);

        let b = TraceBuilder::new(40.0, 3);
        assert!(evaluate_trace(&b.finish().unwrap(), None).is_err());

        let mk = |frames: usize| {
            let mut b = TraceBuilder::new(40.0, 4);
            b.read(frames).write(0, None).read(4 - frames).write(1, None);
            ("u".to_string() + &frames.to_string(), b.finish().unwrap(), None)
        };
        let items = vec![mk(3), mk(1)];
        let (rows, mean) = evaluate_corpus(&items).unwrap();
        assert_eq!(rows[0].0, "u1");
        assert!((mean.dal_ms - (rows[0].1.dal_ms + rows[1].1.dal_ms) / 2.0).abs() < 1e-12);
        assert!(mean.dal_ca_ms.is_none());
    }
}
