//! Continuous integrate-and-fire (CIF) read/write policy engine for
//! simultaneous translation.
//!
//! * [`cif`]: integrate-and-fire, weight scaling, expected delays and their gradients.
//! * [`ctc`]: CTC loss, Viterbi forced alignment, boundary extraction, brute-force oracle.
//! * [`losses`]: quantity losses, the differentiable-average-lagging latency loss, the combined objective.
//! * [`metrics`]: AP / AL / DAL / computation-aware DAL over read/write traces.
//! * [`simul`]: block streaming, the CIF and wait-k policy runners, long-utterance
//!   construction, synthetic corpora.
//! * [`traintoy`]: a small differentiable weight predictor and fusion stack trained
//!   on synthetic data, plus a finite-difference gradient checker.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below fix
//! the scalar for the common cases. Training code is `f64` only.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cif;
pub mod ctc;
pub mod domain;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod scalar;
pub mod simul;
pub mod trace;
pub mod traintoy;

pub use cif::{
    cif_step, expected_delays, inference_delays, integrate_and_fire, scale_weights, tail_handle, CifState, CifStream,
    Firing, IntegrationTrace,
};
pub use ctc::{brute_force_ctc, ctc_forced_alignment, ctc_loss, extract_boundaries, EmissionGrid};
pub use domain::{
    frames_to_ms, validate_weights, AlignmentPath, CifConfig, FeatureSequence, Label, LossWeights, TargetSequence,
    WeightSequence, DEFAULT_FRAME_MS,
};
pub use error::{Error, Result};
pub use losses::LossBreakdown;
pub use metrics::LatencyReport;

pub use scalar::Real;
pub use trace::{Event, ReadWriteTrace, TraceBuilder};

pub type FeatureSequenceF64 = FeatureSequence<f64>;
pub type FeatureSequenceF32 = FeatureSequence<f32>;
pub type WeightSequenceF64 = WeightSequence<f64>;
pub type WeightSequenceF32 = WeightSequence<f32>;
pub type CifConfigF64 = CifConfig<f64>;
pub type CifConfigF32 = CifConfig<f32>;
pub type IntegrationTraceF64 = IntegrationTrace<f64>;
pub type IntegrationTraceF32 = IntegrationTrace<f32>;
pub type EmissionGridF64 = EmissionGrid<f64>;
pub type EmissionGridF32 = EmissionGrid<f32>;
