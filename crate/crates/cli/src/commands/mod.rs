pub mod gradcheck;
pub mod longutt;
pub mod metrics;
pub mod plot;
pub mod simulate;
pub mod synth;
pub mod train;
