//! Noise fractions, Poisson error propagation, threshold location, sweeps and
//! the fiber link budget.

mod link;
mod noise;
mod resample;
mod sweep;
mod threshold;

pub use link::{fiber_distance, fiber_loss, DEFAULT_ATTENUATION_DB_PER_KM};
pub use noise::{
    accidental_fraction, noise_fraction, noise_fraction_of_correlations, noise_fraction_of_stream, NoiseFractionEstimate,
    NoiseMethod,
};
pub use resample::{
    poisson_resample, poisson_resample_with, PoissonResample, ResampleSummary, DEFAULT_RESAMPLES, ERROR_BAR_SIGMAS,
};
pub use sweep::{
    derive_seed, et_exact_sweep, et_point, et_sweep, mub_sweep, sweep_csv, thresholds_by_group, EtSweepConfig,
    EtSweepRow, SweepRow, SWEEP_CSV_SCHEMA,
};
pub use threshold::{threshold_scan, SweepPoint, Threshold};
