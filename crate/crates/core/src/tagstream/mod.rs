//! Simulated time-tag data path: source and background events, detector
//! jitter, frame/bin discretization, coincidence sifting and count matrices.

mod config;
pub mod format;
mod generate;
mod sift;

pub use config::{
    Basis, BinningConfig, Channel, ClockConfig, Origin, SourceModel, TagRecord, TagStream, FWHM_PER_SIGMA,
};
pub use format::{read_tags, read_tags_from, write_tags, write_tags_to};
pub use generate::{
    expected_count_matrices, generate_stream, generate_stream_with, pair_outcome_distribution, ExpectedCounts,
    PairOutcome, MAX_EVENTS_PER_FRAME,
};
pub use sift::{crosstalk_profile, sift_and_bin, sift_and_bin_with, CountMatrix, CountMatrixSet, DetectorPair};
