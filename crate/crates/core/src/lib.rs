//! Simulation and certification of noisy high-dimensional photonic entanglement.
//!
//! Two certification routes are provided:
//!
//! * fine-grained time-bin entanglement, where time-tag streams are sifted into
//!   count matrices ([`tagstream`]) and a witness lower bound is reconstructed
//!   from them ([`etwitness`]);
//! * visibility sums over mutually unbiased bases in prime dimensions ([`mub`]).
//!
//! [`qstate`] holds the exact isotropic-noise states used as ground truth, and
//! [`analysis`] covers noise fractions, Poisson Monte Carlo errors, threshold
//! location and the fiber link budget.

pub mod analysis;
pub mod error;
pub mod etwitness;
pub mod mub;
pub mod par;
pub mod qstate;
pub mod tagstream;

pub use error::{Error, Result};
pub use par::Exec;

/// Complex amplitude type used throughout.
pub type C64 = nalgebra::Complex<f64>;
