//! Poisson Monte Carlo error propagation.
//!
//! Every observed count is taken as the mean of a Poisson variable; replicate
//! data sets are drawn and the downstream statistic is recomputed on each.
//! Replicate `r` draws from its own ChaCha stream, so results do not depend on
//! how replicates are spread over workers.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::par::{map_indexed, Exec};
use crate::tagstream::{CountMatrix, CountMatrixSet};
use crate::{Error, Result};

pub const DEFAULT_RESAMPLES: usize = 150;

/// Error bars are quoted as this many standard deviations.
pub const ERROR_BAR_SIGMAS: f64 = 3.0;

fn poisson_draw<R: Rng>(mean: f64, rng: &mut R) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    Poisson::new(mean).map(|p| p.sample(rng)).unwrap_or(mean)
}

/// Count data that can produce Poisson replicates of itself.
pub trait PoissonResample: Sized + Sync {
    fn validate_counts(&self) -> Result<()> {
        Ok(())
    }

    fn poisson_replicate<R: Rng>(&self, rng: &mut R) -> Self;
}

impl PoissonResample for CountMatrix {
    fn poisson_replicate<R: Rng>(&self, rng: &mut R) -> Self {
        let mut out = self.clone();
        for c in out.data_mut() {
            *c = poisson_draw(*c as f64, rng) as u64;
        }
        out
    }
}

impl PoissonResample for CountMatrixSet {
    fn poisson_replicate<R: Rng>(&self, rng: &mut R) -> Self {
        let matrices = std::array::from_fn(|k| self.matrices[k].poisson_replicate(rng));
        self.with_matrices(matrices)
    }
}

/// Count-valued correlation matrices (e.g. coincidences per MUB pair).
impl PoissonResample for DMatrix<f64> {
    fn validate_counts(&self) -> Result<()> {
        if self.iter().any(|&x| x.is_nan() || x < 0.0) {
            return Err(Error::param("counts", "negative or NaN count"));
        }
        Ok(())
    }

    fn poisson_replicate<R: Rng>(&self, rng: &mut R) -> Self {
        self.map(|x| poisson_draw(x, rng))
    }
}

impl<A: PoissonResample, B: PoissonResample> PoissonResample for (A, B) {
    fn validate_counts(&self) -> Result<()> {
        self.0.validate_counts()?;
        self.1.validate_counts()
    }

    fn poisson_replicate<R: Rng>(&self, rng: &mut R) -> Self {
        let a = self.0.poisson_replicate(rng);
        let b = self.1.poisson_replicate(rng);
        (a, b)
    }
}

impl<T: PoissonResample> PoissonResample for Vec<T> {
    fn validate_counts(&self) -> Result<()> {
        self.iter().try_for_each(PoissonResample::validate_counts)
    }

    fn poisson_replicate<R: Rng>(&self, rng: &mut R) -> Self {
        self.iter().map(|x| x.poisson_replicate(rng)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResampleSummary {
    /// Statistic on the observed data.
    pub point: f64,
    pub mean: f64,
    /// Sample standard deviation over replicates.
    pub std: f64,
    pub n_resamples: usize,
    pub values: Vec<f64>,
}

impl ResampleSummary {
    /// Half-width of the quoted error bar (3 sigma).
    pub fn error_bar(&self) -> f64 {
        ERROR_BAR_SIGMAS * self.std
    }
}

pub fn poisson_resample<T, F>(counts: &T, n_resamples: usize, seed: u64, stat: F) -> Result<ResampleSummary>
where
    T: PoissonResample,
    F: Fn(&T) -> Result<f64> + Sync + Send,
{
    poisson_resample_with(counts, n_resamples, seed, Exec::default(), stat)
}

pub fn poisson_resample_with<T, F>(
    counts: &T,
    n_resamples: usize,
    seed: u64,
    exec: Exec,
    stat: F,
) -> Result<ResampleSummary>
where
    T: PoissonResample,
    F: Fn(&T) -> Result<f64> + Sync + Send,
{
    if n_resamples < 2 {
        return Err(Error::param("n_resamples", format!("{n_resamples} < 2")));
    }
    counts.validate_counts()?;
    let point = stat(counts)?;
    let key = ChaCha8Rng::seed_from_u64(seed).get_seed();
    let values = map_indexed(exec, n_resamples, |r| {
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(r as u64);
        stat(&counts.poisson_replicate(&mut rng))
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(ResampleSummary {
        point,
        mean,
        std: var.sqrt(),
        n_resamples,
        values,
    })
}
