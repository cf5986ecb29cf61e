//! Noise fraction: the share of kept coincidences attributable to noise.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::tagstream::{Basis, BinningConfig, CountMatrixSet, TagStream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMethod {
    /// From the origin labels of simulated events.
    GroundTruth,
    /// From the off-diagonal pedestal, assuming uniform accidentals.
    AccidentalModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseFractionEstimate {
    /// Label-based fraction; `None` when the data carries unknown origins.
    pub nf_true: Option<f64>,
    pub nf_estimated: f64,
    pub method: NoiseMethod,
}

impl NoiseFractionEstimate {
    /// Exact probability-level value, where both estimators coincide.
    pub fn exact(nf: f64) -> Self {
        Self {
            nf_true: Some(nf),
            nf_estimated: nf,
            method: NoiseMethod::GroundTruth,
        }
    }

    /// The value selected by `method`.
    pub fn value(&self) -> f64 {
        match self.method {
            NoiseMethod::GroundTruth => self.nf_true.unwrap_or(self.nf_estimated),
            NoiseMethod::AccidentalModel => self.nf_estimated,
        }
    }
}

/// Accidental share of a collection of `d x d` matrices given row-major.
///
/// Each matrix's mean off-diagonal entry, times `d^2`, estimates its
/// accidentals; the sum over matrices is divided by the grand total and
/// clamped to `[0, 1]`.
pub fn accidental_fraction<'a, I>(d: usize, matrices: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    if d < 2 {
        return Err(Error::InvalidDimension {
            dim: d,
            reason: "need at least two bins",
        });
    }
    let (mut accidentals, mut total) = (0.0, 0.0);
    for m in matrices {
        if m.len() != d * d {
            return Err(Error::Inconsistent(format!("matrix of {} entries, expected {}", m.len(), d * d)));
        }
        let sum: f64 = m.iter().sum();
        let diag: f64 = (0..d).map(|i| m[i * d + i]).sum();
        let off_mean = (sum - diag) / (d * d - d) as f64;
        accidentals += off_mean * (d * d) as f64;
        total += sum;
    }
    if total <= 0.0 {
        return Err(Error::Empty("no counts to estimate a noise fraction from"));
    }
    Ok((accidentals / total).clamp(0.0, 1.0))
}

/// Noise fraction of a sifted count-matrix set.
pub fn noise_fraction(set: &CountMatrixSet, method: NoiseMethod) -> Result<NoiseFractionEstimate> {
    if set.frames_kept == 0 || set.total() == 0 {
        return Err(Error::Empty("no kept coincidences"));
    }
    let labels_known = set.kept_with_unknown == 0;
    if method == NoiseMethod::GroundTruth && !labels_known {
        return Err(Error::Inconsistent(
            "ground-truth noise fraction requested on data with unknown origins".into(),
        ));
    }
    let nf_true = labels_known.then(|| set.kept_with_noise as f64 / set.frames_kept as f64);
    let as_f64: Vec<Vec<f64>> = set
        .matrices
        .iter()
        .map(|m| m.data().iter().map(|&c| c as f64).collect())
        .collect();
    let nf_estimated = accidental_fraction(set.d, as_f64.iter().map(Vec::as_slice))?;
    Ok(NoiseFractionEstimate {
        nf_true,
        nf_estimated,
        method,
    })
}

/// Sifts `stream` first; the noise fraction is per kept coincidence.
pub fn noise_fraction_of_stream(
    stream: &TagStream,
    binning: &BinningConfig,
    basis: Basis,
    method: NoiseMethod,
) -> Result<NoiseFractionEstimate> {
    let set = crate::tagstream::sift_and_bin(stream, binning, basis)?;
    noise_fraction(&set, method)
}

/// Accidental-model noise fraction of a probability (or count) correlation matrix.
pub fn noise_fraction_of_correlations(matrix: &DMatrix<f64>) -> Result<f64> {
    if matrix.nrows() != matrix.ncols() {
        return Err(Error::Inconsistent("correlation matrix is not square".into()));
    }
    if matrix.iter().any(|&x| x < 0.0) {
        return Err(Error::param("matrix", "negative entry"));
    }
    let d = matrix.nrows();
    // row-major copy
    let data: Vec<f64> = (0..d * d).map(|k| matrix[(k / d, k % d)]).collect();
    accidental_fraction(d, [data.as_slice()])
}
