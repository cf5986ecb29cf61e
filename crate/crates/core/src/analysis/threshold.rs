//! Locating the noise threshold along a sweep.

use serde::{Deserialize, Serialize};

use super::noise::NoiseFractionEstimate;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// External rate, mixing weight, or whatever the sweep varies.
    pub noise_setting: f64,
    pub nf: NoiseFractionEstimate,
    /// Signed certification margin: witness bound or visibility sum minus bound.
    pub witness_value: f64,
    /// One standard deviation of `witness_value`.
    pub sigma: f64,
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Threshold {
    /// Single sign change, linearly interpolated; `band` from `value -+ sigma`.
    Crossing { nf: f64, band: (f64, f64) },
    /// Certified at every point: the threshold is at least the largest NF.
    AtLeast(f64),
    /// Certified nowhere: the threshold is below the smallest NF.
    Below(f64),
    /// Certification switches more than once; every crossing is listed.
    Ambiguous { crossings: Vec<f64> },
}

impl Threshold {
    pub fn nf(&self) -> Option<f64> {
        match self {
            Threshold::Crossing { nf, .. } => Some(*nf),
            _ => None,
        }
    }
}

fn crossings(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..xs.len().saturating_sub(1) {
        let (y0, y1) = (ys[i], ys[i + 1]);
        if (y0 > 0.0) != (y1 > 0.0) {
            let t = y0 / (y0 - y1);
            out.push(xs[i] + t * (xs[i + 1] - xs[i]));
        }
    }
    out
}

/// Maximal NF at which the margin is still positive.
pub fn threshold_scan(points: &[SweepPoint]) -> Result<Threshold> {
    if points.is_empty() {
        return Err(Error::Empty("empty sweep"));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.nf.value()).collect();
    if xs.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Inconsistent("sweep points are not sorted by NF".into()));
    }
    let ys: Vec<f64> = points.iter().map(|p| p.witness_value).collect();
    let found = crossings(&xs, &ys);
    match found.len() {
        0 if ys[0] > 0.0 => Ok(Threshold::AtLeast(xs[xs.len() - 1])),
        0 => Ok(Threshold::Below(xs[0])),
        1 if ys[0] > 0.0 => {
            let nf = found[0];
            let bound = |sign: f64| {
                let shifted: Vec<f64> = points.iter().map(|p| p.witness_value + sign * p.sigma).collect();
                crossings(&xs, &shifted)
                    .into_iter()
                    .min_by(|a, b| (a - nf).abs().total_cmp(&(b - nf).abs()))
                    .unwrap_or(nf)
            };
            let (lo, hi) = (bound(-1.0), bound(1.0));
            Ok(Threshold::Crossing {
                nf,
                band: (lo.min(hi), lo.max(hi)),
            })
        }
        _ => Ok(Threshold::Ambiguous { crossings: found }),
    }
}
