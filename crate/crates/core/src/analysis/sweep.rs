//! Noise sweeps for both certification routes and their CSV export.

use serde::{Deserialize, Serialize};

use super::noise::{noise_fraction, noise_fraction_of_correlations, NoiseFractionEstimate, NoiseMethod};
use super::resample::poisson_resample_with;
use super::threshold::{threshold_scan, SweepPoint, Threshold};
use crate::etwitness::{witness_exact, witness_from_counts, WitnessReport};
use crate::mub::{correlation_matrix, visibility_sum, MubSet};
use crate::par::{map_slice, Exec};
use crate::qstate::{NoisyState, SchmidtState};
use crate::tagstream::{
    generate_stream_with, sift_and_bin_with, Basis, BinningConfig, ClockConfig, CountMatrixSet, SourceModel,
};
use crate::{Error, Result};

pub const SWEEP_CSV_SCHEMA: &str = "# hdent-sweep v1";

/// One sweep point tagged with the dimension (Pathway I) or number of bases (Pathway II).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub d_or_k: usize,
    pub point: SweepPoint,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    out.push_str(SWEEP_CSV_SCHEMA);
    out.push('\n');
    out.push_str("d_or_k,noise_setting,nf_true,nf_estimated,witness_or_visibility_sum,sigma,certified\n");
    for r in rows {
        let p = &r.point;
        let nf_true = p.nf.nf_true.map(|v| format!("{v:.12e}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{:.12e},{},{:.12e},{:.12e},{:.12e},{}\n",
            r.d_or_k, p.noise_setting, nf_true, p.nf.nf_estimated, p.witness_value, p.sigma, p.certified
        ));
    }
    out
}

/// Threshold per `d_or_k`, each group sorted by NF first.
pub fn thresholds_by_group(rows: &[SweepRow]) -> Result<Vec<(usize, Threshold)>> {
    let mut keys: Vec<usize> = rows.iter().map(|r| r.d_or_k).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.into_iter()
        .map(|key| {
            let mut pts: Vec<SweepPoint> = rows.iter().filter(|r| r.d_or_k == key).map(|r| r.point.clone()).collect();
            pts.sort_by(|a, b| a.nf.value().total_cmp(&b.nf.value()));
            Ok((key, threshold_scan(&pts)?))
        })
        .collect()
}

/// Pathway II at probability level: `family` mixed with white noise at each `p`.
///
/// NF is `1 - p` by construction; `nf_estimated` is the pedestal estimate on
/// the computational-basis correlations. Rows come out sorted by NF.
pub fn mub_sweep(
    mubs: &MubSet,
    k: usize,
    family: &SchmidtState,
    p_grid: &[f64],
    exec: Exec,
) -> Result<Vec<SweepRow>> {
    if p_grid.is_empty() {
        return Err(Error::Empty("empty noise grid"));
    }
    let mut rows = map_slice(exec, p_grid, |&p| -> Result<SweepRow> {
        let state = NoisyState::new(family.clone(), p)?;
        let report = visibility_sum(&state, mubs, k)?;
        let nf_estimated = noise_fraction_of_correlations(&correlation_matrix(&state, mubs, 0, 0)?)?;
        Ok(SweepRow {
            d_or_k: k,
            point: SweepPoint {
                noise_setting: p,
                nf: NoiseFractionEstimate {
                    nf_true: Some(1.0 - p),
                    nf_estimated,
                    method: NoiseMethod::GroundTruth,
                },
                witness_value: report.margin(),
                sigma: 0.0,
                certified: report.certified,
            },
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.point.nf.value().total_cmp(&b.point.nf.value()));
    Ok(rows)
}

/// Pathway I at probability level: exact witness of the isotropic state at each `p`.
pub fn et_exact_sweep(d: usize, f: usize, p_grid: &[f64]) -> Result<Vec<SweepRow>> {
    if p_grid.is_empty() {
        return Err(Error::Empty("empty noise grid"));
    }
    let mut rows = p_grid
        .iter()
        .map(|&p| {
            let w = witness_exact(&NoisyState::isotropic(d, p)?, f)?;
            Ok(SweepRow {
                d_or_k: d,
                point: SweepPoint {
                    noise_setting: p,
                    nf: NoiseFractionEstimate::exact(1.0 - p),
                    witness_value: w,
                    sigma: 0.0,
                    certified: w > 0.0,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.point.nf.value().total_cmp(&b.point.nf.value()));
    Ok(rows)
}

/// Settings for a simulated Pathway I sweep over background rates.
///
/// Each sweep point generates one HV and one DA stream with `source.state`
/// (which fixes the generation grid) and sifts both streams at every entry of
/// `dims`, so all dimensions see the same data.
#[derive(Debug, Clone, PartialEq)]
pub struct EtSweepConfig {
    pub clock: ClockConfig,
    pub source: SourceModel,
    pub dims: Vec<usize>,
    pub n_frames: u64,
    pub seed: u64,
    pub eta_hwp: f64,
    /// Poisson replicates per point; 0 skips error propagation.
    pub n_resamples: usize,
    pub nf_method: NoiseMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtSweepRow {
    pub row: SweepRow,
    pub report: WitnessReport,
}

/// Seed for stream `index` of a sweep.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Merged noise fraction of the HV and DA sets of one point.
fn combined_noise_fraction(hv: &CountMatrixSet, da: &CountMatrixSet, method: NoiseMethod) -> Result<NoiseFractionEstimate> {
    let a = noise_fraction(hv, method)?;
    let b = noise_fraction(da, method)?;
    let (wa, wb) = (hv.frames_kept as f64, da.frames_kept as f64);
    let mix = |x: f64, y: f64| (x * wa + y * wb) / (wa + wb);
    Ok(NoiseFractionEstimate {
        nf_true: a.nf_true.zip(b.nf_true).map(|(x, y)| mix(x, y)),
        nf_estimated: mix(a.nf_estimated, b.nf_estimated),
        method,
    })
}

/// Witness and NF for one pair of sifted sets.
#[allow(clippy::too_many_arguments)]
pub fn et_point(
    hv: &CountMatrixSet,
    da: &CountMatrixSet,
    noise_setting: f64,
    eta_hwp: f64,
    n_resamples: usize,
    seed: u64,
    method: NoiseMethod,
    exec: Exec,
) -> Result<EtSweepRow> {
    let (d, f) = (hv.d, hv.f);
    let mut report = witness_from_counts(hv, da, d, f, eta_hwp)?;
    let nf = combined_noise_fraction(hv, da, method)?;
    if n_resamples > 0 {
        let counts = (hv.clone(), da.clone());
        let summary = poisson_resample_with(&counts, n_resamples, seed, exec, |(h, a)| {
            Ok(witness_from_counts(h, a, d, f, eta_hwp)?.witness_lower_bound)
        })?;
        report.sigma = Some(summary.std);
    }
    Ok(EtSweepRow {
        row: SweepRow {
            d_or_k: d,
            point: SweepPoint {
                noise_setting,
                nf,
                witness_value: report.witness_lower_bound,
                sigma: report.sigma.unwrap_or(0.0),
                certified: report.certified,
            },
        },
        report,
    })
}

/// Simulated Pathway I sweep; rows are grouped by dimension in `dims` order.
pub fn et_sweep(cfg: &EtSweepConfig, background_rates: &[f64], exec: Exec) -> Result<Vec<EtSweepRow>> {
    if background_rates.is_empty() {
        return Err(Error::Empty("empty noise grid"));
    }
    if cfg.dims.is_empty() {
        return Err(Error::Empty("no dimensions to analyse"));
    }
    let binnings = cfg
        .dims
        .iter()
        .map(|&d| BinningConfig::new(&cfg.clock, d))
        .collect::<Result<Vec<_>>>()?;
    let mut per_dim: Vec<Vec<EtSweepRow>> = vec![Vec::new(); binnings.len()];
    for (i, &rate) in background_rates.iter().enumerate() {
        let mut model = cfg.source.clone();
        model.background_rate_per_detector = rate;
        let hv_model = SourceModel {
            basis: Basis::HV,
            ..model.clone()
        };
        let da_model = SourceModel {
            basis: Basis::DA,
            ..model
        };
        let i = i as u64;
        let hv_stream = generate_stream_with(&hv_model, &cfg.clock, cfg.n_frames, derive_seed(cfg.seed, 3 * i), exec)?;
        let da_stream = generate_stream_with(&da_model, &cfg.clock, cfg.n_frames, derive_seed(cfg.seed, 3 * i + 1), exec)?;
        for (b, binning) in binnings.iter().enumerate() {
            let hv = sift_and_bin_with(&hv_stream, binning, Basis::HV, exec)?;
            let da = sift_and_bin_with(&da_stream, binning, Basis::DA, exec)?;
            per_dim[b].push(et_point(
                &hv,
                &da,
                rate,
                cfg.eta_hwp,
                cfg.n_resamples,
                derive_seed(cfg.seed, 3 * i + 2),
                cfg.nf_method,
                exec,
            )?);
        }
    }
    Ok(per_dim.into_iter().flatten().collect())
}
