use std::path::{Path, PathBuf};

use hdent::analysis::{
    derive_seed, et_point, et_sweep, fiber_distance, fiber_loss, mub_sweep, poisson_resample, sweep_csv,
    thresholds_by_group, EtSweepConfig, EtSweepRow, SweepRow, Threshold, ERROR_BAR_SIGMAS,
};
use hdent::etwitness::witness_from_counts;
use hdent::mub::build_mubs;
use hdent::qstate::SchmidtState;
use hdent::tagstream::{generate_stream, read_tags, sift_and_bin, write_tags_to, Basis, BinningConfig, TagStream};
use hdent::{Error, Exec, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::output::Written;

pub const WITNESS_CSV_SCHEMA: &str = "# hdent-witness v1";
pub const LINK_CSV_SCHEMA: &str = "# hdent-link-budget v1";

fn tag_path(dir: &Path, basis: Basis, index: usize) -> PathBuf {
    let b = match basis {
        Basis::HV => "hv",
        Basis::DA => "da",
    };
    dir.join(format!("tags_{b}_{index:03}.hdtt"))
}

/// HV and DA tag files for every sweep point. Seeds follow the sweep
/// convention, so `sweep-noise` on the same config sees the same streams.
pub fn simulate_tags(cfg: &RunConfig, frames: Option<u64>) -> Result<Value> {
    cfg.binnings()?;
    let grid = cfg.background_grid()?;
    let n_frames = frames.unwrap_or(cfg.sweep.n_frames);
    let mut written = Written::default();
    let mut points = Vec::new();
    for (i, &rate) in grid.iter().enumerate() {
        let mut entry = json!({ "index": i, "background_rate_per_detector": rate });
        for (basis, offset) in [(Basis::HV, 0u64), (Basis::DA, 1)] {
            let mut model = cfg.source_model(basis)?;
            model.background_rate_per_detector = rate;
            let stream = generate_stream(&model, &cfg.clock, n_frames, derive_seed(cfg.seed, 3 * i as u64 + offset))?;
            let mut bytes = Vec::new();
            write_tags_to(&stream, &mut bytes)?;
            let path = tag_path(&cfg.output_dir, basis, i);
            entry[basis.to_string().to_lowercase()] = json!(path.file_name().map(|n| n.to_string_lossy()));
            written.bytes(path, &bytes)?;
        }
        points.push(entry);
    }
    let manifest = json!({ "n_frames": n_frames, "seed": cfg.seed, "points": points });
    written.json(cfg.output_dir.join("tags_manifest.json"), &manifest)?;
    Ok(json!({ "command": "simulate-tags", "files": written.files }))
}

#[derive(Debug, Serialize)]
struct CertifyRow {
    d: usize,
    f: usize,
    witness_lower_bound: f64,
    sigma: f64,
    certified: bool,
    nf_true: Option<f64>,
    nf_estimated: f64,
}

fn load_pair(hv: &Path, da: &Path) -> Result<(TagStream, TagStream)> {
    let (hv, da) = (read_tags(hv)?, read_tags(da)?);
    if hv.clock() != da.clock() {
        return Err(Error::Inconsistent("HV and DA files have different clock headers".into()));
    }
    Ok((hv, da))
}

/// Witness reports for each `d` from one pair of tag files.
pub fn certify_et(cfg: &RunConfig, hv: &Path, da: &Path, dims: &[usize], eta_hwp: f64) -> Result<Value> {
    if dims.is_empty() {
        return Err(Error::Empty("no dimensions requested"));
    }
    let (hv_stream, da_stream) = load_pair(hv, da)?;
    let mut written = Written::default();
    let mut rows = Vec::new();
    let mut csv = format!(
        "{WITNESS_CSV_SCHEMA}\nd,f,coherence_sum,penalty_sum,witness_lower_bound,sigma,certified,N1,N2,nf_true,nf_estimated\n"
    );
    for &d in dims {
        let binning = BinningConfig::new(hv_stream.clock(), d)?;
        let hv_set = sift_and_bin(&hv_stream, &binning, Basis::HV)?;
        let da_set = sift_and_bin(&da_stream, &binning, Basis::DA)?;
        let EtSweepRow { row, report } = et_point(
            &hv_set,
            &da_set,
            0.0,
            eta_hwp,
            cfg.resamples,
            derive_seed(cfg.seed, d as u64),
            cfg.source.nf_method,
            Exec::default(),
        )?;
        let nf = row.point.nf;
        csv.push_str(&format!(
            "{},{},{:.12e},{:.12e},{:.12e},{:.12e},{},{},{},{},{:.12e}\n",
            report.d,
            report.f,
            report.coherence_sum,
            report.penalty_sum,
            report.witness_lower_bound,
            row.point.sigma,
            report.certified,
            report.n1,
            report.n2,
            nf.nf_true.map(|v| format!("{v:.12e}")).unwrap_or_default(),
            nf.nf_estimated
        ));
        written.json(cfg.output_dir.join(format!("witness_d{d}.json")), &report)?;
        rows.push(CertifyRow {
            d,
            f: report.f,
            witness_lower_bound: report.witness_lower_bound,
            sigma: row.point.sigma,
            certified: report.certified,
            nf_true: nf.nf_true,
            nf_estimated: nf.nf_estimated,
        });
    }
    written.bytes(cfg.output_dir.join("witness.csv"), csv.as_bytes())?;
    Ok(json!({ "command": "certify-et", "reports": rows, "files": written.files }))
}

fn thresholds_json(rows: &[SweepRow]) -> Result<Value> {
    let t: Vec<(usize, Threshold)> = thresholds_by_group(rows)?;
    Ok(Value::Array(
        t.into_iter()
            .map(|(key, th)| json!({ "d_or_k": key, "threshold": th }))
            .collect(),
    ))
}

pub fn mub_sweep_cmd(cfg: &RunConfig) -> Result<Value> {
    cfg.check_mub()?;
    let grid = cfg.p_grid()?;
    let mubs = build_mubs(cfg.mub.d)?;
    let family = SchmidtState::max_entangled(cfg.mub.d)?;
    let mut rows = Vec::new();
    for &k in &cfg.mub.k {
        rows.extend(mub_sweep(&mubs, k, &family, &grid, Exec::default())?);
    }
    let mut written = Written::default();
    let d = cfg.mub.d;
    written.bytes(cfg.output_dir.join(format!("mub_sweep_d{d}.csv")), sweep_csv(&rows).as_bytes())?;
    let thresholds = thresholds_json(&rows)?;
    written.json(cfg.output_dir.join(format!("mub_thresholds_d{d}.json")), &thresholds)?;
    Ok(json!({ "command": "mub-sweep", "d": d, "thresholds": thresholds, "files": written.files }))
}

pub fn sweep_noise(cfg: &RunConfig, frames: Option<u64>) -> Result<Value> {
    let grid = cfg.background_grid()?;
    let sweep = EtSweepConfig {
        clock: cfg.clock,
        source: cfg.source_model(Basis::HV)?,
        dims: cfg.binnings()?.iter().map(|b| b.d).collect(),
        n_frames: frames.unwrap_or(cfg.sweep.n_frames),
        seed: cfg.seed,
        eta_hwp: cfg.source.eta_hwp,
        n_resamples: cfg.resamples,
        nf_method: cfg.source.nf_method,
    };
    let out = et_sweep(&sweep, &grid, Exec::default())?;
    let rows: Vec<SweepRow> = out.iter().map(|r| r.row.clone()).collect();
    let reports: Vec<_> = out.iter().map(|r| &r.report).collect();
    let mut written = Written::default();
    written.bytes(cfg.output_dir.join("et_sweep.csv"), sweep_csv(&rows).as_bytes())?;
    written.json(cfg.output_dir.join("et_reports.json"), &reports)?;
    let thresholds = thresholds_json(&rows)?;
    written.json(cfg.output_dir.join("et_thresholds.json"), &thresholds)?;
    Ok(json!({ "command": "sweep-noise", "thresholds": thresholds, "files": written.files }))
}

pub fn resample(cfg: &RunConfig, hv: &Path, da: &Path, dims: &[usize], eta_hwp: f64) -> Result<Value> {
    if dims.is_empty() {
        return Err(Error::Empty("no dimensions requested"));
    }
    let (hv_stream, da_stream) = load_pair(hv, da)?;
    let mut written = Written::default();
    let mut summaries = Vec::new();
    for &d in dims {
        let binning = BinningConfig::new(hv_stream.clock(), d)?;
        let f = binning.f_shift;
        let counts = (
            sift_and_bin(&hv_stream, &binning, Basis::HV)?,
            sift_and_bin(&da_stream, &binning, Basis::DA)?,
        );
        let s = poisson_resample(&counts, cfg.resamples, derive_seed(cfg.seed, d as u64), |(h, a)| {
            Ok(witness_from_counts(h, a, d, f, eta_hwp)?.witness_lower_bound)
        })?;
        let value = json!({
            "d": d,
            "f": f,
            "point": s.point,
            "mean": s.mean,
            "std": s.std,
            "error_bar": s.error_bar(),
            "error_bar_sigmas": ERROR_BAR_SIGMAS,
            "n_resamples": s.n_resamples,
            "values": s.values,
        });
        written.json(cfg.output_dir.join(format!("resample_d{d}.json")), &value)?;
        summaries.push(json!({ "d": d, "point": s.point, "std": s.std, "error_bar": s.error_bar() }));
    }
    Ok(json!({ "command": "resample", "summaries": summaries, "files": written.files }))
}

/// CSV table of loss against distance; does not touch the output directory.
pub fn link_budget(db: &[f64], km: &[f64], attenuation: f64) -> Result<String> {
    if db.is_empty() && km.is_empty() {
        return Err(Error::Empty("give --db or --km values"));
    }
    let mut out = format!("{LINK_CSV_SCHEMA}\nloss_db,distance_km,attenuation_db_per_km\n");
    for &x in db {
        out.push_str(&format!("{x},{},{attenuation}\n", fiber_distance(x, attenuation)?));
    }
    for &x in km {
        out.push_str(&format!("{},{x},{attenuation}\n", fiber_loss(x, attenuation)?));
    }
    Ok(out)
}
