//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::io::Write;
use std::time::Instant;

use hdent::analysis::*;
use hdent::etwitness::{witness_exact, witness_materialized};
use hdent::mub::{build_mubs, mub_noise_threshold, visibility_sum, MubThreshold};
use hdent::qstate::{NoisyState, Pairing, SchmidtState};
use hdent::tagstream::*;
use hdent::Exec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn pair_rate(prob: f64, clock: &ClockConfig) -> f64 {
    -(1.0 - prob).ln() / clock.frame_seconds()
}

fn mub_correctness() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for d in [2usize, 3, 5, 7, 11] {
        let mubs = build_mubs(d).map_err(|e| e.to_string())?;
        if mubs.n_bases() != d + 1 {
            return Err(format!("d={d}: {} bases", mubs.n_bases()));
        }
        worst = worst.max(mubs.max_condition_error());
    }
    let elapsed = start.elapsed().as_secs_f64();
    check(worst < 1e-10 && elapsed < 1.0, format!("max overlap error {worst:.2e}, {elapsed:.3}s"))
}

fn separable_saturation() -> Outcome {
    let mut worst = 0.0f64;
    for d in [2usize, 3, 5, 7] {
        let mubs = build_mubs(d).unwrap();
        let s = NoisyState::new(SchmidtState::product(d, 0, Pairing::Correlated).unwrap(), 1.0).unwrap();
        let r = visibility_sum(&s, &mubs, d + 1).unwrap();
        worst = worst.max((r.visibility_sum - 2.0).abs()).max((r.separable_bound - 2.0).abs());
        if r.certified {
            return Err(format!("d={d}: product state certified"));
        }
    }
    check(worst < 1e-10, format!("|sum V - 2| <= {worst:.2e}"))
}

fn pathway_two_thresholds() -> Outcome {
    let mut found = Vec::new();
    for (d, k) in [(2usize, 3usize), (3, 4), (5, 6), (7, 8)] {
        let mubs = build_mubs(d).unwrap();
        let fam = SchmidtState::max_entangled(d).unwrap();
        match mub_noise_threshold(&mubs, k, &fam).unwrap() {
            MubThreshold::Found(p) => {
                if (p - 1.0 / k as f64).abs() > 1e-4 {
                    return Err(format!("d={d}, k={k}: p* = {p}"));
                }
                found.push(1.0 - p);
            }
            other => return Err(format!("d={d}: {other:?}")),
        }
    }
    let increasing = found.windows(2).all(|w| w[0] < w[1]);
    check(increasing, format!("nf* = {}", fmt_list(&found)))
}

fn laddering() -> Outcome {
    let mubs = build_mubs(3).unwrap();
    let fam = SchmidtState::max_entangled(3).unwrap();
    let grid: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
    let mut nf = Vec::new();
    for k in 2..=4 {
        let rows = mub_sweep(&mubs, k, &fam, &grid, Exec::Parallel).map_err(|e| e.to_string())?;
        match &thresholds_by_group(&rows).map_err(|e| e.to_string())?[0].1 {
            Threshold::Crossing { nf: x, .. } => nf.push(*x),
            other => return Err(format!("k={k}: {other:?}")),
        }
    }
    check(nf[0] < nf[1] && nf[1] < nf[2], format!("d=3, k=2,3,4: nf* = {}", fmt_list(&nf)))
}

fn exact_witness() -> Outcome {
    let mut worst_value = 0.0f64;
    let mut worst_root = 0.0f64;
    for d in [4usize, 10, 20] {
        let w = witness_exact(&NoisyState::isotropic(d, 1.0).unwrap(), 1).unwrap();
        let expect = (d - 1) as f64 / (d as f64 * ((d - 1) as f64).sqrt());
        worst_value = worst_value.max((w - expect).abs());
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if witness_exact(&NoisyState::isotropic(d, mid).unwrap(), 1).unwrap() > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        worst_root = worst_root.max((0.5 * (lo + hi) - 1.0 / (d as f64 + 1.0)).abs());
    }
    let mut worst_mat = 0.0f64;
    for d in 2..=8 {
        for p in [0.0, 1.0 / (d as f64 + 1.0), 0.5, 1.0] {
            let s = NoisyState::isotropic(d, p).unwrap();
            let rho = s.materialize().unwrap();
            for f in 1..d {
                worst_mat = worst_mat.max((witness_exact(&s, f).unwrap() - witness_materialized(&rho, f).unwrap()).abs());
            }
        }
    }
    check(
        worst_value < 1e-10 && worst_root < 1e-6 && worst_mat < 1e-10,
        format!("value err {worst_value:.1e}, root err {worst_root:.1e}, materialized err {worst_mat:.1e}"),
    )
}

const DIMS: [usize; 4] = [10, 20, 40, 80];
const FRAMES: u64 = 200_000;

fn sweep_config(jitter: f64, pair_prob: f64, n_resamples: usize) -> EtSweepConfig {
    let clock = ClockConfig::default();
    let mut source = SourceModel::ideal(80, Basis::HV).unwrap();
    source.jitter_fwhm_seconds = jitter;
    source.pair_rate = pair_rate(pair_prob, &clock);
    EtSweepConfig {
        clock,
        source,
        dims: DIMS.to_vec(),
        n_frames: FRAMES,
        seed: 2024,
        eta_hwp: 1.0,
        n_resamples,
        nf_method: NoiseMethod::GroundTruth,
    }
}

fn at(rows: &[EtSweepRow], d: usize, rate: f64) -> &EtSweepRow {
    rows.iter().find(|r| r.row.d_or_k == d && r.row.point.noise_setting == rate).unwrap()
}

fn end_to_end() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    // (a) zero noise, with and without jitter
    for jitter in [0.0, 800e-12] {
        let rows = et_sweep(&sweep_config(jitter, 0.05, 0), &[0.0], Exec::Parallel).map_err(|e| e.to_string())?;
        let all = rows.iter().all(|r| r.row.point.certified);
        ok &= all;
        notes.push(format!("(a) jitter {:.0} ps certified at all d: {all}", jitter * 1e12));
    }

    // (b) pure background
    let mut cfg = sweep_config(0.0, 0.05, 0);
    cfg.source.pair_rate = 0.0;
    let rows = et_sweep(&cfg, &[1e7], Exec::Parallel).map_err(|e| e.to_string())?;
    let none = rows.iter().all(|r| !r.row.point.certified);
    ok &= none;
    notes.push(format!("(b) pure background certified nowhere: {none}"));

    // (c) jitterless threshold ordering
    let rates = [0.0, 1e6, 3e6, 6e6, 1e7, 1.5e7, 2e7, 3e7, 4e7, 6e7];
    let rows = et_sweep(&sweep_config(0.0, 0.05, 0), &rates, Exec::Parallel).map_err(|e| e.to_string())?;
    let th = thresholds_by_group(&rows.iter().map(|r| r.row.clone()).collect::<Vec<_>>()).map_err(|e| e.to_string())?;
    let nfs: Vec<f64> = th.iter().filter_map(|(_, t)| t.nf()).collect();
    let ordered = nfs.len() == DIMS.len() && nfs.windows(2).all(|w| w[0] <= w[1]);
    ok &= ordered;
    notes.push(format!("(c) jitterless nf* = {}", fmt_list(&nfs)));

    // (d) 800 ps jitter
    let rates = [0.0, 1.5e7];
    let rows = et_sweep(&sweep_config(800e-12, 0.05, DEFAULT_RESAMPLES), &rates, Exec::Parallel)
        .map_err(|e| e.to_string())?;
    let excess = |d| {
        let nf = at(&rows, d, 0.0).row.point.nf;
        nf.nf_estimated - nf.nf_true.unwrap_or(0.0)
    };
    let base = excess(10);
    let elevated = excess(40) > base + 0.1 && excess(80) > base + 0.1;
    ok &= elevated;
    notes.push(format!(
        "(d) zero-noise NF excess d=10/40/80: {:.3}/{:.3}/{:.3}",
        base,
        excess(40),
        excess(80)
    ));
    let (low, high) = (&at(&rows, 10, 1.5e7).row.point, &at(&rows, 80, 1.5e7).row.point);
    let split = !low.certified && high.certified && high.witness_value > ERROR_BAR_SIGMAS * high.sigma;
    ok &= split;
    notes.push(format!(
        "at NF {:.3}: W(d=10) = {:+.5} +- {:.5}, W(d=80) = {:+.5} +- {:.5} (3 sigma)",
        high.nf.value(),
        low.witness_value,
        ERROR_BAR_SIGMAS * low.sigma,
        high.witness_value,
        ERROR_BAR_SIGMAS * high.sigma
    ));
    check(ok, notes.join("; "))
}

fn crosstalk_oracle() -> Outcome {
    let clock = ClockConfig::default();
    let binning = BinningConfig::new(&clock, 40).unwrap();
    let mut m = SourceModel::ideal(40, Basis::HV).unwrap();
    m.pair_rate = pair_rate(0.02, &clock);
    let stream = generate_stream(&m, &clock, 6_000_000, 77).map_err(|e| e.to_string())?;
    let set = sift_and_bin(&stream, &binning, Basis::HV).map_err(|e| e.to_string())?;
    let n: u64 = [DetectorPair::A0B0, DetectorPair::A1B1].iter().map(|&p| set.matrix(p).total()).sum();
    let observed = crosstalk_profile(&set).map_err(|e| e.to_string())?[1];

    // Per-photon bin shift from the Gaussian CDF; pairs kept only when both
    // photons land in the same frame.
    let sigma = m.jitter_sigma_ticks(&clock);
    let w = binning.bin_ticks as f64;
    let normal = Normal::new(0.0, sigma).unwrap();
    let reach = 6i64;
    let q: Vec<f64> = (-reach..=reach)
        .map(|k| normal.cdf((k as f64 + 0.5) * w) - normal.cdf((k as f64 - 0.5) * w))
        .collect();
    let (d, f) = (40i64, binning.f_shift as i64);
    let (mut kept, mut spill) = (0.0, 0.0);
    for e in 0..d {
        for c in [e, e + f] {
            for (ia, qa) in q.iter().enumerate() {
                for (ib, qb) in q.iter().enumerate() {
                    let (pa, pb) = (c + ia as i64 - reach, c + ib as i64 - reach);
                    if pa < 0 || pb < 0 || pa.div_euclid(d) != pb.div_euclid(d) {
                        continue;
                    }
                    kept += qa * qb;
                    if (pa - pb).abs() == 1 {
                        spill += qa * qb;
                    }
                }
            }
        }
    }
    let expected = spill / kept;
    let sd = (expected * (1.0 - expected) / n as f64).sqrt();
    check(
        n >= 100_000 && (observed - expected).abs() < 3.0 * sd,
        format!("{n} pairs: spill {observed:.5} vs erf oracle {expected:.5} (3 sigma = {:.5})", 3.0 * sd),
    )
}

fn monte_carlo_errors() -> Outcome {
    let clock = ClockConfig::default();
    let mut m = SourceModel::ideal(10, Basis::HV).unwrap();
    m.pair_rate = pair_rate(0.05, &clock);
    m.background_rate_per_detector = 0.02 / clock.frame_seconds();
    let binning = BinningConfig::new(&clock, 10).unwrap();
    let mut points = Vec::new();
    for (i, frames) in [40_000u64, 400_000, 4_000_000].into_iter().enumerate() {
        let gen = |basis, seed| {
            let model = SourceModel { basis, ..m.clone() };
            let s = generate_stream(&model, &clock, frames, seed).unwrap();
            sift_and_bin(&s, &binning, basis).unwrap()
        };
        let counts = (gen(Basis::HV, 10 + i as u64), gen(Basis::DA, 20 + i as u64));
        let n = (counts.0.total() + counts.1.total()) as f64;
        let s = poisson_resample(&counts, DEFAULT_RESAMPLES, 5, |(hv, da)| {
            Ok(hdent::etwitness::witness_from_counts(hv, da, 10, 1, 1.0)?.witness_lower_bound)
        })
        .map_err(|e| e.to_string())?;
        points.push((n, s.std, s.error_bar()));
    }
    let scaled: Vec<f64> = points.iter().map(|(n, sd, _)| sd * n.sqrt()).collect();
    let reference = scaled[scaled.len() - 1];
    let worst = scaled.iter().map(|x| (x / reference - 1.0).abs()).fold(0.0, f64::max);
    check(
        worst < 0.2 && points.iter().all(|p| (p.2 - 3.0 * p.1).abs() < 1e-15),
        format!(
            "counts {}: sigma*sqrt(N) deviates by {:.1}%, 3-sigma bars {}",
            points.iter().map(|p| format!("{:.0}", p.0)).collect::<Vec<_>>().join(", "),
            100.0 * worst,
            fmt_list(&points.iter().map(|p| p.2).collect::<Vec<_>>())
        ),
    )
}

fn link_budget() -> Outcome {
    let a = fiber_distance(82.0, DEFAULT_ATTENUATION_DB_PER_KM).map_err(|e| e.to_string())?;
    let b = fiber_distance(102.0, DEFAULT_ATTENUATION_DB_PER_KM).map_err(|e| e.to_string())?;
    check(
        a == 410.0 && b == 510.0,
        format!("82 dB -> {a} km, 102 dB -> {b} km"),
    )
}

fn format_and_determinism() -> Outcome {
    let clock = ClockConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut records: Vec<TagRecord> = (0..1_000_000)
        .map(|_| TagRecord {
            timestamp: rng.random::<u64>(),
            channel: Channel::ALL[rng.random_range(0..4)],
            origin: [Origin::Signal, Origin::Noise, Origin::Unknown][rng.random_range(0..3)],
        })
        .collect();
    records.sort_by_key(|r| (r.timestamp, r.channel, r.origin));
    let stream = TagStream::new(clock, records).map_err(|e| e.to_string())?;
    let bytes = format::to_bytes(&stream);
    let back = format::from_bytes(&bytes).map_err(|e| e.to_string())?;
    let exact = back == stream && format::to_bytes(&back) == bytes;

    let mut cfg = sweep_config(800e-12, 0.05, 30);
    cfg.n_frames = 50_000;
    let rates = [0.0, 1e7];
    let csv = |exec| {
        let rows = et_sweep(&cfg, &rates, exec).unwrap();
        sweep_csv(&rows.iter().map(|r| r.row.clone()).collect::<Vec<_>>())
    };
    let seq = csv(Exec::Sequential);
    let par = csv(Exec::Parallel);
    let one_thread = rayon_pool(1).install(|| csv(Exec::Parallel));
    let identical = seq == par && par == one_thread;
    check(
        exact && identical,
        format!("1e6-record round trip exact: {exact}; sweep CSV identical across worker counts: {identical}"),
    )
}

fn rayon_pool(n: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap()
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ")
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("MUB correctness", mub_correctness),
        ("separable-bound saturation", separable_saturation),
        ("ideal Pathway II thresholds", pathway_two_thresholds),
        ("MUB-count laddering", laddering),
        ("exact Pathway I witness", exact_witness),
        ("end-to-end Pathway I pipeline", end_to_end),
        ("jitter crosstalk oracle", crosstalk_oracle),
        ("Monte Carlo errors", monte_carlo_errors),
        ("link budget", link_budget),
        ("format and determinism", format_and_determinism),
    ];
    let mut out = std::io::stdout();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        writeln!(out, "{tag} {:>2} {name} ({secs:.1}s): {detail}", i + 1).unwrap();
    }
    writeln!(out, "acceptance: {} passed, {failed} failed", criteria.len() - failed).unwrap();
    if failed > 0 {
        std::process::exit(1);
    }
}
