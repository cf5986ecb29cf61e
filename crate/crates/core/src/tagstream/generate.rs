//! Time-tag stream generation.
//!
//! Routing convention (fixed here, used by the witness reconstruction):
//!
//! * the pair is `rho_P (x) rho_ET` with `rho_P` the Bell state
//!   `(|HH> + |VV>)/sqrt2` (the sign of the physical `|phi->` is absorbed into
//!   the D/A detector labels) and `rho_ET` the isotropic time-bin state;
//! * `H` takes the short interferometer arm, `V` the long arm, which delays the
//!   photon by `f` bins, so detection bins run over `0..d+f`;
//! * HV readout: `H` clicks detector 0, `V` detector 1;
//! * DA readout: detector `x` at detection bin `b` projects onto
//!   `(|H,b> + (-1)^x e^{i phi} |V,b-f>)/sqrt2`, with the Franson phase
//!   `phi = phi_A + phi_B` shared between the sides. `phi = 0` makes the
//!   same-index detector pairs (A0B0, A1B1) interfere constructively.
//!
//! Delayed photons whose detection bin is `>= d` land in the next frame.
//! Randomness is keyed by frame index, so any partition of the frame range
//! over workers produces the same stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use super::config::{Basis, BinningConfig, Channel, ClockConfig, Origin, SourceModel, TagRecord, TagStream};
use super::sift::{CountMatrixSet, DetectorPair};
use crate::par::{map_indexed, Exec};
use crate::qstate::NoisyState;
use crate::{Error, Result, C64};

/// Upper limit on the expected background events per frame per detector.
pub const MAX_EVENTS_PER_FRAME: f64 = 100.0;

const FRAMES_PER_CHUNK: usize = 4096;

/// One detection outcome of a pair, before jitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairOutcome {
    pub alice_detector: usize,
    pub bob_detector: usize,
    /// Detection bins in `0..d+f`.
    pub alice_bin: usize,
    pub bob_bin: usize,
}

impl PairOutcome {
    pub fn detector_pair(&self) -> DetectorPair {
        DetectorPair::from_detectors(self.alice_detector, self.bob_detector)
    }
}

/// Exact joint distribution of pair outcomes for the model's basis.
///
/// Entries with zero probability are omitted. Bins refer to the generation
/// discretization, i.e. the dimension of `model.state`.
pub fn pair_outcome_distribution(
    model: &SourceModel,
    binning: &BinningConfig,
) -> Result<Vec<(PairOutcome, f64)>> {
    let d = binning.d;
    let f = binning.f_shift;
    if model.state.dim() != d {
        return Err(Error::Inconsistent(format!(
            "state dimension {} vs binning d = {d}",
            model.state.dim()
        )));
    }
    let rho = NoisyState::new(model.state.clone(), model.p_mix)?;
    let phase = C64::from_polar(1.0, model.franson_phase);
    let span = d + f;
    let mut out = Vec::new();
    for x in 0..2 {
        for y in 0..2 {
            for a in 0..span {
                for b in 0..span {
                    let p = match model.basis {
                        Basis::HV => hv_probability(&rho, d, f, x, y, a, b),
                        Basis::DA => da_probability(&rho, d, f, phase, x, y, a, b),
                    };
                    if p > 0.0 {
                        out.push((
                            PairOutcome {
                                alice_detector: x,
                                bob_detector: y,
                                alice_bin: a,
                                bob_bin: b,
                            },
                            p,
                        ));
                    }
                }
            }
        }
    }
    Ok(out)
}

fn emission(bin: usize, delayed: bool, d: usize, f: usize) -> Option<usize> {
    let e = if delayed { bin.checked_sub(f)? } else { bin };
    (e < d).then_some(e)
}

fn hv_probability(rho: &NoisyState, d: usize, f: usize, x: usize, y: usize, a: usize, b: usize) -> f64 {
    // rho_P has no HV/VH population.
    if x != y {
        return 0.0;
    }
    match (emission(a, x == 1, d, f), emission(b, y == 1, d, f)) {
        (Some(ea), Some(eb)) => 0.5 * rho.element_unchecked((ea, eb), (ea, eb)).re,
        _ => 0.0,
    }
}

#[allow(clippy::too_many_arguments)]
fn da_probability(
    rho: &NoisyState,
    d: usize,
    f: usize,
    phase: C64,
    x: usize,
    y: usize,
    a: usize,
    b: usize,
) -> f64 {
    let early = emission(a, false, d, f).zip(emission(b, false, d, f));
    let late = emission(a, true, d, f).zip(emission(b, true, d, f));
    let mut p = 0.0;
    if let Some(e) = early {
        p += rho.element_unchecked(e, e).re;
    }
    if let Some(l) = late {
        p += rho.element_unchecked(l, l).re;
    }
    if let (Some(e), Some(l)) = (early, late) {
        let sign = if x == y { 1.0 } else { -1.0 };
        p += 2.0 * sign * (phase * rho.element_unchecked(e, l)).re;
    }
    (p / 8.0).max(0.0)
}

struct OutcomeSampler {
    outcomes: Vec<PairOutcome>,
    cumulative: Vec<f64>,
}

impl OutcomeSampler {
    fn new(dist: Vec<(PairOutcome, f64)>) -> Self {
        let mut acc = 0.0;
        let mut outcomes = Vec::with_capacity(dist.len());
        let mut cumulative = Vec::with_capacity(dist.len());
        for (o, p) in dist {
            acc += p;
            outcomes.push(o);
            cumulative.push(acc);
        }
        Self { outcomes, cumulative }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> PairOutcome {
        let total = *self.cumulative.last().unwrap_or(&1.0);
        let u = rng.random::<f64>() * total;
        let i = self.cumulative.partition_point(|&c| c <= u);
        self.outcomes[i.min(self.outcomes.len() - 1)]
    }
}

/// Generates `n_frames` frames of detector events (default execution policy).
pub fn generate_stream(model: &SourceModel, clock: &ClockConfig, n_frames: u64, seed: u64) -> Result<TagStream> {
    generate_stream_with(model, clock, n_frames, seed, Exec::default())
}

pub fn generate_stream_with(
    model: &SourceModel,
    clock: &ClockConfig,
    n_frames: u64,
    seed: u64,
    exec: Exec,
) -> Result<TagStream> {
    model.validate()?;
    clock.validate()?;
    if n_frames == 0 {
        return Err(Error::param("n_frames", "must be >= 1"));
    }
    let binning = BinningConfig::new(clock, model.state.dim())?;
    let frame_s = clock.frame_seconds();
    let bg_mean = model.background_rate_per_detector * frame_s;
    if bg_mean > MAX_EVENTS_PER_FRAME {
        return Err(Error::Config(format!(
            "{bg_mean:.1} expected background events per frame per detector exceeds {MAX_EVENTS_PER_FRAME}"
        )));
    }
    let pair_prob = -(-model.pair_rate * frame_s).exp_m1();
    let sampler = if pair_prob > 0.0 {
        Some(OutcomeSampler::new(pair_outcome_distribution(model, &binning)?))
    } else {
        None
    };
    let background = if bg_mean > 0.0 {
        Some(Poisson::new(bg_mean).map_err(|e| Error::param("background_rate_per_detector", e.to_string()))?)
    } else {
        None
    };
    let ctx = FrameContext {
        frame_ticks: clock.frame_ticks as f64,
        bin_ticks: binning.bin_ticks as f64,
        sigma: model.jitter_sigma_ticks(clock),
        pair_prob,
        sampler,
        background,
        key: ChaCha8Rng::seed_from_u64(seed).get_seed(),
    };

    let n_chunks = (n_frames as usize).div_ceil(FRAMES_PER_CHUNK);
    let chunks = map_indexed(exec, n_chunks, |c| {
        let start = (c * FRAMES_PER_CHUNK) as u64;
        let end = (start + FRAMES_PER_CHUNK as u64).min(n_frames);
        let mut out = Vec::new();
        for frame in start..end {
            ctx.emit_frame(frame, &mut out);
        }
        out
    });
    let mut records: Vec<TagRecord> = chunks.concat();
    sort_records(&mut records, exec);
    TagStream::new(*clock, records)
}

fn sort_records(records: &mut [TagRecord], exec: Exec) {
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::slice::ParallelSliceMut;
        records.par_sort_unstable_by_key(|r| (r.timestamp, r.channel, r.origin));
        return;
    }
    let _ = exec;
    records.sort_unstable_by_key(|r| (r.timestamp, r.channel, r.origin));
}

struct FrameContext {
    frame_ticks: f64,
    bin_ticks: f64,
    sigma: f64,
    pair_prob: f64,
    sampler: Option<OutcomeSampler>,
    background: Option<Poisson<f64>>,
    key: [u8; 32],
}

impl FrameContext {
    fn emit_frame(&self, frame: u64, out: &mut Vec<TagRecord>) {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(frame);
        let start = frame as f64 * self.frame_ticks;

        if let Some(sampler) = &self.sampler {
            if rng.random::<f64>() < self.pair_prob {
                let o = sampler.sample(&mut rng);
                for (channel, bin) in [
                    (Channel::alice(o.alice_detector), o.alice_bin),
                    (Channel::bob(o.bob_detector), o.bob_bin),
                ] {
                    let mut t = start + (bin as f64 + 0.5) * self.bin_ticks;
                    if self.sigma > 0.0 {
                        let z: f64 = rng.sample(StandardNormal);
                        t += self.sigma * z;
                    }
                    push(out, t, channel, Origin::Signal);
                }
            }
        }

        if let Some(poisson) = &self.background {
            for channel in Channel::ALL {
                let n = poisson.sample(&mut rng) as u64;
                for _ in 0..n {
                    let t = start + rng.random::<f64>() * self.frame_ticks;
                    push(out, t, channel, Origin::Noise);
                }
            }
        }
    }
}

fn push(out: &mut Vec<TagRecord>, t: f64, channel: Channel, origin: Origin) {
    if t >= 0.0 {
        out.push(TagRecord {
            timestamp: t.floor() as u64,
            channel,
            origin,
        });
    }
}

/// Expected kept coincidences for `n_pairs` emitted pairs in the low-rate,
/// jitter-free, background-free limit, as real-valued counts.
///
/// Pairs whose photons both leave the frame are wrapped into the next frame;
/// pairs split across a frame boundary are lost, as frame sifting drops them.
pub fn expected_count_matrices(
    model: &SourceModel,
    binning: &BinningConfig,
    n_pairs: f64,
) -> Result<ExpectedCounts> {
    let d = binning.d;
    let mut m = ExpectedCounts {
        d,
        f: binning.f_shift,
        basis: model.basis,
        matrices: [vec![0.0; d * d], vec![0.0; d * d], vec![0.0; d * d], vec![0.0; d * d]],
    };
    for (o, p) in pair_outcome_distribution(model, binning)? {
        let (a, b) = (o.alice_bin, o.bob_bin);
        let (a, b) = match (a < d, b < d) {
            (true, true) => (a, b),
            (false, false) => (a - d, b - d),
            _ => continue,
        };
        m.matrices[o.detector_pair().index()][a * d + b] += p * n_pairs;
    }
    Ok(m)
}

/// Real-valued count matrices, see [`expected_count_matrices`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedCounts {
    pub d: usize,
    pub f: usize,
    pub basis: Basis,
    /// Row-major `d x d`, indexed by [`DetectorPair::index`].
    pub matrices: [Vec<f64>; 4],
}

impl ExpectedCounts {
    /// Rounds to integer counts; `frames` becomes both `frames_total` and `frames_kept`.
    pub fn rounded(&self) -> CountMatrixSet {
        let mut set = CountMatrixSet::empty(self.d, self.f, self.basis);
        for pair in DetectorPair::ALL {
            for (i, v) in self.matrices[pair.index()].iter().enumerate() {
                set.matrix_mut(pair).data_mut()[i] = v.round() as u64;
            }
        }
        let kept = set.total();
        set.frames_total = kept;
        set.frames_kept = kept;
        set
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::SchmidtState;
    use approx::assert_abs_diff_eq;

    fn model(d: usize, basis: Basis, p: f64) -> SourceModel {
        SourceModel {
            pair_rate: 1e7,
            background_rate_per_detector: 0.0,
            jitter_fwhm_seconds: 0.0,
            p_mix: p,
            basis,
            franson_phase: 0.0,
            state: SchmidtState::max_entangled(d).unwrap(),
        }
    }

    #[test]
    fn distributions_normalized() {
        let clock = ClockConfig::default();
        for d in [10, 40] {
            let binning = BinningConfig::new(&clock, d).unwrap();
            for basis in [Basis::HV, Basis::DA] {
                for p in [0.0, 0.3, 1.0] {
                    let dist = pair_outcome_distribution(&model(d, basis, p), &binning).unwrap();
                    let total: f64 = dist.iter().map(|(_, p)| p).sum();
                    assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn hv_routing_shifts_delayed_detector() {
        let clock = ClockConfig::default();
        let binning = BinningConfig::new(&clock, 10).unwrap();
        let dist = pair_outcome_distribution(&model(10, Basis::HV, 1.0), &binning).unwrap();
        assert_eq!(dist.len(), 20);
        for (o, p) in dist {
            assert_eq!(o.alice_detector, o.bob_detector);
            assert_eq!(o.alice_bin, o.bob_bin);
            if o.alice_detector == 1 {
                assert!(o.alice_bin >= 1);
            } else {
                assert!(o.alice_bin < 10);
            }
            assert_abs_diff_eq!(p, 0.05, epsilon = 1e-15);
        }
    }

    #[test]
    fn da_interference_and_phase_flip() {
        let clock = ClockConfig::default();
        let binning = BinningConfig::new(&clock, 10).unwrap();
        let combo = |phase: f64| {
            let mut m = model(10, Basis::DA, 1.0);
            m.franson_phase = phase;
            pair_outcome_distribution(&m, &binning)
                .unwrap()
                .into_iter()
                .filter(|(o, _)| o.alice_bin == o.bob_bin && (1..10).contains(&o.alice_bin))
                .map(|(o, p)| if o.alice_detector == o.bob_detector { p } else { -p })
                .sum::<f64>()
        };
        assert_abs_diff_eq!(combo(0.0), 0.9, epsilon = 1e-12);
        assert_abs_diff_eq!(combo(std::f64::consts::PI), -0.9, epsilon = 1e-12);
    }

    #[test]
    fn background_guard_and_frames() {
        let clock = ClockConfig::default();
        let mut m = model(10, Basis::HV, 1.0);
        assert!(generate_stream(&m, &clock, 0, 1).is_err());
        m.background_rate_per_detector = 101.0 / clock.frame_seconds();
        assert!(matches!(generate_stream(&m, &clock, 10, 1), Err(Error::Config(_))));
        m.background_rate_per_detector = -1.0;
        assert!(generate_stream(&m, &clock, 10, 1).is_err());
    }

    #[test]
    fn deterministic_across_policies() {
        let clock = ClockConfig::default();
        let mut m = model(20, Basis::DA, 0.8);
        m.jitter_fwhm_seconds = 800e-12;
        m.background_rate_per_detector = 2e6;
        let a = generate_stream_with(&m, &clock, 20_000, 7, Exec::Sequential).unwrap();
        let b = generate_stream_with(&m, &clock, 20_000, 7, Exec::Parallel).unwrap();
        assert_eq!(a, b);
        let c = generate_stream_with(&m, &clock, 20_000, 8, Exec::Parallel).unwrap();
        assert_ne!(a, c);
    }
}
