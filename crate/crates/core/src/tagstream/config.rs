use serde::{Deserialize, Serialize};

use crate::qstate::SchmidtState;
use crate::{Error, Result};

/// Time-tagger clock and frame geometry, in clock ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClockConfig {
    /// Tick length in femtoseconds (82.3 ps = 82 300 fs).
    pub tick_fs: u64,
    /// Frame length `F` in ticks.
    pub frame_ticks: u32,
    /// Franson interferometer imbalance in ticks.
    pub imbalance_ticks: u32,
}

impl Default for ClockConfig {
    fn default() -> Self {
        Self {
            tick_fs: 82_300,
            frame_ticks: 320,
            imbalance_ticks: 32,
        }
    }
}

impl ClockConfig {
    pub fn new(tick_fs: u64, frame_ticks: u32, imbalance_ticks: u32) -> Result<Self> {
        let c = Self {
            tick_fs,
            frame_ticks,
            imbalance_ticks,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tick_fs == 0 || self.frame_ticks == 0 || self.imbalance_ticks == 0 {
            return Err(Error::Config("clock parameters must be positive".into()));
        }
        if !self.frame_ticks.is_multiple_of(self.imbalance_ticks) {
            return Err(Error::Config(format!(
                "frame_ticks {} not divisible by imbalance_ticks {}",
                self.frame_ticks, self.imbalance_ticks
            )));
        }
        Ok(())
    }

    pub fn tick_seconds(&self) -> f64 {
        self.tick_fs as f64 * 1e-15
    }

    pub fn frame_seconds(&self) -> f64 {
        self.frame_ticks as f64 * self.tick_seconds()
    }
}

/// One discretization of the frame into `d` bins with Franson shift `f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinningConfig {
    pub d: usize,
    pub bin_ticks: u32,
    pub f_shift: usize,
}

impl BinningConfig {
    /// Derives `bin_ticks = F/d` and `f = imbalance / bin_ticks`; both must be exact.
    pub fn new(clock: &ClockConfig, d: usize) -> Result<Self> {
        clock.validate()?;
        let frame = clock.frame_ticks as usize;
        if d < 2 || !frame.is_multiple_of(d) {
            return Err(Error::Config(format!(
                "d = {d} does not divide the frame of {frame} ticks"
            )));
        }
        let bin_ticks = (frame / d) as u32;
        if !clock.imbalance_ticks.is_multiple_of(bin_ticks) {
            return Err(Error::Config(format!(
                "d = {d}: bin of {bin_ticks} ticks does not divide the imbalance of {} ticks",
                clock.imbalance_ticks
            )));
        }
        let f_shift = (clock.imbalance_ticks / bin_ticks) as usize;
        if f_shift >= d {
            return Err(Error::Config(format!("d = {d}: shift {f_shift} >= d")));
        }
        Ok(Self {
            d,
            bin_ticks,
            f_shift,
        })
    }

    /// All valid discretizations `d = f F / imbalance` for the clock.
    pub fn all_for(clock: &ClockConfig) -> Vec<Self> {
        (2..=clock.frame_ticks as usize)
            .filter_map(|d| Self::new(clock, d).ok())
            .collect()
    }

    pub fn bin_of(&self, timestamp: u64, frame_ticks: u32) -> usize {
        ((timestamp % frame_ticks as u64) / self.bin_ticks as u64) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Channel {
    A0 = 0,
    A1 = 1,
    B0 = 2,
    B1 = 3,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::A0, Channel::A1, Channel::B0, Channel::B1];

    pub fn from_u8(v: u8) -> Option<Self> {
        Self::ALL.get(v as usize).copied()
    }

    pub fn is_alice(self) -> bool {
        matches!(self, Channel::A0 | Channel::A1)
    }

    /// Detector index within its side (0 or 1).
    pub fn detector(self) -> usize {
        match self {
            Channel::A0 | Channel::B0 => 0,
            Channel::A1 | Channel::B1 => 1,
        }
    }

    pub fn alice(detector: usize) -> Self {
        if detector == 0 {
            Channel::A0
        } else {
            Channel::A1
        }
    }

    pub fn bob(detector: usize) -> Self {
        if detector == 0 {
            Channel::B0
        } else {
            Channel::B1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Origin {
    Signal = 0,
    Noise = 1,
    Unknown = 2,
}

impl Origin {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Origin::Signal),
            1 => Some(Origin::Noise),
            2 => Some(Origin::Unknown),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TagRecord {
    pub timestamp: u64,
    pub channel: Channel,
    pub origin: Origin,
}

impl TagRecord {
    fn key(&self) -> (u64, Channel, Origin) {
        (self.timestamp, self.channel, self.origin)
    }
}

/// Time-ordered detector events sharing one clock.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagStream {
    clock: ClockConfig,
    records: Vec<TagRecord>,
}

impl TagStream {
    /// Wraps already-sorted records; fails on the first out-of-order pair.
    pub fn new(clock: ClockConfig, records: Vec<TagRecord>) -> Result<Self> {
        clock.validate()?;
        if let Some(i) = records.windows(2).position(|w| w[1].key() < w[0].key()) {
            return Err(Error::Inconsistent(format!(
                "records not sorted at index {}",
                i + 1
            )));
        }
        Ok(Self { clock, records })
    }

    /// Sorts by `(timestamp, channel, origin)` first.
    pub fn from_unsorted(clock: ClockConfig, mut records: Vec<TagRecord>) -> Result<Self> {
        clock.validate()?;
        records.sort_unstable_by_key(TagRecord::key);
        Ok(Self { clock, records })
    }

    pub fn clock(&self) -> &ClockConfig {
        &self.clock
    }

    pub fn records(&self) -> &[TagRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Number of frames spanned, counting from frame 0.
    pub fn frames_spanned(&self) -> u64 {
        self.records
            .last()
            .map_or(0, |r| r.timestamp / self.clock.frame_ticks as u64 + 1)
    }

    pub fn count(&self, channel: Channel) -> usize {
        self.records.iter().filter(|r| r.channel == channel).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    /// Computational (arrival-time) basis: rectilinear polarization readout.
    HV,
    /// Franson basis: diagonal polarization readout erasing the path.
    DA,
}

impl std::fmt::Display for Basis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Basis::HV => "HV",
            Basis::DA => "DA",
        })
    }
}

/// Photon-pair source, detectors and background light.
///
/// `state` is the time-bin state over the generation discretization; its
/// dimension fixes the bin grid the pair emission is drawn on.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceModel {
    /// Pair emission rate, pairs/s.
    pub pair_rate: f64,
    /// Background counts/s on each of the four detectors.
    pub background_rate_per_detector: f64,
    /// Detector timing jitter, FWHM in seconds.
    pub jitter_fwhm_seconds: f64,
    /// Isotropic mixing weight of the time-bin state.
    pub p_mix: f64,
    pub basis: Basis,
    /// Sum of the two interferometer phases.
    pub franson_phase: f64,
    pub state: SchmidtState,
}

/// FWHM / sigma for a Gaussian.
pub const FWHM_PER_SIGMA: f64 = 2.3548;

impl SourceModel {
    /// Default detector jitter (800 ps FWHM) and an ideal `|Phi+>` over `d` bins.
    pub fn ideal(d: usize, basis: Basis) -> Result<Self> {
        Ok(Self {
            pair_rate: 0.0,
            background_rate_per_detector: 0.0,
            jitter_fwhm_seconds: 800e-12,
            p_mix: 1.0,
            basis,
            franson_phase: 0.0,
            state: SchmidtState::max_entangled(d)?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("pair_rate", self.pair_rate),
            ("background_rate_per_detector", self.background_rate_per_detector),
            ("jitter_fwhm_seconds", self.jitter_fwhm_seconds),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("{v} must be finite and >= 0")));
            }
        }
        if !(0.0..=1.0).contains(&self.p_mix) {
            return Err(Error::param("p_mix", format!("{} not in [0, 1]", self.p_mix)));
        }
        if !self.franson_phase.is_finite() {
            return Err(Error::param("franson_phase", "must be finite"));
        }
        Ok(())
    }

    pub fn jitter_sigma_ticks(&self, clock: &ClockConfig) -> f64 {
        self.jitter_fwhm_seconds / FWHM_PER_SIGMA / clock.tick_seconds()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_one_discretizations() {
        let clock = ClockConfig::default();
        let got: Vec<(usize, u32, usize)> = BinningConfig::all_for(&clock)
            .into_iter()
            .map(|b| (b.d, b.bin_ticks, b.f_shift))
            .collect();
        assert_eq!(
            got,
            vec![(10, 32, 1), (20, 16, 2), (40, 8, 4), (80, 4, 8), (160, 2, 16), (320, 1, 32)]
        );
        // the four analysed in practice
        for (d, t, f) in [(10, 32, 1), (20, 16, 2), (40, 8, 4), (80, 4, 8)] {
            let b = BinningConfig::new(&clock, d).unwrap();
            assert_eq!((b.bin_ticks, b.f_shift), (t, f));
            assert_eq!(b.d as u32 * b.bin_ticks, clock.frame_ticks);
            assert_eq!(b.f_shift as u32 * b.bin_ticks, clock.imbalance_ticks);
        }
        assert!(BinningConfig::new(&clock, 30).is_err());
        assert!(BinningConfig::new(&clock, 64).is_err());
    }

    #[test]
    fn clock_defaults() {
        let c = ClockConfig::default();
        assert!((c.tick_seconds() - 82.3e-12).abs() < 1e-24);
        assert!(ClockConfig::new(1, 320, 30).is_err());
        // 8 ticks is the 658.4 ps bin
        assert!((8.0 * c.tick_seconds() - 658.4e-12).abs() < 1e-20);
    }

    #[test]
    fn stream_must_be_sorted() {
        let clock = ClockConfig::default();
        let r = |t, c| TagRecord {
            timestamp: t,
            channel: c,
            origin: Origin::Unknown,
        };
        assert!(TagStream::new(clock, vec![r(5, Channel::B0), r(5, Channel::A0)]).is_err());
        let s = TagStream::from_unsorted(clock, vec![r(5, Channel::B0), r(5, Channel::A0)]).unwrap();
        assert_eq!(s.records()[0].channel, Channel::A0);
        assert_eq!(s.frames_spanned(), 1);
    }
}
