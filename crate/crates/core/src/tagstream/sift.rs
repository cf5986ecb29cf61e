//! Frame sifting and count-matrix accumulation.

use std::fmt::Write as _;
use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use super::config::{Basis, BinningConfig, Origin, TagRecord, TagStream};
use crate::par::{map_slice, Exec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DetectorPair {
    A0B0,
    A0B1,
    A1B0,
    A1B1,
}

impl DetectorPair {
    pub const ALL: [DetectorPair; 4] = [
        DetectorPair::A0B0,
        DetectorPair::A0B1,
        DetectorPair::A1B0,
        DetectorPair::A1B1,
    ];

    pub fn from_detectors(alice: usize, bob: usize) -> Self {
        Self::ALL[2 * alice + bob]
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn alice(self) -> usize {
        self.index() / 2
    }

    pub fn bob(self) -> usize {
        self.index() % 2
    }

    /// `+1` for same-index detector pairs, `-1` otherwise.
    pub fn parity(self) -> f64 {
        if self.alice() == self.bob() {
            1.0
        } else {
            -1.0
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DetectorPair::A0B0 => "A0B0",
            DetectorPair::A0B1 => "A0B1",
            DetectorPair::A1B0 => "A1B0",
            DetectorPair::A1B1 => "A1B1",
        }
    }
}

/// `d x d` histogram, row = Alice bin, column = Bob bin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountMatrix {
    d: usize,
    data: Vec<u64>,
}

impl CountMatrix {
    pub fn zeros(d: usize) -> Self {
        Self {
            d,
            data: vec![0; d * d],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Inconsistent("count matrix is not square".into()));
        }
        Ok(Self {
            d,
            data: rows.concat(),
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> u64 {
        self.data[a * self.d + b]
    }

    /// Bounds-tolerant access: zero outside the matrix.
    #[inline]
    pub fn get_or_zero(&self, a: usize, b: usize) -> u64 {
        if a < self.d && b < self.d {
            self.get(a, b)
        } else {
            0
        }
    }

    #[inline]
    pub fn increment(&mut self, a: usize, b: usize) {
        self.data[a * self.d + b] += 1;
    }

    pub fn data(&self) -> &[u64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u64] {
        &mut self.data
    }

    pub fn total(&self) -> u64 {
        self.data.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.d).map(|i| self.get(i, i)).sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.data.chunks(self.d).map(<[u64]>::to_vec).collect()
    }
}

impl AddAssign<&CountMatrix> for CountMatrix {
    fn add_assign(&mut self, rhs: &CountMatrix) {
        assert_eq!(self.d, rhs.d, "count matrix dimension mismatch");
        for (x, y) in self.data.iter_mut().zip(&rhs.data) {
            *x += y;
        }
    }
}

/// The four detector-pair histograms of one basis at one discretization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountMatrixSet {
    pub d: usize,
    pub f: usize,
    pub basis: Basis,
    /// Indexed by [`DetectorPair::index`].
    pub matrices: [CountMatrix; 4],
    pub frames_total: u64,
    pub frames_kept: u64,
    /// Kept coincidences with at least one noise-labelled event.
    pub kept_with_noise: u64,
    /// Kept coincidences with at least one event of unknown origin.
    pub kept_with_unknown: u64,
}

impl CountMatrixSet {
    pub fn empty(d: usize, f: usize, basis: Basis) -> Self {
        Self {
            d,
            f,
            basis,
            matrices: std::array::from_fn(|_| CountMatrix::zeros(d)),
            frames_total: 0,
            frames_kept: 0,
            kept_with_noise: 0,
            kept_with_unknown: 0,
        }
    }

    pub fn matrix(&self, pair: DetectorPair) -> &CountMatrix {
        &self.matrices[pair.index()]
    }

    pub fn matrix_mut(&mut self, pair: DetectorPair) -> &mut CountMatrix {
        &mut self.matrices[pair.index()]
    }

    pub fn total(&self) -> u64 {
        self.matrices.iter().map(CountMatrix::total).sum()
    }

    /// Entrywise sum of two sets from the same discretization and basis.
    pub fn merge(mut self, other: &CountMatrixSet) -> Result<Self> {
        if (self.d, self.f, self.basis) != (other.d, other.f, other.basis) {
            return Err(Error::Inconsistent(format!(
                "cannot merge d={},f={},{} with d={},f={},{}",
                self.d, self.f, self.basis, other.d, other.f, other.basis
            )));
        }
        for (m, o) in self.matrices.iter_mut().zip(&other.matrices) {
            *m += o;
        }
        self.frames_total += other.frames_total;
        self.frames_kept += other.frames_kept;
        self.kept_with_noise += other.kept_with_noise;
        self.kept_with_unknown += other.kept_with_unknown;
        Ok(self)
    }

    /// Same counters with new matrices, e.g. a Poisson replicate.
    pub fn with_matrices(&self, matrices: [CountMatrix; 4]) -> Self {
        Self {
            matrices,
            ..self.clone()
        }
    }

    /// One CSV document per detector pair.
    pub fn to_csv(&self, pair: DetectorPair) -> String {
        let m = self.matrix(pair);
        let mut out = format!(
            "# hdent-counts v1 d={} f={} basis={} pair={}\n",
            self.d,
            self.f,
            self.basis,
            pair.name()
        );
        for row in m.data().chunks(self.d) {
            let line: Vec<String> = row.iter().map(u64::to_string).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }
}

const RECORDS_PER_CHUNK: usize = 1 << 16;

/// Keeps frames with exactly one Alice and one Bob event and histograms them.
pub fn sift_and_bin(stream: &TagStream, binning: &BinningConfig, basis: Basis) -> Result<CountMatrixSet> {
    sift_and_bin_with(stream, binning, basis, Exec::default())
}

pub fn sift_and_bin_with(
    stream: &TagStream,
    binning: &BinningConfig,
    basis: Basis,
    exec: Exec,
) -> Result<CountMatrixSet> {
    let clock = stream.clock();
    if binning.d as u64 * binning.bin_ticks as u64 != clock.frame_ticks as u64
        || binning.f_shift as u64 * binning.bin_ticks as u64 != clock.imbalance_ticks as u64
    {
        return Err(Error::Inconsistent(format!(
            "binning {binning:?} inconsistent with clock {clock:?}"
        )));
    }
    let frame_ticks = clock.frame_ticks as u64;
    let records = stream.records();

    // Chunk boundaries are moved forward to the next frame start so that no
    // frame is split between workers.
    let mut bounds = vec![0usize];
    let mut pos = RECORDS_PER_CHUNK;
    while pos < records.len() {
        let frame = records[pos].timestamp / frame_ticks;
        let cut = pos + records[pos..].partition_point(|r| r.timestamp / frame_ticks == frame);
        if cut >= records.len() {
            break;
        }
        bounds.push(cut);
        pos = cut + RECORDS_PER_CHUNK;
    }
    bounds.push(records.len());
    let ranges: Vec<(usize, usize)> = bounds.windows(2).map(|w| (w[0], w[1])).collect();

    let parts = map_slice(exec, &ranges, |&(lo, hi)| {
        sift_slice(&records[lo..hi], binning, basis, frame_ticks)
    });
    let mut set = CountMatrixSet::empty(binning.d, binning.f_shift, basis);
    for part in parts {
        set = set.merge(&part?)?;
    }
    set.frames_total = stream.frames_spanned();
    Ok(set)
}

fn sift_slice(records: &[TagRecord], binning: &BinningConfig, basis: Basis, frame_ticks: u64) -> Result<CountMatrixSet> {
    let mut set = CountMatrixSet::empty(binning.d, binning.f_shift, basis);
    let mut i = 0;
    while i < records.len() {
        let frame = records[i].timestamp / frame_ticks;
        let mut j = i;
        let (mut alice, mut bob) = (None, None);
        let (mut n_alice, mut n_bob) = (0u32, 0u32);
        while j < records.len() && records[j].timestamp / frame_ticks == frame {
            let r = &records[j];
            if r.channel.is_alice() {
                n_alice += 1;
                alice = Some(r);
            } else {
                n_bob += 1;
                bob = Some(r);
            }
            j += 1;
        }
        if let (1, 1, Some(a), Some(b)) = (n_alice, n_bob, alice, bob) {
            let a_bin = binning.bin_of(a.timestamp, frame_ticks as u32);
            let b_bin = binning.bin_of(b.timestamp, frame_ticks as u32);
            if a_bin >= binning.d || b_bin >= binning.d {
                return Err(Error::Invariant(format!(
                    "bin ({a_bin}, {b_bin}) outside d = {}",
                    binning.d
                )));
            }
            let pair = DetectorPair::from_detectors(a.channel.detector(), b.channel.detector());
            set.matrix_mut(pair).increment(a_bin, b_bin);
            set.frames_kept += 1;
            if a.origin == Origin::Noise || b.origin == Origin::Noise {
                set.kept_with_noise += 1;
            }
            if a.origin == Origin::Unknown || b.origin == Origin::Unknown {
                set.kept_with_unknown += 1;
            }
        }
        i = j;
    }
    Ok(set)
}

/// Normalized distribution of `|a - b|` over the same-index detector pairs
/// (A0B0 and A1B1); entry `k` is the mass at offset `k`.
pub fn crosstalk_profile(set: &CountMatrixSet) -> Result<Vec<f64>> {
    let d = set.d;
    let mut hist = vec![0u64; d];
    for pair in [DetectorPair::A0B0, DetectorPair::A1B1] {
        let m = set.matrix(pair);
        for a in 0..d {
            for b in 0..d {
                hist[a.abs_diff(b)] += m.get(a, b);
            }
        }
    }
    let total: u64 = hist.iter().sum();
    if set.frames_kept == 0 || total == 0 {
        return Err(Error::Empty("no coincidences in correlated detector pairs"));
    }
    Ok(hist.into_iter().map(|c| c as f64 / total as f64).collect())
}
