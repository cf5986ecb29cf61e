//! Discretized bipartite states and the isotropic (white) noise channel.
//!
//! A [`SchmidtState`] is a pure state `sum_j c_j |j, pi(j)>` where `pi` is the
//! identity (time-bin style `|jj>`) or the index reversal (OAM style
//! `|-l, l>` after relabelling `l in -D..=D` to `0..2D+1`). A [`NoisyState`]
//! mixes it with the maximally mixed state,
//! `rho = p |psi><psi| + (1 - p)/d^2 * 1`.
//!
//! Everything downstream uses these as the exact probability oracle.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Largest local dimension [`NoisyState::materialize`] accepts (d^4 entries).
pub const MAX_MATERIALIZE_DIM: usize = 32;

const NORM_TOL: f64 = 1e-12;
const PROJECTOR_NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pairing {
    /// `|j>_A |j>_B`
    Correlated,
    /// `|j>_A |d-1-j>_B`
    Anticorrelated,
}

/// Pure bipartite state given by its Schmidt coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtState {
    coefficients: Vec<C64>,
    pairing: Pairing,
}

impl SchmidtState {
    pub fn new(coefficients: Vec<C64>, pairing: Pairing) -> Result<Self> {
        let dim = coefficients.len();
        if dim < 2 {
            return Err(Error::InvalidDimension {
                dim,
                reason: "need at least two modes",
            });
        }
        let norm_sqr: f64 = coefficients.iter().map(|c| c.norm_sqr()).sum();
        if (norm_sqr - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm_sqr });
        }
        Ok(Self {
            coefficients,
            pairing,
        })
    }

    /// Normalizes arbitrary non-zero amplitudes before construction.
    pub fn normalized(mut coefficients: Vec<C64>, pairing: Pairing) -> Result<Self> {
        let norm = coefficients.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized { norm_sqr: norm * norm });
        }
        for c in &mut coefficients {
            *c /= norm;
        }
        Self::new(coefficients, pairing)
    }

    /// `|Phi+> = d^{-1/2} sum_j |jj>`.
    pub fn max_entangled(dim: usize) -> Result<Self> {
        Self::uniform(dim, Pairing::Correlated)
    }

    /// Uniform Schmidt spectrum with the given pairing.
    pub fn uniform(dim: usize, pairing: Pairing) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension {
                dim,
                reason: "need at least two modes",
            });
        }
        let c = C64::new(1.0 / (dim as f64).sqrt(), 0.0);
        Self::new(vec![c; dim], pairing)
    }

    /// Single product term `|k, pi(k)>`.
    pub fn product(dim: usize, k: usize, pairing: Pairing) -> Result<Self> {
        if k >= dim {
            return Err(Error::IndexOutOfRange { index: k, dim });
        }
        let mut coefficients = vec![C64::new(0.0, 0.0); dim];
        coefficients[k] = C64::new(1.0, 0.0);
        Self::new(coefficients, pairing)
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &[C64] {
        &self.coefficients
    }

    pub fn pairing(&self) -> Pairing {
        self.pairing
    }

    /// Bob's mode paired with Alice's mode `j`.
    #[inline]
    pub fn partner(&self, j: usize) -> usize {
        match self.pairing {
            Pairing::Correlated => j,
            Pairing::Anticorrelated => self.dim() - 1 - j,
        }
    }

    /// `<a, b | psi>`.
    #[inline]
    pub fn amplitude(&self, a: usize, b: usize) -> C64 {
        if self.partner(a) == b {
            self.coefficients[a]
        } else {
            C64::new(0.0, 0.0)
        }
    }

    /// `<alpha (x) beta | psi>` for local vectors `alpha`, `beta`.
    pub fn overlap(&self, alice: &[C64], bob: &[C64]) -> C64 {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(j, c)| alice[j].conj() * bob[self.partner(j)].conj() * c)
            .sum()
    }
}

/// Isotropic mixture `p |psi><psi| + (1-p)/d^2 * 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyState {
    pure: SchmidtState,
    p: f64,
}

impl NoisyState {
    pub fn new(pure: SchmidtState, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::param("p", format!("{p} not in [0, 1]")));
        }
        Ok(Self { pure, p })
    }

    /// Isotropic state around `|Phi+>`.
    pub fn isotropic(dim: usize, p: f64) -> Result<Self> {
        Self::new(SchmidtState::max_entangled(dim)?, p)
    }

    pub fn pure(&self) -> &SchmidtState {
        &self.pure
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.pure.dim()
    }

    pub fn with_p(&self, p: f64) -> Result<Self> {
        Self::new(self.pure.clone(), p)
    }

    fn white(&self) -> f64 {
        let d = self.dim() as f64;
        (1.0 - self.p) / (d * d)
    }

    /// `<bra| rho |ket>` with `bra = (a, b)`, `ket = (c, e)`, without materializing.
    pub fn element(&self, bra: (usize, usize), ket: (usize, usize)) -> Result<C64> {
        let d = self.dim();
        for index in [bra.0, bra.1, ket.0, ket.1] {
            if index >= d {
                return Err(Error::IndexOutOfRange { index, dim: d });
            }
        }
        Ok(self.element_unchecked(bra, ket))
    }

    #[inline]
    pub(crate) fn element_unchecked(&self, bra: (usize, usize), ket: (usize, usize)) -> C64 {
        let coherent = self.pure.amplitude(bra.0, bra.1) * self.pure.amplitude(ket.0, ket.1).conj();
        let diag = if bra == ket { self.white() } else { 0.0 };
        coherent * self.p + diag
    }

    /// `Tr[rho (|a><a| (x) |b><b|)]` for unit vectors `a`, `b`.
    pub fn joint_probability(&self, alice: &[C64], bob: &[C64]) -> Result<f64> {
        let d = self.dim();
        for v in [alice, bob] {
            if v.len() != d {
                return Err(Error::Inconsistent(format!(
                    "projector length {} does not match dimension {d}",
                    v.len()
                )));
            }
            let norm_sqr: f64 = v.iter().map(|c| c.norm_sqr()).sum();
            if (norm_sqr - 1.0).abs() > PROJECTOR_NORM_TOL {
                return Err(Error::NotNormalized { norm_sqr });
            }
        }
        Ok(self.joint_probability_unchecked(alice, bob))
    }

    #[inline]
    pub(crate) fn joint_probability_unchecked(&self, alice: &[C64], bob: &[C64]) -> f64 {
        self.p * self.pure.overlap(alice, bob).norm_sqr() + self.white()
    }

    /// Dense `d^2 x d^2` density matrix in the `|a b>` = `a*d + b` ordering.
    pub fn materialize(&self) -> Result<DensityMatrix> {
        let d = self.dim();
        if d > MAX_MATERIALIZE_DIM {
            return Err(Error::Capacity {
                dim: d,
                max: MAX_MATERIALIZE_DIM,
            });
        }
        let n = d * d;
        let psi: Vec<C64> = (0..n).map(|k| self.pure.amplitude(k / d, k % d)).collect();
        let white = self.white();
        let matrix = DMatrix::from_fn(n, n, |r, c| {
            let mut v = psi[r] * psi[c].conj() * self.p;
            if r == c {
                v += white;
            }
            v
        });
        Ok(DensityMatrix { dim: d, matrix })
    }
}

/// Materialized bipartite density matrix on `C^d (x) C^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn get(&self, bra: (usize, usize), ket: (usize, usize)) -> C64 {
        self.matrix[(bra.0 * self.dim + bra.1, ket.0 * self.dim + ket.1)]
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let n = self.matrix.nrows();
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self.matrix[(r, c)] - self.matrix[(c, r)].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks hermiticity, unit trace (both 1e-12) and eigenvalues >= -1e-10.
    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > 1e-12 {
            return Err(Error::Invariant(format!("not Hermitian: {herm:e}")));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > 1e-12 || tr.im.abs() > 1e-12 {
            return Err(Error::Invariant(format!("trace {tr} != 1")));
        }
        let min = self.min_eigenvalue();
        if min < -1e-10 {
            return Err(Error::Invariant(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// Reduced state of Alice, `Tr_B rho`.
    pub fn partial_trace_b(&self) -> DMatrix<C64> {
        let d = self.dim;
        DMatrix::from_fn(d, d, |a, c| (0..d).map(|b| self.get((a, b), (c, b))).sum())
    }

    /// `Tr[rho (|a><a| (x) |b><b|)]` by explicit contraction.
    pub fn expectation_product(&self, alice: &[C64], bob: &[C64]) -> f64 {
        let d = self.dim;
        let v: Vec<C64> = (0..d * d).map(|k| alice[k / d] * bob[k % d]).collect();
        let mut acc = C64::new(0.0, 0.0);
        for r in 0..d * d {
            if v[r] == C64::new(0.0, 0.0) {
                continue;
            }
            for c in 0..d * d {
                acc += v[r].conj() * self.matrix[(r, c)] * v[c];
            }
        }
        acc.re
    }
}
