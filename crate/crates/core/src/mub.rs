//! Complete sets of mutually unbiased bases (MUBs) in prime dimension and the
//! visibility-sum separability test.
//!
//! Basis `0` is the computational basis. For `alpha >= 1` and odd prime `d`,
//!
//! ```text
//! |psi_m^(alpha)> = d^{-1/2} sum_j (w^m)^(d-j) (w^-(alpha-1))^(s_j) |j>,
//! w = exp(2 pi i / d),  s_j = j + (j+1) + ... + (d-1).
//! ```
//!
//! For `d = 2` the quadratic phase degenerates (`s_0 = s_1`), so the third
//! basis is the usual `(|0> +- i|1>)/sqrt2`.
//!
//! Bob measures the complex conjugate of each MUB vector (index-reversed for
//! anticorrelated states). Under this convention `|Phi+>` is perfectly
//! correlated in every basis, and the conjugated family is again a complete
//! MUB set, so the separable bound `1 + (k-1)/d` is unchanged.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::par::{map_slice, Exec};
use crate::qstate::{NoisyState, Pairing, SchmidtState};
use crate::{Error, Result, C64};

pub fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n.is_multiple_of(2) {
        return false;
    }
    let mut k = 3;
    while k * k <= n {
        if n.is_multiple_of(k) {
            return false;
        }
        k += 2;
    }
    true
}

/// `d + 1` mutually unbiased bases of `C^d`, `bases[alpha][m][j]`.
#[derive(Debug, Clone)]
pub struct MubSet {
    dim: usize,
    bases: Vec<Vec<Vec<C64>>>,
}

/// Builds the complete MUB set for prime `d`.
pub fn build_mubs(d: usize) -> Result<MubSet> {
    if !is_prime(d) {
        return Err(Error::UnsupportedDimension { dim: d });
    }
    let norm = 1.0 / (d as f64).sqrt();
    let root = |e: usize| {
        let theta = 2.0 * PI * (e % d) as f64 / d as f64;
        C64::new(theta.cos(), theta.sin()) * norm
    };

    let mut bases = Vec::with_capacity(d + 1);
    bases.push(
        (0..d)
            .map(|m| {
                (0..d)
                    .map(|j| C64::new(if j == m { 1.0 } else { 0.0 }, 0.0))
                    .collect()
            })
            .collect(),
    );

    if d == 2 {
        let i = C64::new(0.0, 1.0);
        for alpha in 1..=2usize {
            let phase = if alpha == 1 { C64::new(1.0, 0.0) } else { i };
            bases.push(
                (0..2)
                    .map(|m| {
                        let sign = if m == 0 { 1.0 } else { -1.0 };
                        vec![C64::new(norm, 0.0), phase * sign * norm]
                    })
                    .collect(),
            );
        }
        return Ok(MubSet { dim: d, bases });
    }

    // s_j mod d; exponents are kept in integer arithmetic.
    let s: Vec<usize> = (0..d).map(|j| (j..d).sum::<usize>() % d).collect();
    for alpha in 1..=d {
        let basis = (0..d)
            .map(|m| {
                (0..d)
                    .map(|j| {
                        let pos = m * (d - j) % d;
                        let neg = (alpha - 1) * s[j] % d;
                        root(pos + d - neg)
                    })
                    .collect()
            })
            .collect();
        bases.push(basis);
    }
    Ok(MubSet { dim: d, bases })
}

impl MubSet {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_bases(&self) -> usize {
        self.bases.len()
    }

    pub fn vector(&self, alpha: usize, m: usize) -> &[C64] {
        &self.bases[alpha][m]
    }

    pub fn basis(&self, alpha: usize) -> &[Vec<C64>] {
        &self.bases[alpha]
    }

    /// Bob's projector paired with Alice's `|psi_n^(beta)>`.
    pub fn bob_vector(&self, beta: usize, n: usize, pairing: Pairing) -> Vec<C64> {
        let v = &self.bases[beta][n];
        let d = self.dim;
        match pairing {
            Pairing::Correlated => v.iter().map(|c| c.conj()).collect(),
            Pairing::Anticorrelated => (0..d).map(|k| v[d - 1 - k].conj()).collect(),
        }
    }

    /// Largest deviation from `|<psi_m^a|psi_n^b>|^2 = delta_ab delta_mn + (1 - delta_ab)/d`.
    pub fn max_condition_error(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for a in 0..self.n_bases() {
            for b in a..self.n_bases() {
                for m in 0..d {
                    for n in 0..d {
                        let ip: C64 = self.bases[a][m]
                            .iter()
                            .zip(&self.bases[b][n])
                            .map(|(x, y)| x.conj() * y)
                            .sum();
                        let expect = if a == b {
                            if m == n {
                                1.0
                            } else {
                                0.0
                            }
                        } else {
                            1.0 / d as f64
                        };
                        worst = worst.max((ip.norm_sqr() - expect).abs());
                    }
                }
            }
        }
        worst
    }
}

/// Joint outcome probabilities `P^(alpha,beta)(m, n)`; row = Alice, column = Bob.
pub fn correlation_matrix(
    state: &NoisyState,
    mubs: &MubSet,
    alpha: usize,
    beta: usize,
) -> Result<DMatrix<f64>> {
    let d = mubs.dim();
    if state.dim() != d {
        return Err(Error::Inconsistent(format!(
            "state dimension {} vs MUB dimension {d}",
            state.dim()
        )));
    }
    for index in [alpha, beta] {
        if index > d {
            return Err(Error::IndexOutOfRange { index, dim: d + 1 });
        }
    }
    let pairing = state.pure().pairing();
    let bob: Vec<Vec<C64>> = (0..d).map(|n| mubs.bob_vector(beta, n, pairing)).collect();
    Ok(DMatrix::from_fn(d, d, |m, n| {
        state.joint_probability_unchecked(mubs.vector(alpha, m), &bob[n])
    }))
}

/// `V = sum_i P(i, i)`.
pub fn visibility(matrix: &DMatrix<f64>) -> f64 {
    matrix.diagonal().sum()
}

/// Margins within this of the bound count as saturating it, not exceeding it.
pub const CERT_TOL: f64 = 1e-10;

/// `1 + (k - 1)/d`.
pub fn separable_bound(d: usize, k: usize) -> f64 {
    1.0 + (k as f64 - 1.0) / d as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityReport {
    pub dim: usize,
    pub k: usize,
    pub bases: Vec<usize>,
    pub per_basis_visibility: Vec<f64>,
    pub visibility_sum: f64,
    pub separable_bound: f64,
    pub certified: bool,
}

impl VisibilityReport {
    fn from_visibilities(dim: usize, bases: Vec<usize>, per_basis_visibility: Vec<f64>) -> Self {
        let k = bases.len();
        let visibility_sum: f64 = per_basis_visibility.iter().sum();
        let separable_bound = separable_bound(dim, k);
        Self {
            dim,
            k,
            bases,
            per_basis_visibility,
            visibility_sum,
            separable_bound,
            certified: visibility_sum > separable_bound + CERT_TOL,
        }
    }

    /// `visibility_sum - separable_bound`; positive means certified.
    pub fn margin(&self) -> f64 {
        self.visibility_sum - self.separable_bound
    }
}

/// Visibility sum over the first `k` matched bases `(j, j)`, `j < k`.
pub fn visibility_sum(state: &NoisyState, mubs: &MubSet, k: usize) -> Result<VisibilityReport> {
    let d = mubs.dim();
    if !(2..=d + 1).contains(&k) {
        return Err(Error::param("k", format!("{k} not in [2, {}]", d + 1)));
    }
    visibility_sum_over(state, mubs, &(0..k).collect::<Vec<_>>())
}

/// Visibility sum over an explicit list of distinct matched bases.
pub fn visibility_sum_over(
    state: &NoisyState,
    mubs: &MubSet,
    bases: &[usize],
) -> Result<VisibilityReport> {
    let d = mubs.dim();
    if bases.len() < 2 || bases.len() > d + 1 {
        return Err(Error::param("k", format!("{} bases, need 2..={}", bases.len(), d + 1)));
    }
    let mut seen = vec![false; d + 1];
    for &b in bases {
        if b > d {
            return Err(Error::IndexOutOfRange { index: b, dim: d + 1 });
        }
        if std::mem::replace(&mut seen[b], true) {
            return Err(Error::param("bases", format!("basis {b} repeated")));
        }
    }
    let per = bases
        .iter()
        .map(|&j| correlation_matrix(state, mubs, j, j).map(|m| visibility(&m)))
        .collect::<Result<Vec<_>>>()?;
    Ok(VisibilityReport::from_visibilities(d, bases.to_vec(), per))
}

/// Visibility reports for many states, evaluated under `exec`.
pub fn visibility_sweep(
    states: &[NoisyState],
    mubs: &MubSet,
    k: usize,
    exec: Exec,
) -> Result<Vec<VisibilityReport>> {
    map_slice(exec, states, |s| visibility_sum(s, mubs, k))
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MubThreshold {
    /// Certification holds for `p > p_star`.
    Found(f64),
    /// No sign change of the margin on `[0, 1]`.
    NoThreshold { certified_everywhere: bool },
}

/// Bisection root in `p` of `visibility_sum - bound` along `p -> (family, p)`.
pub fn mub_noise_threshold(mubs: &MubSet, k: usize, family: &SchmidtState) -> Result<MubThreshold> {
    let margin = |p: f64| -> Result<f64> {
        let state = NoisyState::new(family.clone(), p)?;
        Ok(visibility_sum(&state, mubs, k)?.margin())
    };

    // Monotonicity check on a coarse grid.
    let grid: Vec<f64> = (0..=20)
        .map(|i| margin(i as f64 / 20.0))
        .collect::<Result<_>>()?;
    if grid.windows(2).any(|w| w[1] < w[0] - 1e-12) {
        return Err(Error::Inconsistent(
            "visibility margin is not monotone in p".into(),
        ));
    }
    let (lo_val, hi_val) = (grid[0], grid[20]);
    if lo_val > CERT_TOL || hi_val <= CERT_TOL {
        return Ok(MubThreshold::NoThreshold {
            certified_everywhere: lo_val > CERT_TOL,
        });
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if margin(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(MubThreshold::Found(0.5 * (lo + hi)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationExport {
    pub dim: usize,
    pub alpha: usize,
    pub beta: usize,
    /// `matrix[m][n]`, Alice index `m`, Bob index `n`.
    pub matrix: Vec<Vec<f64>>,
}

impl CorrelationExport {
    pub fn new(alpha: usize, beta: usize, matrix: &DMatrix<f64>) -> Self {
        Self {
            dim: matrix.nrows(),
            alpha,
            beta,
            matrix: (0..matrix.nrows())
                .map(|m| (0..matrix.ncols()).map(|n| matrix[(m, n)]).collect())
                .collect(),
        }
    }

    /// Header line followed by one row per Alice index.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "# hdent-correlation v1 d={} alpha={} beta={}\nm", self.dim, self.alpha, self.beta);
        for n in 0..self.dim {
            let _ = write!(out, ",n{n}");
        }
        out.push('\n');
        for (m, row) in self.matrix.iter().enumerate() {
            let _ = write!(out, "{m}");
            for v in row {
                let _ = write!(out, ",{v:.12e}");
            }
            out.push('\n');
        }
        out
    }
}
