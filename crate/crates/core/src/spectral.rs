//! Kernel dimensions of Δ and □ on flat tori.
//!
//! A band-limited form splits into frequency blocks `c_k exp(iκ·x)`. On each
//! block `d` is exterior multiplication by `iκ`, `d*` is its conjugate
//! transpose, `Δ = |κ|²` and
//! `□ = (|κ|² − d*d/(r+1) − dd*/(n−r+1)) / (r(r+1))`.
//! Kernels are counted from singular values. A real form has a cosine and a
//! sine for every pair `±k`, so each frequency from the half-space
//! (first nonzero entry positive) counts twice and `k = 0` once.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::forms::{binomial, frequencies, shuffle_sign, Basis};

pub type CMatrix = DMatrix<Complex64>;

pub const DEFAULT_TOL: f64 = 1e-9;
/// Minimum ratio between the smallest kept and largest dropped singular value.
pub const GAP_RATIO: f64 = 1e3;

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("degree {r} outside 1..={max} for dimension {n}")]
    DegreeOutOfRange { r: usize, n: usize, max: usize },
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("band limit must be at least 1")]
    EmptyBand,
    #[error("tolerance must be positive and finite, got {0}")]
    BadTolerance(f64),
    #[error("indeterminate kernel: singular values {kept:e} (kept) and {dropped:e} (dropped) are not separated by {GAP_RATIO:e}")]
    Indeterminate { kept: f64, dropped: f64 },
}

/// Matrix of `ω ↦ iκ∧ω` from degree `r` to `r+1`, in lexicographic bases.
pub fn d_block(n: usize, r: usize, kappa: &[f64]) -> CMatrix {
    let src = Basis::new(n, r);
    let rows = binomial(n, r + 1);
    let mut m = CMatrix::zeros(rows, src.len());
    if r >= n {
        return m;
    }
    let dst = Basis::new(n, r + 1);
    for (col, idx) in src.iter().enumerate() {
        for (j, &kj) in kappa.iter().enumerate() {
            if idx.contains(j) || kj == 0.0 {
                continue;
            }
            let mut merged = idx.indices().to_vec();
            merged.push(j);
            merged.sort_unstable();
            let s = shuffle_sign(&[j], idx.indices());
            m[(dst.rank(&merged), col)] += Complex64::new(0.0, kj * s);
        }
    }
    m
}

/// Matrix of `d*` from degree `r` to `r−1`.
pub fn codiff_block(n: usize, r: usize, kappa: &[f64]) -> CMatrix {
    if r == 0 {
        return CMatrix::zeros(0, 1);
    }
    d_block(n, r - 1, kappa).adjoint()
}

#[derive(Debug, Clone)]
pub struct FreqBlock {
    pub k: Vec<i64>,
    pub r: usize,
    pub laplacian: CMatrix,
    pub tachibana: CMatrix,
    pub d: CMatrix,
    pub codiff: CMatrix,
}

fn check_degree(n: usize, r: usize) -> Result<(), SpectralError> {
    if n < 2 {
        return Err(SpectralError::DimensionTooSmall(n));
    }
    if r == 0 || r >= n {
        return Err(SpectralError::DegreeOutOfRange { r, n, max: n - 1 });
    }
    Ok(())
}

/// Blocks at frequency `k` on the torus with periods `2π`, where `κ = k`.
pub fn assemble_block(n: usize, r: usize, k: &[i64]) -> Result<FreqBlock, SpectralError> {
    let kappa: Vec<f64> = k.iter().map(|&v| v as f64).collect();
    assemble_block_at(n, r, k, &kappa)
}

/// Blocks for an explicit wave vector `κ`.
pub fn assemble_block_at(
    n: usize,
    r: usize,
    k: &[i64],
    kappa: &[f64],
) -> Result<FreqBlock, SpectralError> {
    check_degree(n, r)?;
    let (rf, nf) = (r as f64, n as f64);
    let k2: f64 = kappa.iter().map(|v| v * v).sum();
    let len = binomial(n, r);
    let d = d_block(n, r, kappa);
    let codiff = codiff_block(n, r, kappa);
    let laplacian = CMatrix::identity(len, len) * Complex64::from(k2);
    let dsd = d.adjoint() * &d;
    let dds = codiff.adjoint() * &codiff;
    let tachibana = (&laplacian
        - dsd * Complex64::from(1.0 / (rf + 1.0))
        - dds * Complex64::from(1.0 / (nf - rf + 1.0)))
        * Complex64::from(1.0 / (rf * (rf + 1.0)));
    Ok(FreqBlock {
        k: k.to_vec(),
        r,
        laplacian,
        tachibana,
        d,
        codiff,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelInfo {
    pub dim: usize,
    /// Smallest singular value above the threshold, if any.
    pub smallest_kept: Option<f64>,
    /// Largest singular value below the threshold, if any.
    pub largest_dropped: Option<f64>,
}

/// Nullity of `m`: the number of columns minus the count of singular values
/// at or above `tol · max(1, σ_max)`.
pub fn kernel_dimension(m: &CMatrix, tol: f64) -> Result<KernelInfo, SpectralError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(SpectralError::BadTolerance(tol));
    }
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(KernelInfo {
            dim: m.ncols(),
            smallest_kept: None,
            largest_dropped: None,
        });
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let threshold = tol * smax.max(1.0);
    let kept: Vec<f64> = sv.iter().cloned().filter(|&s| s >= threshold).collect();
    let dropped: Vec<f64> = sv.iter().cloned().filter(|&s| s < threshold).collect();
    let smallest_kept = kept.iter().cloned().reduce(f64::min);
    let largest_dropped = dropped.iter().cloned().reduce(f64::max);
    if let (Some(k), Some(d)) = (smallest_kept, largest_dropped) {
        if d > 0.0 && k / d < GAP_RATIO {
            return Err(SpectralError::Indeterminate {
                kept: k,
                dropped: d,
            });
        }
    }
    Ok(KernelInfo {
        dim: m.ncols() - kept.len(),
        smallest_kept,
        largest_dropped,
    })
}

fn stack(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    out
}

/// Per-block kernel dimensions and smallest singular values.
#[derive(Debug, Clone, Serialize)]
pub struct BlockDiagnostic {
    pub k: Vec<i64>,
    pub multiplicity: usize,
    pub kernels: [usize; 4],
    /// Smallest singular value of the Δ, □, (□; d*) and (□; d) matrices.
    pub smallest_singular_values: [f64; 4],
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralNumbers {
    pub n: usize,
    pub r: usize,
    pub band: usize,
    /// Betti number: harmonic forms.
    pub b: usize,
    /// Tachibana number: conformal Killing forms.
    pub t: usize,
    /// Killing number: co-closed conformal Killing forms.
    pub k: usize,
    /// Planarity number: closed conformal Killing forms.
    pub p: usize,
    pub tol: f64,
    pub blocks: Vec<BlockDiagnostic>,
}

fn smallest_sv(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    if m.nrows() < m.ncols() {
        return 0.0;
    }
    sv.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Kernel dimensions over all frequencies with `‖k‖∞ ≤ B` on the standard
/// torus with periods `2π`.
pub fn compute_numbers(
    n: usize,
    r: usize,
    band: usize,
    tol: f64,
) -> Result<SpectralNumbers, SpectralError> {
    check_degree(n, r)?;
    if band == 0 {
        return Err(SpectralError::EmptyBand);
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(SpectralError::BadTolerance(tol));
    }
    let reps: Vec<(Vec<i64>, usize)> = frequencies(n, band)
        .into_iter()
        .filter_map(|k| {
            if k.iter().all(|&v| v == 0) {
                Some((k, 1))
            } else if crate::forms::is_half_space(&k) {
                Some((k, 2))
            } else {
                None
            }
        })
        .collect();
    let blocks = reps
        .par_iter()
        .map(|(k, mult)| {
            let blk = assemble_block(n, r, k)?;
            let killing = stack(&blk.tachibana, &blk.codiff);
            let planar = stack(&blk.tachibana, &blk.d);
            let mats = [&blk.laplacian, &blk.tachibana, &killing, &planar];
            let mut kernels = [0usize; 4];
            let mut svs = [0.0f64; 4];
            for (slot, m) in mats.iter().enumerate() {
                kernels[slot] = kernel_dimension(m, tol)?.dim;
                svs[slot] = smallest_sv(m);
            }
            Ok(BlockDiagnostic {
                k: k.clone(),
                multiplicity: *mult,
                kernels,
                smallest_singular_values: svs,
            })
        })
        .collect::<Result<Vec<_>, SpectralError>>()?;
    let total = |slot: usize| -> usize {
        blocks
            .iter()
            .map(|b| b.kernels[slot] * b.multiplicity)
            .sum()
    };
    Ok(SpectralNumbers {
        n,
        r,
        band,
        b: total(0),
        t: total(1),
        k: total(2),
        p: total(3),
        tol,
        blocks,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityOutcome {
    pub name: &'static str,
    pub left: usize,
    pub right: usize,
    pub pass: bool,
}

impl IdentityOutcome {
    fn new(name: &'static str, left: usize, right: usize) -> Self {
        Self {
            name,
            left,
            right,
            pass: left == right,
        }
    }
}

/// `t_r = t_{n−r}`, `p_r = k_{n−r}`, `k_r = p_{n−r}` and `b_r = b_{n−r}`.
pub fn duality_check(a: &SpectralNumbers, b: &SpectralNumbers) -> Vec<IdentityOutcome> {
    assert_eq!(a.n, b.n, "duality compares numbers on the same torus");
    assert_eq!(a.r + b.r, a.n, "duality pairs degrees r and n − r");
    vec![
        IdentityOutcome::new("b_r = b_(n-r)", a.b, b.b),
        IdentityOutcome::new("t_r = t_(n-r)", a.t, b.t),
        IdentityOutcome::new("p_r = k_(n-r)", a.p, b.k),
        IdentityOutcome::new("k_r = p_(n-r)", a.k, b.p),
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundOutcome {
    pub name: &'static str,
    pub value: usize,
    pub bound: u128,
    pub pass: bool,
}

fn factorial(m: usize) -> u128 {
    (1..=m as u128).product()
}

/// Upper bounds on the Tachibana, Killing and planarity numbers.
pub fn bounds(n: usize, r: usize) -> [u128; 3] {
    [
        factorial(n + 2) / (factorial(r + 1) * factorial(n - r + 1)),
        factorial(n + 1) / (factorial(r + 1) * factorial(n - r)),
        factorial(n + 1) / (factorial(r) * factorial(n - r + 1)),
    ]
}

pub fn bound_check(num: &SpectralNumbers) -> Vec<BoundOutcome> {
    let [tb, kb, pb] = bounds(num.n, num.r);
    let out = |name, value: usize, bound: u128| BoundOutcome {
        name,
        value,
        bound,
        pass: value as u128 <= bound,
    };
    vec![
        out("t_r <= (n+2)!/((r+1)!(n-r+1)!)", num.t, tb),
        out("k_r <= (n+1)!/((r+1)!(n-r)!)", num.k, kb),
        out("p_r <= (n+1)!/(r!(n-r+1)!)", num.p, pb),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
        // embed as a real symmetric matrix [[A, −B], [B, A]]; eigenvalues double
        let n = m.nrows();
        let mut re = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let c = m[(i, j)];
                re[(i, j)] = c.re;
                re[(i + n, j + n)] = c.re;
                re[(i, j + n)] = -c.im;
                re[(i + n, j)] = c.im;
            }
        }
        let mut ev: Vec<f64> = re.symmetric_eigen().eigenvalues.iter().cloned().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev.into_iter().step_by(2).collect()
    }

    #[test]
    fn block_spectrum_closed_form() {
        let blk = assemble_block(3, 1, &[1, 0, 0]).unwrap();
        let ev = hermitian_eigenvalues(&blk.tachibana);
        let want = [0.25, 0.25, 1.0 / 3.0];
        for (a, b) in ev.iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{ev:?}");
        }
        assert!((&blk.laplacian - CMatrix::identity(3, 3)).norm() < 1e-15);
        assert_eq!(
            kernel_dimension(&blk.tachibana, DEFAULT_TOL).unwrap().dim,
            0
        );
    }

    #[test]
    fn block_spectra_for_general_frequencies() {
        for (n, r) in [(3, 1), (3, 2), (4, 1), (4, 2), (4, 3), (5, 2)] {
            for k in [vec![1i64, 2, 0, 0, 0], vec![2, -1, 1, 1, 3]] {
                let k = &k[..n];
                let blk = assemble_block(n, r, k).unwrap();
                let k2: f64 = k.iter().map(|v| (v * v) as f64).sum();
                let (rf, nf) = (r as f64, n as f64);
                let coexact = k2 / ((rf + 1.0) * (rf + 1.0));
                let exact = k2 * (nf - rf) / ((nf - rf + 1.0) * rf * (rf + 1.0));
                // exact forms at degree r have dimension C(n−1, r−1)
                let n_exact = binomial(n - 1, r - 1);
                let mut want = vec![exact; n_exact];
                want.extend(vec![coexact; binomial(n, r) - n_exact]);
                want.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let ev = hermitian_eigenvalues(&blk.tachibana);
                for (a, b) in ev.iter().zip(&want) {
                    assert!((a - b).abs() < 1e-12 * k2, "n={n} r={r} {ev:?} {want:?}");
                }
            }
        }
    }

    #[test]
    fn block_adjointness_and_hodge_split() {
        for k in frequencies(3, 2) {
            if k.iter().all(|&v| v == 0) {
                let blk = assemble_block(3, 1, &k).unwrap();
                assert_eq!(blk.d.norm(), 0.0);
                assert_eq!(blk.tachibana.norm(), 0.0);
                continue;
            }
            let kappa: Vec<f64> = k.iter().map(|&v| v as f64).collect();
            for r in 1..3 {
                let blk = assemble_block(3, r, &k).unwrap();
                assert_eq!(blk.codiff, d_block(3, r - 1, &kappa).adjoint());
                assert_eq!(
                    kernel_dimension(&blk.laplacian, DEFAULT_TOL).unwrap().dim,
                    0
                );
                let exact_rank =
                    binomial(3, r) - kernel_dimension(&blk.codiff, DEFAULT_TOL).unwrap().dim;
                let coexact_rank =
                    binomial(3, r) - kernel_dimension(&blk.d, DEFAULT_TOL).unwrap().dim;
                assert_eq!(exact_rank + coexact_rank, binomial(3, r));
            }
        }
    }

    #[test]
    fn kernel_dimension_basics() {
        assert_eq!(
            kernel_dimension(&CMatrix::zeros(3, 3), 1e-9).unwrap().dim,
            3
        );
        assert_eq!(
            kernel_dimension(&CMatrix::identity(3, 3), 1e-9)
                .unwrap()
                .dim,
            0
        );
        let mut m = CMatrix::identity(3, 3);
        m[(2, 2)] = Complex64::from(1e-8);
        assert!(matches!(
            kernel_dimension(&m, 1e-9),
            Ok(KernelInfo { dim: 0, .. })
        ));
        m[(2, 2)] = Complex64::from(5e-10);
        assert_eq!(kernel_dimension(&m, 1e-9).unwrap().dim, 1);
        m[(1, 1)] = Complex64::from(2e-9);
        assert!(matches!(
            kernel_dimension(&m, 1e-9),
            Err(SpectralError::Indeterminate { .. })
        ));
        assert!(kernel_dimension(&m, 0.0).is_err());
        // wide matrix: nullity counts missing singular values too
        assert_eq!(
            kernel_dimension(&CMatrix::identity(1, 3), 1e-9)
                .unwrap()
                .dim,
            2
        );
    }

    #[test]
    fn torus_numbers() {
        let num = compute_numbers(3, 1, 2, DEFAULT_TOL).unwrap();
        assert_eq!((num.b, num.t, num.k, num.p), (3, 3, 3, 3));
        let num = compute_numbers(2, 1, 3, DEFAULT_TOL).unwrap();
        assert_eq!((num.b, num.t, num.k, num.p), (2, 2, 2, 2));
        let num = compute_numbers(4, 2, 2, DEFAULT_TOL).unwrap();
        assert_eq!((num.b, num.t), (6, 6));
    }

    #[test]
    fn numbers_are_stable_in_the_band() {
        for (n, r) in [(2, 1), (3, 1), (3, 2)] {
            let base = compute_numbers(n, r, 1, DEFAULT_TOL).unwrap();
            for band in 2..=3 {
                let num = compute_numbers(n, r, band, DEFAULT_TOL).unwrap();
                assert_eq!(
                    (num.b, num.t, num.k, num.p),
                    (base.b, base.t, base.k, base.p)
                );
            }
        }
    }

    #[test]
    fn duality_and_bounds() {
        let a = compute_numbers(3, 1, 2, DEFAULT_TOL).unwrap();
        let b = compute_numbers(3, 2, 2, DEFAULT_TOL).unwrap();
        assert!(duality_check(&a, &b).iter().all(|o| o.pass));
        assert_eq!(bounds(3, 1), [10, 6, 4]);
        assert!(bound_check(&a).iter().all(|o| o.pass));
    }

    #[test]
    fn argument_errors() {
        assert!(matches!(
            compute_numbers(3, 3, 2, DEFAULT_TOL),
            Err(SpectralError::DegreeOutOfRange { .. })
        ));
        assert!(compute_numbers(3, 0, 2, DEFAULT_TOL).is_err());
        assert!(compute_numbers(1, 1, 2, DEFAULT_TOL).is_err());
        assert!(compute_numbers(3, 1, 0, DEFAULT_TOL).is_err());
        assert!(compute_numbers(3, 1, 1, -1.0).is_err());
    }
}
