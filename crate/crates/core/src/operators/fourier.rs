//! Exact operators on band-limited forms over a flat torus.
//!
//! Each Fourier mode `c exp(iκ·x)` is mapped independently: `∂_j` becomes
//! multiplication by `iκ_j`, so `d` is `iκ∧` and `d*` is `−iκ⌟`.

use std::collections::BTreeMap;

use num_complex::Complex64;

use super::OperatorError;
use crate::forms::{shuffle_sign, FourierForm, Frequency, MultiIndex};

const I: Complex64 = Complex64::new(0.0, 1.0);

fn rebuild(
    template: &FourierForm,
    r: usize,
    coeffs: BTreeMap<(Frequency, MultiIndex), Complex64>,
) -> Result<FourierForm, OperatorError> {
    let mut out = FourierForm::new(
        template.dim(),
        r,
        template.periods().to_vec(),
        template.band(),
    )?;
    for ((k, idx), c) in coeffs {
        out.set(&k, &idx, c)?;
    }
    Ok(out)
}

pub fn exterior_d(w: &FourierForm) -> Result<FourierForm, OperatorError> {
    let (n, r) = (w.dim(), w.degree());
    if r >= n {
        return Err(OperatorError::DegreeOutOfRange { op: "d", r, n });
    }
    let mut acc: BTreeMap<(Frequency, MultiIndex), Complex64> = BTreeMap::new();
    for (k, idx, c) in w.coefficients() {
        let kv = w.wave_vector(k);
        for (j, &kj) in kv.iter().enumerate() {
            if idx.contains(j) || kj == 0.0 {
                continue;
            }
            let s = shuffle_sign(&[j], idx.indices());
            let mut merged = idx.indices().to_vec();
            merged.push(j);
            merged.sort_unstable();
            let key = (k.clone(), MultiIndex::new(merged, n)?);
            *acc.entry(key).or_default() += I * kj * s * c;
        }
    }
    rebuild(w, r + 1, acc)
}

pub fn codifferential(w: &FourierForm) -> Result<FourierForm, OperatorError> {
    let (n, r) = (w.dim(), w.degree());
    if r == 0 {
        return Err(OperatorError::DegreeOutOfRange { op: "d*", r, n });
    }
    let mut acc: BTreeMap<(Frequency, MultiIndex), Complex64> = BTreeMap::new();
    for (k, idx, c) in w.coefficients() {
        let kv = w.wave_vector(k);
        for (alpha, &ia) in idx.indices().iter().enumerate() {
            if kv[ia] == 0.0 {
                continue;
            }
            let s = if alpha % 2 == 0 { 1.0 } else { -1.0 };
            let rest: Vec<usize> = idx.indices().iter().copied().filter(|&x| x != ia).collect();
            let key = (k.clone(), MultiIndex::new(rest, n)?);
            *acc.entry(key).or_default() += -I * kv[ia] * s * c;
        }
    }
    rebuild(w, r - 1, acc)
}

/// Multiplies each mode by `f(|κ|²)`.
fn scale_modes(w: &FourierForm, f: impl Fn(f64) -> f64) -> Result<FourierForm, OperatorError> {
    let acc = w
        .coefficients()
        .map(|(k, idx, c)| {
            let k2: f64 = w.wave_vector(k).iter().map(|v| v * v).sum();
            ((k.clone(), idx.clone()), c * f(k2))
        })
        .collect();
    rebuild(w, w.degree(), acc)
}

pub fn codiff_of_d(w: &FourierForm) -> Result<FourierForm, OperatorError> {
    if w.degree() == w.dim() {
        return scale_modes(w, |_| 0.0);
    }
    codifferential(&exterior_d(w)?)
}

pub fn d_of_codiff(w: &FourierForm) -> Result<FourierForm, OperatorError> {
    if w.degree() == 0 {
        return scale_modes(w, |_| 0.0);
    }
    exterior_d(&codifferential(w)?)
}

pub fn hodge_laplacian(w: &FourierForm) -> Result<FourierForm, OperatorError> {
    Ok(codiff_of_d(w)?.axpy(1.0, &d_of_codiff(w)?)?)
}

/// On the flat torus `Δ̄ = −Σ ∂_j²`, i.e. `|κ|²` per mode.
pub fn rough_laplacian(w: &FourierForm) -> Result<FourierForm, OperatorError> {
    scale_modes(w, |k2| k2)
}

pub fn tachibana_laplacian(w: &FourierForm) -> Result<FourierForm, OperatorError> {
    let (n, r) = (w.dim(), w.degree());
    super::check_tachibana_degree("Tachibana Laplacian", n, r)?;
    let (rf, nf) = (r as f64, n as f64);
    let out = rough_laplacian(w)?
        .axpy(-1.0 / (rf + 1.0), &codiff_of_d(w)?)?
        .axpy(-1.0 / (nf - rf + 1.0), &d_of_codiff(w)?)?;
    scale_modes(&out, |_| 1.0 / (rf * (rf + 1.0)))
}

/// Hodge decomposition `ω = h + dα + d*β` into harmonic, exact and coexact
/// parts. On a flat torus the harmonic part is the constant mode.
#[derive(Debug, Clone)]
pub struct HodgeParts {
    pub harmonic: FourierForm,
    pub exact: FourierForm,
    pub coexact: FourierForm,
}

pub fn hodge_parts(w: &FourierForm) -> Result<HodgeParts, OperatorError> {
    let inv = |k2: f64| if k2 == 0.0 { 0.0 } else { 1.0 / k2 };
    let exact = scale_modes(&d_of_codiff(w)?, inv)?;
    let coexact = scale_modes(&codiff_of_d(w)?, inv)?;
    let harmonic = scale_modes(w, |k2| if k2 == 0.0 { 1.0 } else { 0.0 })?;
    Ok(HodgeParts {
        harmonic,
        exact,
        coexact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::{Basis, FormField};
    use crate::geometry::standard_torus;
    use std::f64::consts::PI;

    fn random(n: usize, r: usize, seed: u64) -> FourierForm {
        FourierForm::random(n, r, vec![2.0 * PI; n], 2, seed).unwrap()
    }

    #[test]
    fn d_squared_and_codiff_squared_vanish() {
        for seed in 0..5 {
            let w = random(3, 1, seed);
            let dd = exterior_d(&exterior_d(&w).unwrap()).unwrap();
            assert!(dd.coefficients().all(|(_, _, c)| c.norm() < 1e-12));
            let w2 = random(3, 2, seed);
            let cc = codifferential(&codifferential(&w2).unwrap()).unwrap();
            assert!(cc.coefficients().all(|(_, _, c)| c.norm() < 1e-12));
        }
    }

    #[test]
    fn adjointness_over_modes() {
        for seed in 0..10 {
            let w = random(3, 1, seed);
            let t = random(3, 2, seed + 100);
            let lhs = exterior_d(&w).unwrap().global_inner(&t).unwrap();
            let rhs = w.global_inner(&codifferential(&t).unwrap()).unwrap();
            assert!((lhs - rhs).abs() <= 1e-10 * w.l2_norm() * t.l2_norm());
        }
    }

    #[test]
    fn codifferential_of_sine() {
        // d*(sin(x1) dx1) = −cos(x1)
        let t = standard_torus(2).unwrap();
        let mut w = FourierForm::on_torus(&t, 1, 1).unwrap();
        let i1 = MultiIndex::one_based(&[1], 2).unwrap();
        w.add_real_mode(&[1, 0], &i1, 0.0, 1.0).unwrap();
        let c = codifferential(&w).unwrap().to_expr_form();
        for p in t.sample_points(5, 1) {
            let v = c.evaluate(&p).unwrap()[0];
            assert!((v + p[0].cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn hodge_laplacian_is_k_squared() {
        let w = random(4, 2, 3);
        let a = hodge_laplacian(&w).unwrap();
        let b = rough_laplacian(&w).unwrap();
        let diff = a.axpy(-1.0, &b).unwrap();
        assert!(diff.coefficients().all(|(_, _, c)| c.norm() < 1e-11));
    }

    #[test]
    fn tachibana_is_nonnegative() {
        for seed in 0..10 {
            for (n, r) in [(2, 1), (3, 1), (3, 2), (4, 2)] {
                let w = random(n, r, seed);
                let q = tachibana_laplacian(&w).unwrap().global_inner(&w).unwrap();
                assert!(q >= -1e-10);
            }
        }
    }

    #[test]
    fn hodge_parts_reassemble() {
        let w = random(3, 1, 11);
        let p = hodge_parts(&w).unwrap();
        let sum = p
            .harmonic
            .axpy(1.0, &p.exact)
            .unwrap()
            .axpy(1.0, &p.coexact)
            .unwrap();
        let diff = sum.axpy(-1.0, &w).unwrap();
        assert!(diff.coefficients().all(|(_, _, c)| c.norm() < 1e-12));
        assert!(exterior_d(&p.exact)
            .unwrap()
            .coefficients()
            .all(|(_, _, c)| c.norm() < 1e-12));
        assert!(codifferential(&p.coexact)
            .unwrap()
            .coefficients()
            .all(|(_, _, c)| c.norm() < 1e-12));
        assert!(p.exact.global_inner(&p.coexact).unwrap().abs() < 1e-10);
    }

    #[test]
    fn matches_pointwise_operators() {
        let t = standard_torus(3).unwrap();
        let w = random(3, 1, 4);
        let exact = tachibana_laplacian(&w).unwrap();
        for p in t.sample_points(5, 2) {
            let geo = t.local(&p, 2).unwrap();
            let j = w.jet_at(&geo).unwrap();
            let pw = super::super::tachibana_laplacian(&j, &geo, super::super::Route::Rough)
                .unwrap()
                .values();
            let ex = exact.jet_at(&t.local(&p, 0).unwrap()).unwrap().values();
            assert_eq!(pw.len(), Basis::new(3, 1).len());
            for (a, b) in pw.iter().zip(&ex) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }
}
