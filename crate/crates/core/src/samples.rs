//! Reference forms used by the verification harness and tests.
//!
//! The model metrics are `g = φ² δ` with `φ = 2/(1 + C|x|²)`. Rotations of
//! the coordinates are isometries, gradients of `x1/(1 + C|x|²)` are closed
//! conformal Killing, and `df` for a radial harmonic `f` is harmonic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::expr::{parse, Expression};
use crate::forms::{Basis, ExprForm, FormError};

/// Random polynomial plus trigonometric coefficients, reproducible from
/// `seed`. Values stay O(1) on boxes of side ≤ 2.
pub fn random_form(n: usize, r: usize, seed: u64) -> Result<ExprForm, FormError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = Basis::new(n, r);
    let mut coef = || (rng.random::<f64>() - 0.5) * 2.0;
    let mut comps = Vec::with_capacity(basis.len());
    for idx in basis.iter() {
        let (a, b, c, d, e) = (coef(), coef(), coef(), coef(), coef());
        let i = idx.indices().first().copied().unwrap_or(0);
        let j = (i + 1) % n;
        let k = (i + 2) % n;
        let text = format!(
            "{a:?} + {b:?}*x{} + {c:?}*x{}*x{} + {d:?}*sin({:?}*x{}) + {e:?}*cos(x{} - x{})",
            i + 1,
            j + 1,
            k + 1,
            1.0 + coef().abs(),
            k + 1,
            i + 1,
            j + 1
        );
        let expr = parse(&text, n).expect("generated expression parses");
        comps.push((idx.clone(), expr));
    }
    ExprForm::from_components(n, r, comps)
}

/// `φ² (−x2 dx1 + x1 dx2)`, dual to the rotation field in the (x1, x2)
/// plane; Killing on every model with radial conformal factor.
pub fn rotation_killing_form(n: usize, c: f64) -> ExprForm {
    let phi2 = conformal_factor_sq(n, c);
    let mut coeffs = vec![Expression::zero(); n];
    coeffs[0] = &phi2 * &Expression::neg(&Expression::var(1));
    coeffs[1] = &phi2 * &Expression::var(0);
    ExprForm::one_form(coeffs)
}

/// `d(x1/(1 + C|x|²))`, the differential of an ambient linear function
/// restricted to the model; closed conformal Killing.
pub fn closed_conformal_killing_form(n: usize, c: f64) -> ExprForm {
    let f = &Expression::var(0) / &one_plus_c_r2(n, c);
    ExprForm::one_form((0..n).map(|i| f.differentiate(i)).collect())
}

/// `df` with `f` radial and harmonic in dimension 3:
/// `ω_i = x_i (1 + C|x|²) / (2|x|³)`. Singular at the origin.
pub fn radial_harmonic_form(c: f64) -> ExprForm {
    let n = 3;
    let r2 = radius_sq(n);
    let num = one_plus_c_r2(n, c);
    let den = &Expression::num(2.0) * &Expression::powi(&Expression::sqrt(&r2), 3);
    let scale = &num / &den;
    ExprForm::one_form((0..n).map(|i| &Expression::var(i) * &scale).collect())
}

/// `dx1`, harmonic for any conformally flat metric when `n = 2`.
pub fn coordinate_form(n: usize) -> ExprForm {
    ExprForm::basis_form(n, &[1]).expect("n ≥ 1")
}

fn radius_sq(n: usize) -> Expression {
    let sq: Vec<Expression> = (0..n)
        .map(|i| Expression::powi(&Expression::var(i), 2))
        .collect();
    Expression::lincomb(sq.iter().map(|e| (1.0, e)))
}

fn one_plus_c_r2(n: usize, c: f64) -> Expression {
    &Expression::one() + &(&Expression::num(c) * &radius_sq(n))
}

fn conformal_factor_sq(n: usize, c: f64) -> Expression {
    &Expression::num(4.0) / &Expression::powi(&one_plus_c_r2(n, c), 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_form_is_reproducible() {
        let a = random_form(3, 2, 17).unwrap();
        let b = random_form(3, 2, 17).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, random_form(3, 2, 18).unwrap());
        let v = a.evaluate(&[0.1, 0.2, 0.3]).unwrap();
        assert!(v.iter().all(|x| x.is_finite() && x.abs() < 10.0));
    }

    #[test]
    fn closed_ck_is_closed() {
        let w = closed_conformal_killing_form(3, 1.0);
        let dw = w.exterior_d().unwrap();
        for p in [[0.1, 0.2, 0.3], [-0.4, 0.5, 0.0]] {
            assert!(dw.evaluate(&p).unwrap().iter().all(|x| x.abs() < 1e-14));
        }
    }
}
