//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Jet`] holds the Taylor coefficients `c_α = ∂^α f(p) / α!` of a scalar
//! field around a point, for all multi-exponents `|α| ≤ order`. Arithmetic on
//! jets is polynomial arithmetic truncated at the jet order, so every partial
//! derivative that survives truncation is exact up to round-off. All
//! derivatives of metric and form components used by the operators are
//! produced this way.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

/// Monomial layout and multiplication tables for `n` variables up to a fixed
/// total degree.
#[derive(Debug)]
pub struct JetSpace {
    n: usize,
    order: usize,
    exps: Vec<Vec<u8>>,
    lookup: HashMap<Vec<u8>, usize>,
    // (a, b, a*b) sorted by deg(a)+deg(b)
    products: Vec<(u32, u32, u32)>,
    products_upto: Vec<usize>,
    // per variable: (source, target, factor) for ∂_i
    derivs: Vec<Vec<(u32, u32, f64)>>,
    // number of monomials of degree ≤ d
    len_upto: Vec<usize>,
}

impl JetSpace {
    pub fn new(n: usize, order: usize) -> Arc<Self> {
        let mut exps: Vec<Vec<u8>> = Vec::new();
        let mut len_upto = Vec::with_capacity(order + 1);
        for d in 0..=order {
            let mut cur = vec![0u8; n];
            push_compositions(&mut exps, &mut cur, 0, d);
            len_upto.push(exps.len());
        }
        let degree: Vec<usize> = exps
            .iter()
            .map(|e| e.iter().map(|&x| x as usize).sum())
            .collect();
        let lookup: HashMap<Vec<u8>, usize> = exps
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();

        let mut products = Vec::new();
        for (a, ea) in exps.iter().enumerate() {
            for (b, eb) in exps.iter().enumerate() {
                if degree[a] + degree[b] > order {
                    continue;
                }
                let sum: Vec<u8> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
                products.push((a as u32, b as u32, lookup[&sum] as u32));
            }
        }
        products.sort_by_key(|&(a, b, _)| degree[a as usize] + degree[b as usize]);
        let mut products_upto = vec![0; order + 1];
        for (d, slot) in products_upto.iter_mut().enumerate() {
            *slot = products
                .iter()
                .take_while(|&&(a, b, _)| degree[a as usize] + degree[b as usize] <= d)
                .count();
        }

        let mut derivs = vec![Vec::new(); n];
        for (i, dv) in derivs.iter_mut().enumerate() {
            for (src, e) in exps.iter().enumerate() {
                if e[i] == 0 {
                    continue;
                }
                let mut t = e.clone();
                t[i] -= 1;
                dv.push((src as u32, lookup[&t] as u32, e[i] as f64));
            }
        }

        Arc::new(Self {
            n,
            order,
            exps,
            lookup,
            products,
            products_upto,
            derivs,
            len_upto,
        })
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn max_order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    /// Position of the monomial with the given exponent vector.
    pub fn index_of(&self, exps: &[u8]) -> Option<usize> {
        self.lookup.get(exps).copied()
    }
}

fn push_compositions(out: &mut Vec<Vec<u8>>, cur: &mut [u8], pos: usize, left: usize) {
    if pos + 1 == cur.len() {
        cur[pos] = left as u8;
        out.push(cur.to_vec());
        cur[pos] = 0;
        return;
    }
    if cur.is_empty() {
        if left == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for k in (0..=left).rev() {
        cur[pos] = k as u8;
        push_compositions(out, cur, pos + 1, left - k);
    }
    cur[pos] = 0;
}

/// Truncated Taylor expansion of a scalar field at a point.
#[derive(Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    order: usize,
    c: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("order", &self.order)
            .field("coeffs", &&self.c[..self.space.len_upto[self.order]])
            .finish()
    }
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, value: f64) -> Self {
        let mut c = vec![0.0; space.len()];
        c[0] = value;
        Self {
            space: space.clone(),
            order: space.order,
            c,
        }
    }

    pub fn zero(space: &Arc<JetSpace>) -> Self {
        Self::constant(space, 0.0)
    }

    /// The coordinate function `x_i` expanded at a point where it equals `value`.
    pub fn variable(space: &Arc<JetSpace>, i: usize, value: f64) -> Self {
        let mut j = Self::constant(space, value);
        if space.order >= 1 {
            let mut e = vec![0u8; space.n];
            e[i] = 1;
            j.c[space.lookup[&e]] = 1.0;
        }
        j
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    /// Highest total degree for which the coefficients are valid.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c[..self.space.len_upto[self.order]]
    }

    /// Mixed partial derivative `∂^α f(p)`; `None` if `|α|` exceeds the order.
    pub fn partial(&self, exps: &[u8]) -> Option<f64> {
        let deg: usize = exps.iter().map(|&e| e as usize).sum();
        if deg > self.order {
            return None;
        }
        let idx = self.space.index_of(exps)?;
        let fact: f64 = exps
            .iter()
            .map(|&e| (1..=e as u64).product::<u64>() as f64)
            .product();
        Some(self.c[idx] * fact)
    }

    /// Exact partial derivative `∂_i`; the result has one order less.
    ///
    /// Panics if the jet has order zero.
    pub fn deriv(&self, i: usize) -> Jet {
        assert!(self.order > 0, "jet order exhausted while differentiating");
        let mut c = vec![0.0; self.space.len()];
        let keep = self.space.len_upto[self.order];
        for &(src, dst, f) in &self.space.derivs[i] {
            if (src as usize) < keep {
                c[dst as usize] += f * self.c[src as usize];
            }
        }
        Jet {
            space: self.space.clone(),
            order: self.order - 1,
            c,
        }
    }

    /// Drops coefficients above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order);
        let mut c = self.c.clone();
        for v in c.iter_mut().skip(self.space.len_upto[order]) {
            *v = 0.0;
        }
        Jet {
            space: self.space.clone(),
            order,
            c,
        }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            space: self.space.clone(),
            order: self.order,
            c: self.c.iter().map(|v| v * s).collect(),
        }
    }

    /// `self += s * other`, truncating to the lower order.
    pub fn add_scaled(&mut self, s: f64, other: &Jet) {
        if other.order < self.order {
            *self = self.truncate(other.order);
        }
        let keep = self.space.len_upto[self.order];
        for (a, b) in self.c[..keep].iter_mut().zip(&other.c[..keep]) {
            *a += s * b;
        }
    }

    fn mul_jet(&self, other: &Jet) -> Jet {
        let order = self.order.min(other.order);
        let mut c = vec![0.0; self.space.len()];
        let end = self.space.products_upto[order];
        for &(a, b, t) in &self.space.products[..end] {
            c[t as usize] += self.c[a as usize] * other.c[b as usize];
        }
        Jet {
            space: self.space.clone(),
            order,
            c,
        }
    }

    // f(a0 + h) = Σ coef[m] h^m, Horner in the nilpotent part h.
    fn compose(&self, coef: &[f64]) -> Jet {
        let mut h = self.clone();
        h.c[0] = 0.0;
        let mut acc = Jet::constant(&self.space, coef[self.order]).truncate(self.order);
        for m in (0..self.order).rev() {
            acc = acc.mul_jet(&h);
            acc.c[0] += coef[m];
        }
        acc
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let coef: Vec<f64> = (0..=self.order).map(|m| e / factorial(m)).collect();
        self.compose(&coef)
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cyc = [s, c, -s, -c];
        let coef: Vec<f64> = (0..=self.order)
            .map(|m| cyc[m % 4] / factorial(m))
            .collect();
        self.compose(&coef)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cyc = [c, -s, -c, s];
        let coef: Vec<f64> = (0..=self.order)
            .map(|m| cyc[m % 4] / factorial(m))
            .collect();
        self.compose(&coef)
    }

    /// `None` when the value is zero.
    pub fn recip(&self) -> Option<Jet> {
        let a = self.value();
        if a == 0.0 {
            return None;
        }
        let coef: Vec<f64> = (0..=self.order)
            .map(|m| (-1f64).powi(m as i32) / a.powi(m as i32 + 1))
            .collect();
        Some(self.compose(&coef))
    }

    pub fn div(&self, other: &Jet) -> Option<Jet> {
        other.recip().map(|r| self.mul_jet(&r))
    }

    /// `None` for negative values, or zero when derivatives are requested.
    pub fn sqrt(&self) -> Option<Jet> {
        let a = self.value();
        if a < 0.0 || (a == 0.0 && self.order > 0) {
            return None;
        }
        let mut coef = Vec::with_capacity(self.order + 1);
        let mut binom = 1.0;
        for m in 0..=self.order {
            coef.push(binom * a.powf(0.5 - m as f64));
            binom *= (0.5 - m as f64) / (m as f64 + 1.0);
        }
        Some(self.compose(&coef))
    }

    /// `None` for non-positive values.
    pub fn ln(&self) -> Option<Jet> {
        let a = self.value();
        if a <= 0.0 {
            return None;
        }
        let mut coef = vec![a.ln()];
        for m in 1..=self.order {
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            coef.push(sign / (m as f64 * a.powi(m as i32)));
        }
        Some(self.compose(&coef))
    }

    pub fn powi(&self, k: u32) -> Jet {
        let mut acc = Jet::constant(&self.space, 1.0).truncate(self.order);
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul_jet(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul_jet(&base);
            }
        }
        acc
    }

    /// Largest absolute coefficient; used for residual norms over jets.
    pub fn max_abs(&self) -> f64 {
        self.coeffs().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|k| k as f64).product()
}

impl Add<&Jet> for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        let mut out = self.clone();
        out.add_scaled(1.0, rhs);
        out
    }
}

impl Sub<&Jet> for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        let mut out = self.clone();
        out.add_scaled(-1.0, rhs);
        out
    }
}

impl Mul<&Jet> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_jet(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        &self + &rhs
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        &self - &rhs
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        &self * &rhs
    }
}
