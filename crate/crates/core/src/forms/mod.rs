//! Multi-index algebra and differential-form representations.
//!
//! Components are stored only for strictly increasing multi-indices. The
//! pointwise inner product is the sum over increasing multi-indices,
//! `g(ω,θ) = Σ_{I,K} det(g^{-1}[I,K]) ω_I θ_K`, which equals the full
//! index contraction divided by `r!`. Orientation is the coordinate one,
//! `dx1∧…∧dxn > 0`.

mod expr_form;
mod fourier;

use std::fmt;

use itertools::Itertools;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{EvalError, ParseError};
use crate::geometry::{GeometryError, LocalGeometry};
use crate::jet::{Jet, JetSpace};

pub use expr_form::{parse_form_fixture, ExprForm};
pub(crate) use fourier::is_half_space;
pub use fourier::{frequencies, parse_fourier_fixture, FourierForm, Frequency};

#[derive(Debug, Error)]
pub enum FormError {
    #[error("degree {r} is out of range for dimension {n}")]
    DegreeOutOfRange { r: usize, n: usize },
    #[error("multi-index {0:?} is not strictly increasing")]
    NotIncreasing(Vec<usize>),
    #[error("multi-index {indices:?} has an entry outside 1..={n}")]
    IndexOutOfRange { indices: Vec<usize>, n: usize },
    #[error("degree mismatch: {left} vs {right}")]
    DegreeMismatch { left: usize, right: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("wedge degree {p}+{q} exceeds dimension {n}")]
    DegreeOverflow { p: usize, q: usize, n: usize },
    #[error("torus mismatch: forms live on tori with different periods")]
    TorusMismatch,
    #[error("frequency {0:?} exceeds the band limit")]
    BandExceeded(Vec<i64>),
    #[error("chart is not a flat torus")]
    NotATorus,
    #[error("line {line}: {message}")]
    Fixture { line: usize, message: String },
    #[error("line {line}, column {column}: {source}")]
    Expression {
        line: usize,
        column: usize,
        source: ParseError,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Strictly increasing tuple of zero-based coordinate indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    /// From zero-based indices.
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self, FormError> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FormError::NotIncreasing(
                indices.iter().map(|i| i + 1).collect(),
            ));
        }
        if indices.iter().any(|&i| i >= n) {
            return Err(FormError::IndexOutOfRange {
                indices: indices.iter().map(|i| i + 1).collect(),
                n,
            });
        }
        Ok(Self(indices))
    }

    /// From one-based indices as written in fixtures (`dx1∧dx3` is `[1, 3]`).
    pub fn one_based(indices: &[usize], n: usize) -> Result<Self, FormError> {
        if indices.contains(&0) {
            return Err(FormError::IndexOutOfRange {
                indices: indices.to_vec(),
                n,
            });
        }
        Self::new(indices.iter().map(|i| i - 1).collect(), n)
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.iter().map(|i| i + 1).join(","))
    }
}

impl Serialize for MultiIndex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// All increasing multi-indices of degree `r` in dimension `n`, in
/// lexicographic order.
pub fn enumerate_multiindices(n: usize, r: usize) -> Result<Vec<MultiIndex>, FormError> {
    if r > n {
        return Err(FormError::DegreeOutOfRange { r, n });
    }
    Ok((0..n).combinations(r).map(MultiIndex).collect())
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Lexicographic basis of increasing multi-indices with ranking.
#[derive(Debug, Clone)]
pub struct Basis {
    n: usize,
    r: usize,
    list: Vec<MultiIndex>,
}

impl Basis {
    /// Panics if `r > n`.
    pub fn new(n: usize, r: usize) -> Self {
        Self {
            n,
            r,
            list: enumerate_multiindices(n, r).expect("degree within dimension"),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.r
    }

    pub fn len(&self) -> usize {
        self.list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MultiIndex> {
        self.list.iter()
    }

    pub fn get(&self, rank: usize) -> &MultiIndex {
        &self.list[rank]
    }

    /// Lexicographic rank of a strictly increasing index tuple.
    pub fn rank(&self, sorted: &[usize]) -> usize {
        let (n, r) = (self.n, sorted.len());
        let mut rank = 0;
        let mut next = 0;
        for (pos, &c) in sorted.iter().enumerate() {
            for skipped in next..c {
                rank += binomial(n - 1 - skipped, r - 1 - pos);
            }
            next = c + 1;
        }
        rank
    }

    /// Rank and permutation sign of an arbitrary index tuple, or `None` if
    /// an index repeats.
    pub fn signed_rank(&self, tuple: &[usize]) -> Option<(usize, f64)> {
        let mut buf: smallbuf::Buf = smallbuf::Buf::from(tuple);
        let s = buf.as_mut();
        let mut sign = 1.0;
        for i in 1..s.len() {
            let mut j = i;
            while j > 0 && s[j - 1] > s[j] {
                s.swap(j - 1, j);
                sign = -sign;
                j -= 1;
            }
        }
        if s.windows(2).any(|w| w[0] == w[1]) {
            return None;
        }
        Some((self.rank(s), sign))
    }
}

mod smallbuf {
    // fixed-capacity scratch for index tuples
    pub struct Buf {
        data: [usize; 16],
        len: usize,
    }

    impl From<&[usize]> for Buf {
        fn from(s: &[usize]) -> Self {
            assert!(s.len() <= 16, "index tuples longer than 16 are unsupported");
            let mut data = [0; 16];
            data[..s.len()].copy_from_slice(s);
            Buf { data, len: s.len() }
        }
    }

    impl Buf {
        pub fn as_mut(&mut self) -> &mut [usize] {
            &mut self.data[..self.len]
        }
    }
}

/// Sign of the permutation that sorts the concatenation `I ++ J` of two
/// disjoint increasing tuples.
pub fn shuffle_sign(i: &[usize], j: &[usize]) -> f64 {
    let inversions: usize = i
        .iter()
        .map(|&a| j.iter().filter(|&&b| b < a).count())
        .sum();
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Complement of an increasing tuple in `0..n`.
pub fn complement(n: usize, idx: &[usize]) -> Vec<usize> {
    (0..n).filter(|i| !idx.contains(i)).collect()
}

/// A form whose components are Taylor jets at one point.
#[derive(Debug, Clone)]
pub struct JetForm {
    n: usize,
    r: usize,
    comps: Vec<Jet>,
}

impl JetForm {
    pub fn zeros(space: &std::sync::Arc<JetSpace>, n: usize, r: usize) -> Self {
        Self {
            n,
            r,
            comps: vec![Jet::zero(space); binomial(n, r)],
        }
    }

    /// Components in basis order.
    pub fn from_components(n: usize, r: usize, comps: Vec<Jet>) -> Self {
        assert_eq!(comps.len(), binomial(n, r));
        Self { n, r, comps }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.r
    }

    pub fn basis(&self) -> Basis {
        Basis::new(self.n, self.r)
    }

    pub fn components(&self) -> &[Jet] {
        &self.comps
    }

    pub fn components_mut(&mut self) -> &mut [Jet] {
        &mut self.comps
    }

    pub fn order(&self) -> usize {
        self.comps
            .iter()
            .map(Jet::order)
            .min()
            .unwrap_or(usize::MAX)
    }

    pub fn values(&self) -> Vec<f64> {
        self.comps.iter().map(Jet::value).collect()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            n: self.n,
            r: self.r,
            comps: self.comps.iter().map(|c| c.scale(s)).collect(),
        }
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: f64, other: &JetForm) -> Self {
        assert_eq!((self.n, self.r), (other.n, other.r));
        let mut out = self.clone();
        for (a, b) in out.comps.iter_mut().zip(&other.comps) {
            a.add_scaled(s, b);
        }
        out
    }

    pub fn truncate(&self, order: usize) -> Self {
        Self {
            n: self.n,
            r: self.r,
            comps: self.comps.iter().map(|c| c.truncate(order)).collect(),
        }
    }
}

/// A `(0,1)⊗r`-tensor `T_{j;I}`, antisymmetric in `I`, stored as
/// `[j * C(n,r) + rank(I)]`. Holds `∇ω` and its `D1/D2/D3` parts.
#[derive(Debug, Clone)]
pub struct MixedTensor {
    n: usize,
    r: usize,
    comps: Vec<Jet>,
}

impl MixedTensor {
    pub fn from_components(n: usize, r: usize, comps: Vec<Jet>) -> Self {
        assert_eq!(comps.len(), n * binomial(n, r));
        Self { n, r, comps }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.r
    }

    pub fn get(&self, j: usize, rank: usize) -> &Jet {
        &self.comps[j * binomial(self.n, self.r) + rank]
    }

    pub fn components(&self) -> &[Jet] {
        &self.comps
    }

    pub fn values(&self) -> Vec<f64> {
        self.comps.iter().map(Jet::value).collect()
    }

    pub fn axpy(&self, s: f64, other: &MixedTensor) -> Self {
        let mut out = self.clone();
        for (a, b) in out.comps.iter_mut().zip(&other.comps) {
            a.add_scaled(s, b);
        }
        out
    }

    /// Pointwise inner product `g^{jk} G^{IK} T_{j;I} S_{k;K}`.
    pub fn inner(&self, other: &MixedTensor, geo: &LocalGeometry) -> f64 {
        let len = binomial(self.n, self.r);
        let gm = geo.form_metric(self.r);
        let mut acc = 0.0;
        for j in 0..self.n {
            for k in 0..self.n {
                let gjk = geo.ginv(j, k).value();
                if gjk == 0.0 {
                    continue;
                }
                for a in 0..len {
                    for b in 0..len {
                        acc += gjk
                            * gm[a * len + b].value()
                            * self.get(j, a).value()
                            * other.get(k, b).value();
                    }
                }
            }
        }
        acc
    }

    pub fn norm(&self, geo: &LocalGeometry) -> f64 {
        self.inner(self, geo).max(0.0).sqrt()
    }
}

/// Pointwise inner product of two jet forms of equal degree.
pub fn jet_inner(a: &JetForm, b: &JetForm, geo: &LocalGeometry) -> f64 {
    assert_eq!(a.r, b.r);
    let len = a.comps.len();
    let gm = geo.form_metric(a.r);
    let mut acc = 0.0;
    for i in 0..len {
        for k in 0..len {
            acc += gm[i * len + k].value() * a.comps[i].value() * b.comps[k].value();
        }
    }
    acc
}

/// Pointwise metric norm `|ω|_g`.
pub fn jet_norm(a: &JetForm, geo: &LocalGeometry) -> f64 {
    jet_inner(a, a, geo).max(0.0).sqrt()
}

/// Hodge star at a point, `(*ω)_J = √det g · sign(J^c, J) · ω^{J^c}` with
/// `ω^I = G^{IK} ω_K`.
pub fn hodge_star(w: &JetForm, geo: &LocalGeometry) -> JetForm {
    let n = w.n;
    let src = Basis::new(n, w.r);
    let dst = Basis::new(n, n - w.r);
    let gm = geo.form_metric(w.r);
    let len = src.len();
    let raised: Vec<Jet> = (0..len)
        .map(|i| {
            let mut acc = Jet::zero(geo.space());
            for k in 0..len {
                acc.add_scaled(1.0, &(&gm[i * len + k] * &w.comps[k]));
            }
            acc
        })
        .collect();
    let comps = dst
        .iter()
        .map(|jdx| {
            let ic = complement(n, jdx.indices());
            let sign = shuffle_sign(&ic, jdx.indices());
            (geo.sqrt_det() * &raised[src.rank(&ic)]).scale(sign)
        })
        .collect();
    JetForm {
        n,
        r: n - w.r,
        comps,
    }
}

/// Wedge product of jet forms (metric independent).
pub fn jet_wedge(a: &JetForm, b: &JetForm) -> Result<JetForm, FormError> {
    let n = a.n;
    if a.r + b.r > n {
        return Err(FormError::DegreeOverflow { p: a.r, q: b.r, n });
    }
    let ba = Basis::new(n, a.r);
    let bb = Basis::new(n, b.r);
    let out = Basis::new(n, a.r + b.r);
    let space = a.comps[0].space().clone();
    let comps = out
        .iter()
        .map(|k| {
            let mut acc = Jet::zero(&space);
            for part in k.indices().iter().copied().combinations(a.r) {
                let rest: Vec<usize> = k
                    .indices()
                    .iter()
                    .copied()
                    .filter(|i| !part.contains(i))
                    .collect();
                let s = shuffle_sign(&part, &rest);
                acc.add_scaled(s, &(&a.comps[ba.rank(&part)] * &b.comps[bb.rank(&rest)]));
            }
            acc
        })
        .collect();
    Ok(JetForm {
        n,
        r: a.r + b.r,
        comps,
    })
}

/// Anything that can produce the Taylor data of a form at a point.
pub trait FormField: Send + Sync {
    fn dim(&self) -> usize;
    fn degree(&self) -> usize;
    fn jet_at(&self, geo: &LocalGeometry) -> Result<JetForm, FormError>;
}

/// Lazy Hodge star of another field.
pub struct Starred<F>(pub F);

impl<F: FormField> FormField for Starred<F> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn degree(&self) -> usize {
        self.0.dim() - self.0.degree()
    }

    fn jet_at(&self, geo: &LocalGeometry) -> Result<JetForm, FormError> {
        Ok(hodge_star(&self.0.jet_at(geo)?, geo))
    }
}

impl<F: FormField + ?Sized> FormField for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn degree(&self) -> usize {
        (**self).degree()
    }

    fn jet_at(&self, geo: &LocalGeometry) -> Result<JetForm, FormError> {
        (**self).jet_at(geo)
    }
}

impl<F: FormField + ?Sized> FormField for Box<F> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn degree(&self) -> usize {
        (**self).degree()
    }

    fn jet_at(&self, geo: &LocalGeometry) -> Result<JetForm, FormError> {
        (**self).jet_at(geo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::geometry::{make_round_sphere, standard_torus};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn enumeration() {
        let one = |v: &[Vec<usize>]| -> Vec<MultiIndex> {
            v.iter()
                .map(|x| MultiIndex::one_based(x, 3).unwrap())
                .collect()
        };
        assert_eq!(
            enumerate_multiindices(3, 1).unwrap(),
            one(&[vec![1], vec![2], vec![3]])
        );
        assert_eq!(
            enumerate_multiindices(3, 2).unwrap(),
            one(&[vec![1, 2], vec![1, 3], vec![2, 3]])
        );
        assert_eq!(enumerate_multiindices(4, 2).unwrap().len(), 6);
        assert!(matches!(
            enumerate_multiindices(3, 4),
            Err(FormError::DegreeOutOfRange { r: 4, n: 3 })
        ));
        assert!(MultiIndex::one_based(&[2, 1], 3).is_err());
        assert!(MultiIndex::one_based(&[1, 4], 3).is_err());
    }

    #[test]
    fn ranking_matches_enumeration() {
        for n in 1..=6 {
            for r in 0..=n {
                let b = Basis::new(n, r);
                for (k, m) in b.iter().enumerate() {
                    assert_eq!(b.rank(m.indices()), k);
                }
            }
        }
        let b = Basis::new(4, 3);
        assert_eq!(b.signed_rank(&[2, 0, 3]), Some((b.rank(&[0, 2, 3]), -1.0)));
        assert_eq!(b.signed_rank(&[2, 3, 0]), Some((b.rank(&[0, 2, 3]), 1.0)));
        assert_eq!(b.signed_rank(&[1, 1, 3]), None);
    }

    fn random_form(geo: &LocalGeometry, r: usize, rng: &mut ChaCha8Rng) -> JetForm {
        let n = geo.dim();
        let comps = (0..binomial(n, r))
            .map(|_| Jet::constant(geo.space(), rng.random::<f64>() - 0.5))
            .collect();
        JetForm::from_components(n, r, comps)
    }

    #[test]
    fn flat_star_of_dx1() {
        let t = standard_torus(3).unwrap();
        let geo = t.local(&[0.3, 0.2, 0.1], 0).unwrap();
        let mut w = JetForm::zeros(geo.space(), 3, 1);
        w.components_mut()[0] = Jet::constant(geo.space(), 1.0);
        let s = hodge_star(&w, &geo);
        assert_eq!(s.values(), vec![0.0, 0.0, 1.0]); // (1,2),(1,3),(2,3)
    }

    #[test]
    fn star_involution_and_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = make_round_sphere(3, 1.0).unwrap();
        for p in s.sample_points(10, 4) {
            let geo = s.local(&p, 0).unwrap();
            for r in 0..=3 {
                let w = random_form(&geo, r, &mut rng);
                let v = random_form(&geo, r, &mut rng);
                let ss = hodge_star(&hodge_star(&w, &geo), &geo);
                let sign = if (r * (3 - r)) % 2 == 0 { 1.0 } else { -1.0 };
                for (a, b) in ss.values().iter().zip(w.values()) {
                    assert!((a - sign * b).abs() <= 1e-12);
                }
                let lhs = jet_inner(&hodge_star(&w, &geo), &hodge_star(&v, &geo), &geo);
                let rhs = jet_inner(&w, &v, &geo);
                assert!((lhs - rhs).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn sphere_star_matches_direct_formula() {
        let s = make_round_sphere(2, 1.0).unwrap();
        let p = [0.3, -0.4];
        let geo = s.local(&p, 0).unwrap();
        let mut w = JetForm::zeros(geo.space(), 2, 1);
        w.components_mut()[0] = Jet::constant(geo.space(), 1.0);
        let star = hodge_star(&w, &geo).values();
        let g = s.metric_at(&p).unwrap();
        let ginv = g.clone().try_inverse().unwrap();
        let vol = g.determinant().sqrt();
        // *(dx1) = √g (g^{11} dx2 − g^{21} dx1)
        assert!((star[0] + vol * ginv[(1, 0)]).abs() < 1e-14);
        assert!((star[1] - vol * ginv[(0, 0)]).abs() < 1e-14);
    }

    #[test]
    fn pointwise_inner_flat_and_sphere() {
        let t = standard_torus(3).unwrap();
        let dx1 = ExprForm::basis_form(3, &[1]).unwrap();
        let dx2 = ExprForm::basis_form(3, &[2]).unwrap();
        let p = [1.0, 2.0, 3.0];
        assert_eq!(dx1.pointwise_inner(&dx1, &t, &p).unwrap(), 1.0);
        assert_eq!(dx1.pointwise_inner(&dx2, &t, &p).unwrap(), 0.0);
        let s = make_round_sphere(2, 1.0).unwrap();
        let e1 = ExprForm::basis_form(2, &[1]).unwrap();
        let q = [0.3, -0.4];
        let ginv = s.metric_at(&q).unwrap().try_inverse().unwrap();
        let got = e1.pointwise_inner(&e1, &s, &q).unwrap();
        assert!((got - ginv[(0, 0)]).abs() < 1e-14);
    }

    #[test]
    fn wedge_associative_and_graded_commutative() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = standard_torus(4).unwrap();
        let geo = t.local(&[0.1, 0.2, 0.3, 0.4], 0).unwrap();
        for (p, q, r) in [(1, 1, 1), (1, 2, 1), (2, 1, 1), (1, 1, 2)] {
            let a = random_form(&geo, p, &mut rng);
            let b = random_form(&geo, q, &mut rng);
            let c = random_form(&geo, r, &mut rng);
            let l = jet_wedge(&jet_wedge(&a, &b).unwrap(), &c).unwrap();
            let rr = jet_wedge(&a, &jet_wedge(&b, &c).unwrap()).unwrap();
            for (x, y) in l.values().iter().zip(rr.values()) {
                assert!((x - y).abs() <= 1e-12);
            }
            let ab = jet_wedge(&a, &b).unwrap();
            let ba = jet_wedge(&b, &a).unwrap();
            let sign = if (p * q) % 2 == 0 { 1.0 } else { -1.0 };
            for (x, y) in ab.values().iter().zip(ba.values()) {
                assert!((x - sign * y).abs() <= 1e-12);
            }
        }
        assert!(jet_wedge(
            &random_form(&geo, 3, &mut rng),
            &random_form(&geo, 2, &mut rng)
        )
        .is_err());
    }

    #[test]
    fn star_field_has_complementary_degree() {
        let w = ExprForm::from_components(
            3,
            1,
            [(
                MultiIndex::one_based(&[1], 3).unwrap(),
                parse("sin(x2)", 3).unwrap(),
            )],
        )
        .unwrap();
        let s = Starred(&w);
        assert_eq!(s.degree(), 2);
    }
}
