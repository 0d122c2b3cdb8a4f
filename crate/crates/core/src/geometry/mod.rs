//! Model Riemannian charts and pointwise curvature.
//!
//! Curvature sign convention: `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z`,
//! `R(X,Y,Z,W) = g(R(X,Y)Z, W)`, sectional curvature
//! `K(X,Y) = R(X,Y,Y,X) / (|X|²|Y|² − g(X,Y)²)`. Round spheres have `K > 0`.
//!
//! Metric data is turned into Taylor jets at a point ([`LocalGeometry`]),
//! so Christoffel symbols and curvature come from exact derivatives of the
//! metric expressions.

mod fixture;

use std::sync::{Arc, OnceLock};

use itertools::Itertools;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{EvalError, Expression};
use crate::jet::{Jet, JetSpace};

pub use fixture::{parse_chart_fixture, ChartFixtureError};

/// Human-readable statement of the curvature convention, copied into reports.
pub const CURVATURE_CONVENTION: &str =
    "R(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z; \
R(X,Y,Z,W) = g(R(X,Y)Z,W); K(X,Y) = R(X,Y,Y,X)/(|X|^2|Y|^2 - g(X,Y)^2); \
Weitzenboeck term calibrated so that F_r = r(n-r)C on constant curvature C";

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("curvature {got} has the wrong sign for {model}")]
    CurvatureSign { model: &'static str, got: f64 },
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("point {point:?} is outside the chart domain")]
    OutsideDomain { point: Vec<f64> },
    #[error("metric is not positive definite at {point:?}")]
    NotPositiveDefinite { point: Vec<f64> },
    #[error("metric is not symmetric: g[{i}][{j}] differs from g[{j}][{i}]")]
    NotSymmetric { i: usize, j: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// One coordinate interval of the chart box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub periodic: bool,
}

impl Axis {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            periodic: false,
        }
    }

    pub fn periodic(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            periodic: true,
        }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Which model a chart realises; determines which identity hypotheses hold.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelTag {
    FlatTorus,
    RoundSphere(f64),
    PoincareBall(f64),
    ConformallyFlat(Expression),
    Custom,
}

impl ModelTag {
    pub fn name(&self) -> String {
        match self {
            ModelTag::FlatTorus => "flat-torus".into(),
            ModelTag::RoundSphere(c) => format!("round-sphere({c})"),
            ModelTag::PoincareBall(c) => format!("poincare-ball({c})"),
            ModelTag::ConformallyFlat(f) => format!("conformally-flat({f})"),
            ModelTag::Custom => "custom".into(),
        }
    }
}

/// A single coordinate chart with metric components given as expressions.
#[derive(Debug, Clone)]
pub struct MetricChart {
    n: usize,
    axes: Vec<Axis>,
    // row-major, symmetric
    g: Vec<Expression>,
    label: ModelTag,
}

impl MetricChart {
    /// General chart. Checks symmetry and positive definiteness at a few
    /// seeded interior points.
    pub fn custom(
        n: usize,
        axes: Vec<Axis>,
        g: Vec<Expression>,
        label: ModelTag,
    ) -> Result<Self, GeometryError> {
        if n < 2 {
            return Err(GeometryError::DimensionTooSmall(n));
        }
        if axes.len() != n || g.len() != n * n {
            return Err(GeometryError::InvalidDomain(format!(
                "expected {n} axes and {} metric entries",
                n * n
            )));
        }
        for a in &axes {
            if !(a.lo < a.hi) || !a.lo.is_finite() || !a.hi.is_finite() {
                return Err(GeometryError::InvalidDomain(format!(
                    "empty or unbounded interval [{}, {}]",
                    a.lo, a.hi
                )));
            }
        }
        for (i, j) in (0..n).tuple_combinations() {
            if g[i * n + j] != g[j * n + i] {
                return Err(GeometryError::NotSymmetric { i: i + 1, j: j + 1 });
            }
        }
        if let Some(v) = g.iter().filter_map(|e| e.max_var()).max() {
            if v >= n {
                return Err(GeometryError::InvalidDomain(format!(
                    "metric references x{} in dimension {n}",
                    v + 1
                )));
            }
        }
        let chart = Self { n, axes, g, label };
        for p in chart.sample_points(8, 0x5eed) {
            chart.metric_at(&p)?;
        }
        Ok(chart)
    }

    /// Same metric restricted to a smaller coordinate box.
    pub fn with_axes(&self, axes: Vec<Axis>) -> Result<Self, GeometryError> {
        Self::custom(self.n, axes, self.g.clone(), self.label.clone())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn label(&self) -> &ModelTag {
        &self.label
    }

    pub fn metric_entry(&self, i: usize, j: usize) -> &Expression {
        &self.g[i * self.n + j]
    }

    pub fn is_flat_torus(&self) -> bool {
        matches!(self.label, ModelTag::FlatTorus)
    }

    /// Constant sectional curvature, when the model guarantees one.
    pub fn constant_curvature(&self) -> Option<f64> {
        match self.label {
            ModelTag::FlatTorus => Some(0.0),
            ModelTag::RoundSphere(c) | ModelTag::PoincareBall(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_conformally_flat(&self) -> bool {
        !matches!(self.label, ModelTag::Custom)
    }

    /// Torus volume, when every axis is periodic.
    pub fn periodic_volume(&self) -> Option<f64> {
        self.axes
            .iter()
            .all(|a| a.periodic)
            .then(|| self.axes.iter().map(Axis::len).product())
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.n
            && self
                .axes
                .iter()
                .zip(p)
                .all(|(a, &x)| a.periodic || (x >= a.lo && x <= a.hi))
    }

    /// Seeded sample of interior points, drawn from the central 90% of the box.
    pub fn sample_points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                self.axes
                    .iter()
                    .map(|a| a.lo + (0.05 + 0.9 * rng.random::<f64>()) * a.len())
                    .collect()
            })
            .collect()
    }

    /// Metric matrix at a point; fails unless it is positive definite.
    pub fn metric_at(&self, p: &[f64]) -> Result<DMatrix<f64>, GeometryError> {
        if !self.contains(p) {
            return Err(GeometryError::OutsideDomain { point: p.to_vec() });
        }
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m[(i, j)] = self.g[i * self.n + j].evaluate(p)?;
            }
        }
        if m.clone().cholesky().is_none() {
            return Err(GeometryError::NotPositiveDefinite { point: p.to_vec() });
        }
        Ok(m)
    }

    /// Taylor data of the metric at `p`, exact up to `order` derivatives.
    pub fn local(&self, p: &[f64], order: usize) -> Result<LocalGeometry, GeometryError> {
        LocalGeometry::new(self, p, order)
    }

    pub fn curvature_at(&self, p: &[f64]) -> Result<CurvatureAtPoint, GeometryError> {
        let geo = self.local(p, 2)?;
        Ok(geo.curvature_values())
    }

    /// Matrix of the curvature operator on 2-forms in an orthonormal frame at
    /// `p`, indexed by increasing pairs `(a,b)`. Positive on round spheres.
    pub fn curvature_operator_at(&self, p: &[f64]) -> Result<DMatrix<f64>, GeometryError> {
        let geo = self.local(p, 2)?;
        let curv = geo.curvature_values();
        let frame = geo.orthonormal_frame();
        let n = self.n;
        let pairs: Vec<(usize, usize)> = (0..n).tuple_combinations().collect();
        let rf = |a: usize, b: usize, c: usize, d: usize| {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            acc += curv.riemann(i, j, k, l)
                                * frame[(i, a)]
                                * frame[(j, b)]
                                * frame[(k, c)]
                                * frame[(l, d)];
                        }
                    }
                }
            }
            acc
        };
        let m = pairs.len();
        let mut out = DMatrix::zeros(m, m);
        for (x, &(a, b)) in pairs.iter().enumerate() {
            for (y, &(c, d)) in pairs.iter().enumerate() {
                out[(x, y)] = rf(a, b, d, c);
            }
        }
        Ok(out)
    }
}

fn euclidean_norm_sq(n: usize) -> Expression {
    (0..n).fold(Expression::zero(), |acc, i| {
        Expression::add(&acc, &Expression::powi(&Expression::var(i), 2))
    })
}

fn diagonal_metric(n: usize, factor: &Expression) -> Vec<Expression> {
    let mut g = vec![Expression::zero(); n * n];
    for i in 0..n {
        g[i * n + i] = factor.clone();
    }
    g
}

// 4/(1 + C|x|^2)^2, the stereographic conformal factor of curvature C.
fn stereographic_factor(n: usize, c: f64) -> Expression {
    let den = Expression::add(
        &Expression::one(),
        &Expression::mul(&Expression::num(c), &euclidean_norm_sq(n)),
    );
    Expression::div(&Expression::num(4.0), &Expression::powi(&den, 2))
}

pub fn make_flat_torus(n: usize, periods: &[f64]) -> Result<MetricChart, GeometryError> {
    if n < 2 {
        return Err(GeometryError::DimensionTooSmall(n));
    }
    if periods.len() != n || periods.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return Err(GeometryError::InvalidDomain(format!(
            "torus needs {n} positive periods, got {periods:?}"
        )));
    }
    let axes = periods.iter().map(|&l| Axis::periodic(0.0, l)).collect();
    MetricChart::custom(
        n,
        axes,
        diagonal_metric(n, &Expression::one()),
        ModelTag::FlatTorus,
    )
}

/// Flat torus with all periods `2π`.
pub fn standard_torus(n: usize) -> Result<MetricChart, GeometryError> {
    make_flat_torus(n, &vec![2.0 * std::f64::consts::PI; n])
}

/// Stereographic chart of the round sphere of curvature `c`, on the box
/// `[-1/√c, 1/√c]^n`.
pub fn make_round_sphere(n: usize, c: f64) -> Result<MetricChart, GeometryError> {
    if !(c > 0.0) {
        return Err(GeometryError::CurvatureSign {
            model: "round sphere",
            got: c,
        });
    }
    let a = 1.0 / c.sqrt();
    let axes = vec![Axis::new(-a, a); n];
    MetricChart::custom(
        n,
        axes,
        diagonal_metric(n, &stereographic_factor(n, c)),
        ModelTag::RoundSphere(c),
    )
}

/// Poincaré ball model of curvature `c < 0`; the box is kept inside the
/// ball of radius `1/√|c|` where the conformal factor is finite.
pub fn make_poincare_ball(n: usize, c: f64) -> Result<MetricChart, GeometryError> {
    if !(c < 0.0) {
        return Err(GeometryError::CurvatureSign {
            model: "Poincare ball",
            got: c,
        });
    }
    let a = 0.9 / (n as f64 * -c).sqrt();
    let axes = vec![Axis::new(-a, a); n];
    MetricChart::custom(
        n,
        axes,
        diagonal_metric(n, &stereographic_factor(n, c)),
        ModelTag::PoincareBall(c),
    )
}

/// `g = e^{2f} δ` on the box `[-1, 1]^n`.
pub fn make_conformally_flat(n: usize, f: &Expression) -> Result<MetricChart, GeometryError> {
    let factor = Expression::exp(&Expression::mul(&Expression::num(2.0), f));
    MetricChart::custom(
        n,
        vec![Axis::new(-1.0, 1.0); n],
        diagonal_metric(n, &factor),
        ModelTag::ConformallyFlat(f.clone()),
    )
}

/// Index helper for `n×n×n` arrays stored row-major.
#[inline]
fn i3(n: usize, a: usize, b: usize, c: usize) -> usize {
    (a * n + b) * n + c
}

#[inline]
fn i4(n: usize, a: usize, b: usize, c: usize, d: usize) -> usize {
    ((a * n + b) * n + c) * n + d
}

/// Curvature jets derived from the metric at a point.
#[derive(Debug)]
pub struct CurvatureJets {
    /// `R_{ijkl}`.
    pub riemann: Vec<Jet>,
    /// `Ric_{jk}`.
    pub ricci: Vec<Jet>,
    pub scalar: Jet,
}

/// Metric, inverse metric, volume density and Christoffel symbols as Taylor
/// jets at one point.
#[derive(Debug)]
pub struct LocalGeometry {
    n: usize,
    point: Vec<f64>,
    space: Arc<JetSpace>,
    g: Vec<Jet>,
    ginv: Vec<Jet>,
    sqrt_det: Jet,
    gamma: Vec<Jet>,
    curvature: OnceLock<CurvatureJets>,
    form_metrics: Vec<OnceLock<Vec<Jet>>>,
}

impl LocalGeometry {
    pub fn new(chart: &MetricChart, p: &[f64], order: usize) -> Result<Self, GeometryError> {
        let n = chart.n;
        chart.metric_at(p)?;
        let space = JetSpace::new(n, order);
        let coords: Vec<Jet> = p
            .iter()
            .enumerate()
            .map(|(i, &v)| Jet::variable(&space, i, v))
            .collect();
        let mut g = Vec::with_capacity(n * n);
        for e in &chart.g {
            g.push(e.eval_jet(&coords)?);
        }
        let (ginv, det) = invert(n, &g)
            .ok_or_else(|| GeometryError::NotPositiveDefinite { point: p.to_vec() })?;
        let sqrt_det = det
            .sqrt()
            .ok_or_else(|| GeometryError::NotPositiveDefinite { point: p.to_vec() })?;

        let mut gamma = Vec::with_capacity(n * n * n);
        if order == 0 {
            gamma.resize(n * n * n, Jet::zero(&space));
        } else {
            // first-kind symbols [jk, l] = ½(∂_j g_lk + ∂_k g_lj − ∂_l g_jk)
            let dg: Vec<Vec<Jet>> = (0..n)
                .map(|a| g.iter().map(|e| e.deriv(a)).collect())
                .collect();
            let mut first = Vec::with_capacity(n * n * n);
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut t = dg[j][l * n + k].clone();
                        t.add_scaled(1.0, &dg[k][l * n + j]);
                        t.add_scaled(-1.0, &dg[l][j * n + k]);
                        first.push(t.scale(0.5));
                    }
                }
            }
            for m in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut acc = Jet::zero(&space).truncate(order - 1);
                        for l in 0..n {
                            acc.add_scaled(1.0, &(&ginv[m * n + l] * &first[i3(n, j, k, l)]));
                        }
                        gamma.push(acc);
                    }
                }
            }
        }

        Ok(Self {
            n,
            point: p.to_vec(),
            space,
            g,
            ginv,
            sqrt_det,
            gamma,
            curvature: OnceLock::new(),
            form_metrics: (0..=n).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn point(&self) -> &[f64] {
        &self.point
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn order(&self) -> usize {
        self.space.max_order()
    }

    /// Coordinate jets `x_i` at this point.
    pub fn coords(&self) -> Vec<Jet> {
        self.point
            .iter()
            .enumerate()
            .map(|(i, &v)| Jet::variable(&self.space, i, v))
            .collect()
    }

    pub fn g(&self, i: usize, j: usize) -> &Jet {
        &self.g[i * self.n + j]
    }

    pub fn ginv(&self, i: usize, j: usize) -> &Jet {
        &self.ginv[i * self.n + j]
    }

    pub fn sqrt_det(&self) -> &Jet {
        &self.sqrt_det
    }

    /// `Γ^m_{jk}`.
    pub fn christoffel(&self, m: usize, j: usize, k: usize) -> &Jet {
        &self.gamma[i3(self.n, m, j, k)]
    }

    pub fn metric_values(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.g(i, j).value())
    }

    /// Columns are an orthonormal frame `e_a` in coordinate components,
    /// `E = L^{-T}` for the Cholesky factor `g = L L^T`.
    pub fn orthonormal_frame(&self) -> DMatrix<f64> {
        let l = self
            .metric_values()
            .cholesky()
            .expect("metric checked positive definite at construction")
            .l();
        l.try_inverse()
            .expect("Cholesky factor is invertible")
            .transpose()
    }

    /// Requires jet order ≥ 2 for meaningful values.
    pub fn curvature(&self) -> &CurvatureJets {
        self.curvature.get_or_init(|| self.assemble_curvature())
    }

    fn assemble_curvature(&self) -> CurvatureJets {
        let n = self.n;
        assert!(
            self.order() >= 2,
            "curvature needs second metric derivatives"
        );
        let low = self.order() - 2;
        let zero = Jet::zero(&self.space).truncate(low);
        // R^m_{kij} = ∂_i Γ^m_{jk} − ∂_j Γ^m_{ik} + Γ^m_{ip} Γ^p_{jk} − Γ^m_{jp} Γ^p_{ik}
        let mut up = vec![zero.clone(); n * n * n * n];
        for m in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut acc = self.christoffel(m, j, k).deriv(i);
                        acc.add_scaled(-1.0, &self.christoffel(m, i, k).deriv(j));
                        for p in 0..n {
                            acc.add_scaled(
                                1.0,
                                &(self.christoffel(m, i, p) * self.christoffel(p, j, k)),
                            );
                            acc.add_scaled(
                                -1.0,
                                &(self.christoffel(m, j, p) * self.christoffel(p, i, k)),
                            );
                        }
                        up[i4(n, m, k, i, j)] = acc;
                    }
                }
            }
        }
        let mut riemann = vec![zero.clone(); n * n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut acc = zero.clone();
                        for m in 0..n {
                            acc.add_scaled(1.0, &(self.g(l, m) * &up[i4(n, m, k, i, j)]));
                        }
                        riemann[i4(n, i, j, k, l)] = acc;
                    }
                }
            }
        }
        let mut ricci = vec![zero.clone(); n * n];
        for j in 0..n {
            for k in 0..n {
                let mut acc = zero.clone();
                for i in 0..n {
                    acc.add_scaled(1.0, &up[i4(n, i, k, i, j)]);
                }
                ricci[j * n + k] = acc;
            }
        }
        let mut scalar = zero;
        for j in 0..n {
            for k in 0..n {
                scalar.add_scaled(1.0, &(self.ginv(j, k) * &ricci[j * n + k]));
            }
        }
        CurvatureJets {
            riemann,
            ricci,
            scalar,
        }
    }

    pub fn curvature_values(&self) -> CurvatureAtPoint {
        let n = self.n;
        let c = self.curvature();
        CurvatureAtPoint {
            n,
            point: self.point.clone(),
            metric: self.g.iter().map(Jet::value).collect(),
            christoffel: self.gamma.iter().map(Jet::value).collect(),
            riemann: c.riemann.iter().map(Jet::value).collect(),
            ricci: c.ricci.iter().map(Jet::value).collect(),
            scalar: c.scalar.value(),
        }
    }

    /// Metric induced on r-forms, `G^{IK} = det(g^{-1}[I, K])` over
    /// increasing multi-indices, row-major.
    pub fn form_metric(&self, r: usize) -> &[Jet] {
        self.form_metrics[r].get_or_init(|| {
            let basis = crate::forms::Basis::new(self.n, r);
            let len = basis.len();
            let mut out = Vec::with_capacity(len * len);
            for a in basis.iter() {
                for b in basis.iter() {
                    out.push(self.minor_det(a.indices(), b.indices()));
                }
            }
            out
        })
    }

    fn minor_det(&self, rows: &[usize], cols: &[usize]) -> Jet {
        let r = rows.len();
        let mut acc = Jet::constant(&self.space, if r == 0 { 1.0 } else { 0.0 });
        if r == 0 {
            return acc;
        }
        for perm in (0..r).permutations(r) {
            let sign = permutation_sign(&perm);
            let mut term = self.ginv(rows[0], cols[perm[0]]).clone();
            for t in 1..r {
                term = &term * self.ginv(rows[t], cols[perm[t]]);
            }
            acc.add_scaled(sign, &term);
        }
        acc
    }
}

pub(crate) fn permutation_sign(perm: &[usize]) -> f64 {
    let mut inversions = 0;
    for i in 0..perm.len() {
        for j in i + 1..perm.len() {
            if perm[i] > perm[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

// Gauss-Jordan with partial pivoting on values; returns (inverse, det).
fn invert(n: usize, m: &[Jet]) -> Option<(Vec<Jet>, Jet)> {
    let space = m[0].space().clone();
    let mut a: Vec<Jet> = m.to_vec();
    let mut inv: Vec<Jet> = (0..n * n)
        .map(|k| Jet::constant(&space, if k / n == k % n { 1.0 } else { 0.0 }))
        .collect();
    let mut det = Jet::constant(&space, 1.0);
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| {
            a[x * n + col]
                .value()
                .abs()
                .total_cmp(&a[y * n + col].value().abs())
        })?;
        if a[piv * n + col].value() == 0.0 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
                inv.swap(piv * n + k, col * n + k);
            }
            det = det.scale(-1.0);
        }
        let p = a[col * n + col].clone();
        det = &det * &p;
        let pr = p.recip()?;
        for k in 0..n {
            a[col * n + k] = &a[col * n + k] * &pr;
            inv[col * n + k] = &inv[col * n + k] * &pr;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a[row * n + col].clone();
            for k in 0..n {
                let t = &f * &a[col * n + k];
                a[row * n + k].add_scaled(-1.0, &t);
                let t = &f * &inv[col * n + k];
                inv[row * n + k].add_scaled(-1.0, &t);
            }
        }
    }
    Some((inv, det))
}

/// Christoffel symbols, curvature tensor, Ricci tensor and scalar curvature
/// evaluated at one point.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureAtPoint {
    pub n: usize,
    pub point: Vec<f64>,
    pub metric: Vec<f64>,
    /// `Γ^m_{jk}` at `[(m*n + j)*n + k]`.
    pub christoffel: Vec<f64>,
    /// `R_{ijkl}` at `[((i*n + j)*n + k)*n + l]`.
    pub riemann: Vec<f64>,
    pub ricci: Vec<f64>,
    pub scalar: f64,
}

impl CurvatureAtPoint {
    pub fn christoffel(&self, m: usize, j: usize, k: usize) -> f64 {
        self.christoffel[i3(self.n, m, j, k)]
    }

    pub fn riemann(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.riemann[i4(self.n, i, j, k, l)]
    }

    pub fn ricci(&self, j: usize, k: usize) -> f64 {
        self.ricci[j * self.n + k]
    }

    fn g(&self, i: usize, j: usize) -> f64 {
        self.metric[i * self.n + j]
    }

    fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.n;
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| self.g(i, j) * x[i] * y[j])
            .sum()
    }

    /// `R(X,Y,Z,W)` for coordinate vectors.
    pub fn riemann_on(&self, x: &[f64], y: &[f64], z: &[f64], w: &[f64]) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        acc += self.riemann(i, j, k, l) * x[i] * y[j] * z[k] * w[l];
                    }
                }
            }
        }
        acc
    }

    pub fn sectional(&self, x: &[f64], y: &[f64]) -> f64 {
        let den = self.inner(x, x) * self.inner(y, y) - self.inner(x, y).powi(2);
        self.riemann_on(x, y, y, x) / den
    }

    pub fn max_abs_riemann(&self) -> f64 {
        self.riemann.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest violation of the slot antisymmetries and pair symmetry.
    pub fn symmetry_residual(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for (i, j, k, l) in (0..n)
            .cartesian_product(0..n)
            .cartesian_product(0..n)
            .cartesian_product(0..n)
            .map(|(((i, j), k), l)| (i, j, k, l))
        {
            let r = self.riemann(i, j, k, l);
            worst = worst
                .max((r + self.riemann(j, i, k, l)).abs())
                .max((r + self.riemann(i, j, l, k)).abs())
                .max((r - self.riemann(k, l, i, j)).abs());
        }
        worst
    }

    /// Largest violation of `R_{ijkl} + R_{jkil} + R_{kijl} = 0`.
    pub fn bianchi_residual(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let s = self.riemann(i, j, k, l)
                            + self.riemann(j, k, i, l)
                            + self.riemann(k, i, j, l);
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
    }

    #[test]
    fn torus_is_flat() {
        let t = standard_torus(3).unwrap();
        for p in t.sample_points(10, 1) {
            let c = t.curvature_at(&p).unwrap();
            assert!(c.christoffel.iter().all(|&v| v == 0.0));
            assert!(c.riemann.iter().all(|&v| v == 0.0));
            assert_eq!(c.scalar, 0.0);
        }
        assert_eq!(
            standard_torus(2)
                .unwrap()
                .curvature_at(&[1.0, 2.0])
                .unwrap()
                .scalar,
            0.0
        );
        assert!(matches!(
            standard_torus(1),
            Err(GeometryError::DimensionTooSmall(1))
        ));
    }

    #[test]
    fn sphere_scalar_curvature() {
        let s = make_round_sphere(2, 1.0).unwrap();
        for p in s.sample_points(20, 2) {
            let c = s.curvature_at(&p).unwrap();
            assert!((c.scalar - 2.0).abs() <= 1e-8, "{}", c.scalar);
        }
        let c = s.curvature_at(&[0.3, -0.2]).unwrap();
        assert!((c.scalar - 2.0).abs() <= 1e-8);
        assert!(make_round_sphere(3, 0.0).is_err());
        assert!(make_round_sphere(3, -1.0).is_err());
    }

    #[test]
    fn sphere_ricci_is_twice_metric() {
        let s = make_round_sphere(3, 1.0).unwrap();
        for p in s.sample_points(10, 3) {
            let c = s.curvature_at(&p).unwrap();
            for j in 0..3 {
                for k in 0..3 {
                    let want = 2.0 * c.metric[j * 3 + k];
                    assert!((c.ricci(j, k) - want).abs() <= 1e-8 * want.abs().max(1.0));
                }
            }
        }
    }

    fn check_sectional(chart: &MetricChart, c: f64, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = chart.dim();
        for p in chart.sample_points(10, seed) {
            let curv = chart.curvature_at(&p).unwrap();
            let x = rand_vec(&mut rng, n);
            let y = rand_vec(&mut rng, n);
            let k = curv.sectional(&x, &y);
            assert!(((k - c) / c).abs() <= 1e-8, "K = {k}, want {c}");
            // constant-curvature form R(X,Y,Y,X) = C(|X|²|Y|² − g(X,Y)²)
            let lhs = curv.riemann_on(&x, &y, &y, &x);
            let rhs = c * (curv.inner(&x, &x) * curv.inner(&y, &y) - curv.inner(&x, &y).powi(2));
            assert!((lhs - rhs).abs() <= 1e-8 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn constant_curvature_models() {
        check_sectional(&make_round_sphere(3, 4.0).unwrap(), 4.0, 4);
        check_sectional(&make_round_sphere(3, 1.0).unwrap(), 1.0, 5);
        check_sectional(&make_poincare_ball(3, -1.0).unwrap(), -1.0, 6);
        check_sectional(&make_poincare_ball(2, -0.5).unwrap(), -0.5, 7);
        let b = make_poincare_ball(3, -1.0).unwrap();
        for p in b.sample_points(10, 8) {
            let c = b.curvature_at(&p).unwrap();
            assert!((c.scalar + 6.0).abs() <= 1e-8);
        }
        assert!(make_poincare_ball(3, 1.0).is_err());
    }

    #[test]
    fn bianchi_and_symmetries_on_every_model() {
        let f = parse("0.3*sin(x1)+0.2*x2*cos(x3)", 3).unwrap();
        let custom_g = vec![
            parse("2+sin(x1)*x2", 3).unwrap(),
            parse("0.3*cos(x3)", 3).unwrap(),
            parse("0", 3).unwrap(),
            parse("0.3*cos(x3)", 3).unwrap(),
            parse("1+x1^2", 3).unwrap(),
            parse("0.1*x1*x2", 3).unwrap(),
            parse("0", 3).unwrap(),
            parse("0.1*x1*x2", 3).unwrap(),
            parse("exp(0.2*x3)", 3).unwrap(),
        ];
        let charts = vec![
            make_round_sphere(3, 1.0).unwrap(),
            make_poincare_ball(3, -1.0).unwrap(),
            make_conformally_flat(3, &f).unwrap(),
            MetricChart::custom(3, vec![Axis::new(-1.0, 1.0); 3], custom_g, ModelTag::Custom)
                .unwrap(),
        ];
        for chart in &charts {
            for p in chart.sample_points(100, 9) {
                let c = chart.curvature_at(&p).unwrap();
                let scale = c.max_abs_riemann().max(1e-300);
                assert!(c.bianchi_residual() <= 1e-8 * scale);
                assert!(c.symmetry_residual() <= 1e-8 * scale);
            }
        }
    }

    #[test]
    fn conformal_constructor_cases() {
        let flat = make_conformally_flat(2, &Expression::zero()).unwrap();
        let c = flat.curvature_at(&[0.1, 0.4]).unwrap();
        assert!(c.christoffel.iter().all(|v| v.abs() < 1e-15));
        let scaled = make_conformally_flat(2, &Expression::num(2f64.ln())).unwrap();
        let c = scaled.curvature_at(&[0.1, 0.4]).unwrap();
        assert!(c.christoffel.iter().all(|v| v.abs() < 1e-15));
        assert!(c.scalar.abs() < 1e-15);
        // e^{2f} = 4/(1+|x|²)²  with  f = ln 2 − ln(1+|x|²)
        let f = parse("ln(2)-ln(1+x1^2+x2^2)", 2).unwrap();
        let conf = make_conformally_flat(2, &f).unwrap();
        let sphere = make_round_sphere(2, 1.0).unwrap();
        for p in conf.sample_points(20, 10) {
            let a = conf.metric_at(&p).unwrap();
            let b = sphere.metric_at(&p).unwrap();
            assert!((a - b).abs().max() <= 1e-13);
        }
        let bad = parse("sqrt(x1)", 2).unwrap();
        assert!(make_conformally_flat(2, &bad).is_err());
    }

    #[test]
    fn curvature_operator_signs() {
        let t = standard_torus(3).unwrap();
        assert!(t
            .curvature_operator_at(&[1.0, 2.0, 3.0])
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        let s = make_round_sphere(3, 1.0).unwrap();
        for p in s.sample_points(5, 11) {
            let m = s.curvature_operator_at(&p).unwrap();
            assert!((&m - m.transpose()).abs().max() <= 1e-10);
            let ev = symmetric_eigenvalues(&m);
            assert!(ev.iter().all(|&e| e > 0.0), "{ev:?}");
            assert!(ev.iter().all(|&e| (e - 1.0).abs() < 1e-8));
        }
        let b = make_poincare_ball(3, -1.0).unwrap();
        for p in b.sample_points(5, 12) {
            let ev = symmetric_eigenvalues(&b.curvature_operator_at(&p).unwrap());
            assert!(ev.iter().all(|&e| e < 0.0), "{ev:?}");
        }
    }

    #[test]
    fn outside_domain_is_rejected() {
        let s = make_round_sphere(2, 1.0).unwrap();
        assert!(matches!(
            s.curvature_at(&[5.0, 0.0]),
            Err(GeometryError::OutsideDomain { .. })
        ));
    }

    #[test]
    fn frame_is_orthonormal() {
        let s = make_round_sphere(3, 1.0).unwrap();
        let geo = s.local(&[0.2, -0.1, 0.4], 1).unwrap();
        let e = geo.orthonormal_frame();
        let g = geo.metric_values();
        let id = e.transpose() * g * e;
        assert!((id - DMatrix::identity(3, 3)).abs().max() < 1e-13);
    }
}
