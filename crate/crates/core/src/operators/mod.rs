//! Differential operators on forms.
//!
//! The pointwise functions act on [`JetForm`]s together with a
//! [`LocalGeometry`] at the same point. Every derivative consumes one jet
//! order, so second-order operators need jets of order 2 for the form and
//! the geometry. [`fourier`] holds the exact per-mode versions on flat tori.
//!
//! Conventions:
//!
//! * `(dω)_{i0…ir} = Σ_α (−1)^α ∂_{iα} ω_{i0…îα…ir}`
//! * `(d*ω)_{I'} = −g^{jk} (∇_j ω)_{k I'}`, the formal adjoint of `d`
//! * `Δ̄ω = −g^{jk} (∇²ω)_{jk}`, `Δ = dd* + d*d = Δ̄ + F_r`
//! * `F_r(ω)_I = Σ_α Ric_{iα}^m ω_{I[α→m]} + Σ_{α<β} R^{mk}{}_{iα iβ} ω_{I[α→m,β→k]}`
//!   where `R^{mk}{}_{ab} = g^{mp} g^{kq} R_{abpq}` in the curvature convention
//!   of [`crate::geometry`]; on constant curvature `C` this is `r(n−r)C·ω`.
//! * `□ = (Δ̄ − d*d/(r+1) − dd*/(n−r+1)) / (r(r+1))`

pub mod fourier;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::forms::{hodge_star, Basis, FormError, FormField, JetForm, MixedTensor};
use crate::geometry::{GeometryError, LocalGeometry, MetricChart};
use crate::jet::Jet;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("{op} is undefined on {r}-forms in dimension {n}")]
    DegreeOutOfRange {
        op: &'static str,
        r: usize,
        n: usize,
    },
    #[error("{op} needs jets of order {needed}, got {got}")]
    JetOrder {
        op: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("no sample points")]
    NoPoints,
    #[error(transparent)]
    Form(#[from] FormError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn need_order(
    op: &'static str,
    w: &JetForm,
    geo: &LocalGeometry,
    k: usize,
) -> Result<(), OperatorError> {
    let got = w.order().min(geo.order());
    if got < k {
        return Err(OperatorError::JetOrder { op, needed: k, got });
    }
    Ok(())
}

/// Which way the Tachibana Laplacian is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    /// From the rough Laplacian.
    Rough,
    /// From the Hodge Laplacian minus the Weitzenböck term.
    Hodge,
}

pub fn exterior_d(w: &JetForm) -> Result<JetForm, OperatorError> {
    let (n, r) = (w.dim(), w.degree());
    if r >= n {
        return Err(OperatorError::DegreeOutOfRange { op: "d", r, n });
    }
    if w.order() == 0 {
        return Err(OperatorError::JetOrder {
            op: "d",
            needed: 1,
            got: 0,
        });
    }
    let src = Basis::new(n, r);
    let out = Basis::new(n, r + 1);
    let comps = out
        .iter()
        .map(|j| {
            let idx = j.indices();
            let mut acc = w.components()[0].deriv(0).scale(0.0);
            let mut rest = Vec::with_capacity(r);
            for (alpha, &ia) in idx.iter().enumerate() {
                rest.clear();
                rest.extend(idx.iter().copied().filter(|&x| x != ia));
                let s = if alpha % 2 == 0 { 1.0 } else { -1.0 };
                acc.add_scaled(s, &w.components()[src.rank(&rest)].deriv(ia));
            }
            acc
        })
        .collect();
    Ok(JetForm::from_components(n, r + 1, comps))
}

/// `(∇ω)_{j;I} = ∂_j ω_I − Σ_α Γ^m_{j iα} ω_{I[α→m]}`.
pub fn covariant_derivative(
    w: &JetForm,
    geo: &LocalGeometry,
) -> Result<MixedTensor, OperatorError> {
    need_order("covariant derivative", w, geo, 1)?;
    let (n, r) = (w.dim(), w.degree());
    let basis = Basis::new(n, r);
    let len = basis.len();
    let mut comps = Vec::with_capacity(n * len);
    let mut tuple = vec![0usize; r];
    for j in 0..n {
        for i in basis.iter() {
            let mut acc = w.components()[basis.rank(i.indices())].deriv(j);
            for alpha in 0..r {
                for m in 0..n {
                    tuple.copy_from_slice(i.indices());
                    tuple[alpha] = m;
                    if let Some((rank, s)) = basis.signed_rank(&tuple) {
                        let g = geo.christoffel(m, j, i.indices()[alpha]);
                        acc.add_scaled(-s, &(g * &w.components()[rank]));
                    }
                }
            }
            comps.push(acc);
        }
    }
    Ok(MixedTensor::from_components(n, r, comps))
}

/// `(d*ω)_{I'} = −g^{jk} (∇_j ω)_{k I'}`.
pub fn codifferential(w: &JetForm, geo: &LocalGeometry) -> Result<JetForm, OperatorError> {
    let (n, r) = (w.dim(), w.degree());
    if r == 0 {
        return Err(OperatorError::DegreeOutOfRange { op: "d*", r, n });
    }
    let t = covariant_derivative(w, geo)?;
    Ok(divergence(&t, geo))
}

fn divergence(t: &MixedTensor, geo: &LocalGeometry) -> JetForm {
    let (n, r) = (t.dim(), t.degree());
    let src = Basis::new(n, r);
    let out = Basis::new(n, r - 1);
    let low = t.components()[0].order();
    let mut tuple = vec![0usize; r];
    let comps = out
        .iter()
        .map(|ip| {
            let mut acc = Jet::zero(geo.space()).truncate(low);
            for k in 0..n {
                tuple[0] = k;
                tuple[1..].copy_from_slice(ip.indices());
                let Some((rank, s)) = src.signed_rank(&tuple) else {
                    continue;
                };
                for j in 0..n {
                    acc.add_scaled(-s, &(geo.ginv(j, k) * t.get(j, rank)));
                }
            }
            acc
        })
        .collect();
    JetForm::from_components(n, r - 1, comps)
}

/// `d* = (−1)^{n(r+1)+1} * d *`; an independent route used as a cross-check.
pub fn codifferential_via_star(w: &JetForm, geo: &LocalGeometry) -> Result<JetForm, OperatorError> {
    let (n, r) = (w.dim(), w.degree());
    if r == 0 {
        return Err(OperatorError::DegreeOutOfRange { op: "d*", r, n });
    }
    need_order("d*", w, geo, 1)?;
    let inner = exterior_d(&hodge_star(w, geo))?;
    let sign = if (n * (r + 1) + 1) % 2 == 0 {
        1.0
    } else {
        -1.0
    };
    Ok(hodge_star(&inner, geo).scale(sign))
}

/// `Δ̄ω_I = −g^{jk} (∂_j T_{k;I} − Γ^m_{jk} T_{m;I} − Σ_α Γ^m_{j iα} T_{k;I[α→m]})`
/// with `T = ∇ω`.
pub fn rough_laplacian(w: &JetForm, geo: &LocalGeometry) -> Result<JetForm, OperatorError> {
    need_order("rough Laplacian", w, geo, 2)?;
    let (n, r) = (w.dim(), w.degree());
    let t = covariant_derivative(w, geo)?;
    let basis = Basis::new(n, r);
    let mut tuple = vec![0usize; r];
    let low = t.components()[0].order() - 1;
    let comps = basis
        .iter()
        .map(|i| {
            let ri = basis.rank(i.indices());
            let mut acc = Jet::zero(geo.space()).truncate(low);
            for j in 0..n {
                for k in 0..n {
                    let gjk = geo.ginv(j, k);
                    if gjk.max_abs() == 0.0 {
                        continue;
                    }
                    let mut h = t.get(k, ri).deriv(j);
                    for m in 0..n {
                        h.add_scaled(-1.0, &(geo.christoffel(m, j, k) * t.get(m, ri)));
                    }
                    for alpha in 0..r {
                        for m in 0..n {
                            tuple.copy_from_slice(i.indices());
                            tuple[alpha] = m;
                            if let Some((rank, s)) = basis.signed_rank(&tuple) {
                                let g = geo.christoffel(m, j, i.indices()[alpha]);
                                h.add_scaled(-s, &(g * t.get(k, rank)));
                            }
                        }
                    }
                    acc.add_scaled(-1.0, &(gjk * &h));
                }
            }
            acc
        })
        .collect();
    Ok(JetForm::from_components(n, r, comps))
}

/// `d*dω`, or zero for top-degree forms.
pub fn codiff_of_d(w: &JetForm, geo: &LocalGeometry) -> Result<JetForm, OperatorError> {
    if w.degree() == w.dim() {
        return Ok(zero_like(w, geo, w.order().saturating_sub(2)));
    }
    codifferential(&exterior_d(w)?, geo)
}

/// `dd*ω`, or zero for functions.
pub fn d_of_codiff(w: &JetForm, geo: &LocalGeometry) -> Result<JetForm, OperatorError> {
    if w.degree() == 0 {
        return Ok(zero_like(w, geo, w.order().saturating_sub(2)));
    }
    exterior_d(&codifferential(w, geo)?)
}

fn zero_like(w: &JetForm, geo: &LocalGeometry, order: usize) -> JetForm {
    let mut z = JetForm::zeros(geo.space(), w.dim(), w.degree());
    for c in z.components_mut() {
        *c = c.truncate(order);
    }
    z
}

pub fn hodge_laplacian(w: &JetForm, geo: &LocalGeometry) -> Result<JetForm, OperatorError> {
    need_order("Hodge Laplacian", w, geo, 2)?;
    Ok(codiff_of_d(w, geo)?.axpy(1.0, &d_of_codiff(w, geo)?))
}

pub fn weitzenbock_term(w: &JetForm, geo: &LocalGeometry) -> Result<JetForm, OperatorError> {
    let (n, r) = (w.dim(), w.degree());
    if geo.order() < 2 {
        return Err(OperatorError::JetOrder {
            op: "Weitzenböck term",
            needed: 2,
            got: geo.order(),
        });
    }
    let curv = geo.curvature();
    let basis = Basis::new(n, r);
    let low = curv.scalar.order();
    // Ric_a^m and R^{mk}_{ab}
    let mut ric_up = vec![Jet::zero(geo.space()).truncate(low); n * n];
    for a in 0..n {
        for m in 0..n {
            for p in 0..n {
                ric_up[a * n + m].add_scaled(1.0, &(&curv.ricci[a * n + p] * geo.ginv(p, m)));
            }
        }
    }
    let riem =
        |a: usize, b: usize, p: usize, q: usize| &curv.riemann[((a * n + b) * n + p) * n + q];
    let mut pair =
        vec![Jet::zero(geo.space()).truncate(low); if r >= 2 { n * n * n * n } else { 0 }];
    if r >= 2 {
        for a in 0..n {
            for b in 0..n {
                for m in 0..n {
                    for k in 0..n {
                        let mut acc = Jet::zero(geo.space()).truncate(low);
                        for p in 0..n {
                            for q in 0..n {
                                let gg = geo.ginv(m, p) * geo.ginv(k, q);
                                acc.add_scaled(1.0, &(&gg * riem(a, b, p, q)));
                            }
                        }
                        pair[((m * n + k) * n + a) * n + b] = acc;
                    }
                }
            }
        }
    }
    let mut tuple = vec![0usize; r];
    let comps = basis
        .iter()
        .map(|i| {
            let idx = i.indices();
            let mut acc = Jet::zero(geo.space()).truncate(low);
            for alpha in 0..r {
                for m in 0..n {
                    tuple.copy_from_slice(idx);
                    tuple[alpha] = m;
                    if let Some((rank, s)) = basis.signed_rank(&tuple) {
                        acc.add_scaled(s, &(&ric_up[idx[alpha] * n + m] * &w.components()[rank]));
                    }
                }
            }
            for alpha in 0..r {
                for beta in alpha + 1..r {
                    for m in 0..n {
                        for k in 0..n {
                            tuple.copy_from_slice(idx);
                            tuple[alpha] = m;
                            tuple[beta] = k;
                            if let Some((rank, s)) = basis.signed_rank(&tuple) {
                                let c = &pair[((m * n + k) * n + idx[alpha]) * n + idx[beta]];
                                acc.add_scaled(s, &(c * &w.components()[rank]));
                            }
                        }
                    }
                }
            }
            acc
        })
        .collect();
    Ok(JetForm::from_components(n, r, comps))
}

fn check_tachibana_degree(op: &'static str, n: usize, r: usize) -> Result<(), OperatorError> {
    if r == 0 || r >= n {
        return Err(OperatorError::DegreeOutOfRange { op, r, n });
    }
    Ok(())
}

pub fn tachibana_laplacian(
    w: &JetForm,
    geo: &LocalGeometry,
    route: Route,
) -> Result<JetForm, OperatorError> {
    let (n, r) = (w.dim(), w.degree());
    check_tachibana_degree("Tachibana Laplacian", n, r)?;
    let (rf, nf) = (r as f64, n as f64);
    let lead = match route {
        Route::Rough => rough_laplacian(w, geo)?,
        Route::Hodge => hodge_laplacian(w, geo)?.axpy(-1.0, &weitzenbock_term(w, geo)?),
    };
    let out = lead
        .axpy(-1.0 / (rf + 1.0), &codiff_of_d(w, geo)?)
        .axpy(-1.0 / (nf - rf + 1.0), &d_of_codiff(w, geo)?);
    Ok(out.scale(1.0 / (rf * (rf + 1.0))))
}

/// The three parts of `∇ω`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum DPart {
    D1,
    D2,
    D3,
}

#[derive(Debug, Clone)]
pub struct DDecomposition {
    pub nabla: MixedTensor,
    pub d1: MixedTensor,
    pub d2: MixedTensor,
    pub d3: MixedTensor,
}

impl DDecomposition {
    pub fn part(&self, which: DPart) -> &MixedTensor {
        match which {
            DPart::D1 => &self.d1,
            DPart::D2 => &self.d2,
            DPart::D3 => &self.d3,
        }
    }
}

/// Splits `∇ω` into `D1 = (1/(r+1)) dω`, `D2 = −(1/(n−r+1)) g∧d*ω` and the
/// remainder `D3`, each embedded as a `(0,1)⊗r` tensor `T_{j;I}`:
///
/// * `D1_{j;I} = (dω)_{jI} / (r+1)`
/// * `D2_{j;I} = −Σ_α (−1)^α g_{j iα} (d*ω)_{I∖iα} / (n−r+1)`
///
/// The three parts are pointwise orthogonal.
pub fn d_decomposition(w: &JetForm, geo: &LocalGeometry) -> Result<DDecomposition, OperatorError> {
    let (n, r) = (w.dim(), w.degree());
    check_tachibana_degree("D-operator split", n, r)?;
    let nabla = covariant_derivative(w, geo)?;
    let dw = exterior_d(w)?;
    let cw = codifferential(w, geo)?;
    let low = nabla.components()[0].order();
    let basis = Basis::new(n, r);
    let up = Basis::new(n, r + 1);
    let down = Basis::new(n, r - 1);
    let len = basis.len();
    let (rf, nf) = (r as f64, n as f64);
    let mut d1 = Vec::with_capacity(n * len);
    let mut d2 = Vec::with_capacity(n * len);
    let mut tuple = vec![0usize; r + 1];
    let mut rest = Vec::with_capacity(r);
    for j in 0..n {
        for i in basis.iter() {
            let idx = i.indices();
            tuple[0] = j;
            tuple[1..].copy_from_slice(idx);
            d1.push(match up.signed_rank(&tuple) {
                Some((rank, s)) => dw.components()[rank].scale(s / (rf + 1.0)),
                None => Jet::zero(geo.space()).truncate(low),
            });
            let mut acc = Jet::zero(geo.space()).truncate(low);
            for (alpha, &ia) in idx.iter().enumerate() {
                rest.clear();
                rest.extend(idx.iter().copied().filter(|&x| x != ia));
                let s = if alpha % 2 == 0 { 1.0 } else { -1.0 };
                acc.add_scaled(s, &(geo.g(j, ia) * &cw.components()[down.rank(&rest)]));
            }
            d2.push(acc.scale(-1.0 / (nf - rf + 1.0)));
        }
    }
    let d1 = MixedTensor::from_components(n, r, d1);
    let d2 = MixedTensor::from_components(n, r, d2);
    let d3 = nabla.axpy(-1.0, &d1).axpy(-1.0, &d2);
    Ok(DDecomposition { nabla, d1, d2, d3 })
}

pub fn apply_d_operator(
    which: DPart,
    w: &JetForm,
    geo: &LocalGeometry,
) -> Result<MixedTensor, OperatorError> {
    Ok(d_decomposition(w, geo)?.part(which).clone())
}

/// Operators that produce a form, for batch evaluation over points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operator {
    ExteriorD,
    Codifferential,
    CodifferentialViaStar,
    RoughLaplacian,
    HodgeLaplacian,
    Weitzenbock,
    Tachibana(Route),
    Star,
}

impl Operator {
    pub fn provenance(self) -> &'static str {
        match self {
            Operator::ExteriorD => "exterior derivative",
            Operator::Codifferential => "codifferential via covariant divergence",
            Operator::CodifferentialViaStar => "codifferential via star-d-star",
            Operator::RoughLaplacian => "rough Laplacian",
            Operator::HodgeLaplacian => "Hodge Laplacian dd* + d*d",
            Operator::Weitzenbock => "Weitzenböck curvature term",
            Operator::Tachibana(Route::Rough) => "tachibana via rough Laplacian",
            Operator::Tachibana(Route::Hodge) => {
                "tachibana via Hodge Laplacian and Weitzenböck term"
            }
            Operator::Star => "Hodge star",
        }
    }

    pub fn output_degree(self, n: usize, r: usize) -> usize {
        match self {
            Operator::ExteriorD => r + 1,
            Operator::Codifferential | Operator::CodifferentialViaStar => r.saturating_sub(1),
            Operator::Star => n - r,
            _ => r,
        }
    }

    pub fn apply(self, w: &JetForm, geo: &LocalGeometry) -> Result<JetForm, OperatorError> {
        match self {
            Operator::ExteriorD => exterior_d(w),
            Operator::Codifferential => codifferential(w, geo),
            Operator::CodifferentialViaStar => codifferential_via_star(w, geo),
            Operator::RoughLaplacian => rough_laplacian(w, geo),
            Operator::HodgeLaplacian => hodge_laplacian(w, geo),
            Operator::Weitzenbock => weitzenbock_term(w, geo),
            Operator::Tachibana(route) => tachibana_laplacian(w, geo, route),
            Operator::Star => Ok(hodge_star(w, geo)),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PointValue {
    pub point: Vec<f64>,
    pub components: Vec<f64>,
    pub norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OperatorResult {
    pub provenance: &'static str,
    pub degree: usize,
    pub values: Vec<PointValue>,
}

impl OperatorResult {
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm).fold(0.0, f64::max)
    }
}

/// Jet order used for batch evaluation; enough for every second-order
/// operator.
pub const DEFAULT_ORDER: usize = 2;

/// Evaluates `op(ω)` at each point, in parallel, keeping point order.
pub fn apply_operator(
    op: Operator,
    field: &dyn FormField,
    chart: &MetricChart,
    points: &[Vec<f64>],
) -> Result<OperatorResult, OperatorError> {
    if points.is_empty() {
        return Err(OperatorError::NoPoints);
    }
    let values = points
        .par_iter()
        .map(|p| {
            let geo = chart.local(p, DEFAULT_ORDER)?;
            let w = field.jet_at(&geo)?;
            let out = op.apply(&w, &geo)?;
            Ok(PointValue {
                point: p.clone(),
                components: out.values(),
                norm: crate::forms::jet_norm(&out, &geo),
            })
        })
        .collect::<Result<Vec<_>, OperatorError>>()?;
    Ok(OperatorResult {
        provenance: op.provenance(),
        degree: op.output_degree(field.dim(), field.degree()),
        values,
    })
}

/// `sup_p |ω|_g` over the points.
pub fn sup_norm(
    field: &dyn FormField,
    chart: &MetricChart,
    points: &[Vec<f64>],
) -> Result<f64, OperatorError> {
    let norms = points
        .par_iter()
        .map(|p| {
            let geo = chart.local(p, 0)?;
            Ok(crate::forms::jet_norm(&field.jet_at(&geo)?, &geo))
        })
        .collect::<Result<Vec<f64>, OperatorError>>()?;
    Ok(norms.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests;
