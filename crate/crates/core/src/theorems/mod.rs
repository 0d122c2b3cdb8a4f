//! Pointwise verification of the Laplacian identities on model charts.
//!
//! Each [`IdentityId`] names one relation between `Δ`, `Δ̄`, `□`, `F_r`, `d`
//! and `d*`. A check evaluates `LHS − RHS` at sample points and reports
//! `sup |LHS − RHS|_g / sup |ω|_g`. Hypotheses on the chart (conformal
//! flatness with `n = 2r`, constant curvature and its sign) and on the form
//! (its class in the conformal Killing lattice) are checked first; a
//! violated hypothesis is an error, never a silent pass.
//!
//! Conformally flat identities use the scalar curvature `s` at each point.
//! Constant-curvature identities use the curvature `C` declared by the chart
//! label, so a mislabeled chart fails.

mod catalogue;
mod construct;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::classify::{classify, ClassifyError, FormClass, SampleSet};
use crate::forms::{jet_norm, FormError, FormField, JetForm};
use crate::geometry::{GeometryError, LocalGeometry, MetricChart};
use crate::operators::{
    codiff_of_d, d_of_codiff, hodge_laplacian, rough_laplacian, tachibana_laplacian,
    weitzenbock_term, OperatorError, Route, DEFAULT_ORDER,
};

pub use catalogue::{
    default_catalogue, hypothesis_violation_catalogue, parse_catalogue, run_catalogue,
    CatalogueEntry, CatalogueRow, ChartSpec, FormSpec, LoadedForm, RowStatus, DEFAULT_POINTS,
};
pub use construct::{decomposition_check, parallel_wedge_witness, Decomposition, WedgeWitness};

#[derive(Debug, Error)]
pub enum TheoremError {
    #[error("{id}: hypothesis not satisfied: {reason}")]
    Hypothesis { id: IdentityId, reason: String },
    #[error("unknown identity `{0}`")]
    UnknownIdentity(String),
    #[error("catalogue line {line}: {message}")]
    Catalogue { line: usize, message: String },
    #[error("{0}")]
    Spec(String),
    #[error("no fixtures")]
    NoFixtures,
    #[error("{0}")]
    Construction(String),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Form(#[from] FormError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IdentityId {
    /// `Δω = Δ̄ω + F_r(ω)`
    Weitzenbock,
    /// `□` from `Δ̄` equals `□` from `Δ − F_r`
    TachibanaRoutes,
    /// conformal Killing `ω`: `Δω = F_r(ω) + d*dω/(r+1) + dd*ω/(n−r+1)`
    CkHodgeSplit,
    /// conformally flat, `n = 2r`: `F_r(ω) = r s/(2(2r−1)) ω`
    CfCurvatureTerm,
    /// conformally flat, `n = 2r`, conformal Killing `ω`: `Δω = (r+1)s/(2(2r−1)) ω`
    CfCkEigenvalue,
    /// conformally flat, `n = 2r`: `r s/(2(2r−1)) ω = r/(r+1) Δω − r(r+1) □ω`
    CfTachibana,
    /// conformally flat, `n = 2r`, harmonic `ω`: `r s/(2(2r−1)) ω = −r(r+1) □ω`
    CfHarmonicTachibana,
    /// conformally flat, `n = 2r`: conformal Killing forms are `Δ`-eigenforms
    /// for `(r+1)s/(2(2r−1))` when `s > 0`; harmonic forms are `□`-eigenforms
    /// for `−s/(2(r+1)(2r−1))` when `s < 0`
    CfEigenvalue,
    /// constant curvature `C`: `F_r(ω) = r(n−r)C ω`
    CcCurvatureTerm,
    /// constant curvature: `r(r+1)□ = Δ − r(n−r)C − d*d/(r+1) − dd*/(n−r+1)`
    CcTachibana,
    /// constant curvature: `r(r+1)□ = (n−r)/(n−r+1) Δ − r(n−r)C − (n−2r)/((r+1)(n−r+1)) d*d`
    CcTachibanaCodiffD,
    /// constant curvature: `r(r+1)□ = r/(r+1) Δ − r(n−r)C + (n−2r)/((r+1)(n−r+1)) dd*`
    CcTachibanaDCodiff,
    /// `C < 0`, harmonic `ω`: `□ω = −(n−r)C/(r+1) ω`
    CcHarmonicEigenvalue,
    /// `C > 0`, closed conformal Killing `ω`: `Δω = r(n−r+1)C ω`
    CcClosedCkEigenvalue,
    /// `C > 0`, Killing `ω`: `Δω = (n−r)(r+1)C ω`
    CcKillingEigenvalue,
}

impl IdentityId {
    pub const ALL: [IdentityId; 15] = [
        IdentityId::Weitzenbock,
        IdentityId::TachibanaRoutes,
        IdentityId::CkHodgeSplit,
        IdentityId::CfCurvatureTerm,
        IdentityId::CfCkEigenvalue,
        IdentityId::CfTachibana,
        IdentityId::CfHarmonicTachibana,
        IdentityId::CfEigenvalue,
        IdentityId::CcCurvatureTerm,
        IdentityId::CcTachibana,
        IdentityId::CcTachibanaCodiffD,
        IdentityId::CcTachibanaDCodiff,
        IdentityId::CcHarmonicEigenvalue,
        IdentityId::CcClosedCkEigenvalue,
        IdentityId::CcKillingEigenvalue,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IdentityId::Weitzenbock => "weitzenbock",
            IdentityId::TachibanaRoutes => "tachibana-routes",
            IdentityId::CkHodgeSplit => "ck-hodge-split",
            IdentityId::CfCurvatureTerm => "cf-curvature-term",
            IdentityId::CfCkEigenvalue => "cf-ck-eigenvalue",
            IdentityId::CfTachibana => "cf-tachibana",
            IdentityId::CfHarmonicTachibana => "cf-harmonic-tachibana",
            IdentityId::CfEigenvalue => "cf-eigenvalue",
            IdentityId::CcCurvatureTerm => "cc-curvature-term",
            IdentityId::CcTachibana => "cc-tachibana",
            IdentityId::CcTachibanaCodiffD => "cc-tachibana-codiff-d",
            IdentityId::CcTachibanaDCodiff => "cc-tachibana-d-codiff",
            IdentityId::CcHarmonicEigenvalue => "cc-harmonic-eigenvalue",
            IdentityId::CcClosedCkEigenvalue => "cc-closed-ck-eigenvalue",
            IdentityId::CcKillingEigenvalue => "cc-killing-eigenvalue",
        }
    }

    fn chart_hypothesis(self) -> ChartHyp {
        use IdentityId::*;
        match self {
            Weitzenbock | TachibanaRoutes | CkHodgeSplit => ChartHyp::Any,
            CfCurvatureTerm | CfCkEigenvalue | CfTachibana | CfHarmonicTachibana | CfEigenvalue => {
                ChartHyp::ConformallyFlatMiddle
            }
            CcCurvatureTerm | CcTachibana | CcTachibanaCodiffD | CcTachibanaDCodiff => {
                ChartHyp::ConstantCurvature
            }
            CcHarmonicEigenvalue => ChartHyp::NegativeCurvature,
            CcClosedCkEigenvalue | CcKillingEigenvalue => ChartHyp::PositiveCurvature,
        }
    }

    fn form_hypothesis(self) -> &'static [FormClass] {
        use IdentityId::*;
        match self {
            CkHodgeSplit | CfCkEigenvalue => &[FormClass::T],
            CfHarmonicTachibana | CcHarmonicEigenvalue => &[FormClass::H],
            CcClosedCkEigenvalue => &[FormClass::P],
            CcKillingEigenvalue => &[FormClass::K],
            CfEigenvalue => &[FormClass::T, FormClass::H],
            _ => &[],
        }
    }

    /// Eigenvalue predicted for the form class in the hypothesis, with
    /// `curvature` the scalar curvature `s` for conformally flat identities
    /// and the sectional curvature `C` otherwise.
    pub fn predicted_eigenvalue(self, n: usize, r: usize, curvature: f64) -> Option<f64> {
        let (nf, rf) = (n as f64, r as f64);
        match self {
            IdentityId::CfCkEigenvalue => Some((rf + 1.0) * curvature / (2.0 * (2.0 * rf - 1.0))),
            IdentityId::CcHarmonicEigenvalue => Some(-(nf - rf) * curvature / (rf + 1.0)),
            IdentityId::CcClosedCkEigenvalue => Some(rf * (nf - rf + 1.0) * curvature),
            IdentityId::CcKillingEigenvalue => Some((nf - rf) * (rf + 1.0) * curvature),
            _ => None,
        }
    }
}

impl fmt::Display for IdentityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IdentityId {
    type Err = TheoremError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        IdentityId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| TheoremError::UnknownIdentity(s.to_string()))
    }
}

impl Serialize for IdentityId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

enum ChartHyp {
    Any,
    ConformallyFlatMiddle,
    ConstantCurvature,
    NegativeCurvature,
    PositiveCurvature,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub id: IdentityId,
    pub chart: String,
    pub degree: usize,
    /// `sup |LHS − RHS|_g / sup |ω|_g`.
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
    pub form_norm: f64,
    /// Which branch an eigenvalue identity took, or the eigenvalue predicted.
    pub predicted_eigenvalue: Option<f64>,
    pub points: usize,
}

struct Ops<'a> {
    geo: &'a LocalGeometry,
    w: JetForm,
}

impl Ops<'_> {
    fn lap(&self) -> Result<JetForm, OperatorError> {
        hodge_laplacian(&self.w, self.geo)
    }
    fn tach(&self) -> Result<JetForm, OperatorError> {
        tachibana_laplacian(&self.w, self.geo, Route::Rough)
    }
    fn f(&self) -> Result<JetForm, OperatorError> {
        weitzenbock_term(&self.w, self.geo)
    }
    fn sd(&self) -> Result<JetForm, OperatorError> {
        codiff_of_d(&self.w, self.geo)
    }
    fn ds(&self) -> Result<JetForm, OperatorError> {
        d_of_codiff(&self.w, self.geo)
    }
    fn w0(&self) -> JetForm {
        self.w.truncate(0)
    }
}

/// The branch of [`IdentityId::CfEigenvalue`] that applies.
#[derive(Clone, Copy)]
enum Branch {
    None,
    Ck,
    Harmonic,
}

fn residual_at(id: IdentityId, o: &Ops<'_>, c: f64, branch: Branch) -> Result<f64, OperatorError> {
    let (n, r) = (o.w.dim() as f64, o.w.degree() as f64);
    let s = || o.geo.curvature().scalar.value();
    let w = o.w0();
    let lead = 1.0 / (r * (r + 1.0));
    use IdentityId::*;
    let diff = match id {
        Weitzenbock => o
            .lap()?
            .axpy(-1.0, &rough_laplacian(&o.w, o.geo)?)
            .axpy(-1.0, &o.f()?),
        TachibanaRoutes => o
            .tach()?
            .axpy(-1.0, &tachibana_laplacian(&o.w, o.geo, Route::Hodge)?),
        CkHodgeSplit => o
            .lap()?
            .axpy(-1.0, &o.f()?)
            .axpy(-1.0 / (r + 1.0), &o.sd()?)
            .axpy(-1.0 / (n - r + 1.0), &o.ds()?),
        CfCurvatureTerm => o.f()?.axpy(-r * s() / (2.0 * (2.0 * r - 1.0)), &w),
        CfCkEigenvalue => o
            .lap()?
            .axpy(-(r + 1.0) * s() / (2.0 * (2.0 * r - 1.0)), &w),
        CfTachibana => w
            .scale(r * s() / (2.0 * (2.0 * r - 1.0)))
            .axpy(-r / (r + 1.0), &o.lap()?)
            .axpy(r * (r + 1.0), &o.tach()?),
        CfHarmonicTachibana => w
            .scale(r * s() / (2.0 * (2.0 * r - 1.0)))
            .axpy(r * (r + 1.0), &o.tach()?),
        CfEigenvalue => match branch {
            Branch::Harmonic => o
                .tach()?
                .axpy(s() / (2.0 * (r + 1.0) * (2.0 * r - 1.0)), &w),
            _ => o
                .lap()?
                .axpy(-(r + 1.0) * s() / (2.0 * (2.0 * r - 1.0)), &w),
        },
        CcCurvatureTerm => o.f()?.axpy(-r * (n - r) * c, &w),
        CcTachibana => {
            let rhs = o
                .lap()?
                .axpy(-r * (n - r) * c, &w)
                .axpy(-1.0 / (r + 1.0), &o.sd()?)
                .axpy(-1.0 / (n - r + 1.0), &o.ds()?);
            o.tach()?.axpy(-lead, &rhs)
        }
        CcTachibanaCodiffD => {
            let rhs = o
                .lap()?
                .scale((n - r) / (n - r + 1.0))
                .axpy(-r * (n - r) * c, &w)
                .axpy(-(n - 2.0 * r) / ((r + 1.0) * (n - r + 1.0)), &o.sd()?);
            o.tach()?.axpy(-lead, &rhs)
        }
        CcTachibanaDCodiff => {
            let rhs = o
                .lap()?
                .scale(r / (r + 1.0))
                .axpy(-r * (n - r) * c, &w)
                .axpy((n - 2.0 * r) / ((r + 1.0) * (n - r + 1.0)), &o.ds()?);
            o.tach()?.axpy(-lead, &rhs)
        }
        CcHarmonicEigenvalue => o.tach()?.axpy((n - r) * c / (r + 1.0), &w),
        CcClosedCkEigenvalue => o.lap()?.axpy(-r * (n - r + 1.0) * c, &w),
        CcKillingEigenvalue => o.lap()?.axpy(-(n - r) * (r + 1.0) * c, &w),
    };
    Ok(jet_norm(&diff, o.geo))
}

fn hyp(id: IdentityId, reason: impl Into<String>) -> TheoremError {
    TheoremError::Hypothesis {
        id,
        reason: reason.into(),
    }
}

/// Runs one identity check; hypotheses are verified before any residual
/// is computed.
pub fn verify_identity(
    id: IdentityId,
    form: &dyn FormField,
    chart: &MetricChart,
    samples: &SampleSet,
    tol: f64,
) -> Result<IdentityCheck, TheoremError> {
    let (n, r) = (form.dim(), form.degree());
    if n != chart.dim() {
        return Err(FormError::DimensionMismatch {
            left: chart.dim(),
            right: n,
        }
        .into());
    }
    if r == 0 || r >= n {
        return Err(hyp(id, format!("degree {r} outside 1..={}", n - 1)));
    }
    let c = match id.chart_hypothesis() {
        ChartHyp::Any => 0.0,
        ChartHyp::ConformallyFlatMiddle => {
            if !chart.is_conformally_flat() {
                return Err(hyp(
                    id,
                    format!("chart `{}` is not conformally flat", chart.label().name()),
                ));
            }
            if n != 2 * r {
                return Err(hyp(id, format!("needs n = 2r, got n = {n}, r = {r}")));
            }
            0.0
        }
        ChartHyp::ConstantCurvature | ChartHyp::NegativeCurvature | ChartHyp::PositiveCurvature => {
            let Some(c) = chart.constant_curvature() else {
                return Err(hyp(
                    id,
                    format!("chart `{}` has no constant curvature", chart.label().name()),
                ));
            };
            match id.chart_hypothesis() {
                ChartHyp::NegativeCurvature if c >= 0.0 => {
                    return Err(hyp(id, format!("needs C < 0, got {c}")))
                }
                ChartHyp::PositiveCurvature if c <= 0.0 => {
                    return Err(hyp(id, format!("needs C > 0, got {c}")))
                }
                _ => {}
            }
            c
        }
    };
    let needed = id.form_hypothesis();
    let mut branch = Branch::None;
    if !needed.is_empty() {
        let report = classify(form, chart, samples, crate::classify::DEFAULT_TOL)?;
        match needed.iter().find(|cl| report.is(**cl)) {
            None => {
                let names: Vec<&str> = needed.iter().map(|c| c.description()).collect();
                return Err(hyp(
                    id,
                    format!(
                        "form is not {} (residuals {:?})",
                        names.join(" or "),
                        report.residuals
                    ),
                ));
            }
            Some(FormClass::H) if id == IdentityId::CfEigenvalue => branch = Branch::Harmonic,
            Some(_) if id == IdentityId::CfEigenvalue => branch = Branch::Ck,
            Some(_) => {}
        }
    }
    if samples.points.is_empty() {
        return Err(ClassifyError::NoPoints.into());
    }
    let per_point = samples
        .points
        .par_iter()
        .map(|p| {
            let geo = chart.local(p, DEFAULT_ORDER)?;
            let w = form.jet_at(&geo)?;
            let norm = jet_norm(&w, &geo);
            let s = if matches!(id.chart_hypothesis(), ChartHyp::ConformallyFlatMiddle) {
                geo.curvature().scalar.value()
            } else {
                c
            };
            let res = residual_at(id, &Ops { geo: &geo, w }, c, branch)?;
            Ok((res, norm, s))
        })
        .collect::<Result<Vec<_>, TheoremError>>()?;
    // the eigenvalue gate: harmonic □-eigenforms need s < 0
    if let Branch::Harmonic = branch {
        if per_point.iter().any(|&(_, _, s)| s >= 0.0) {
            return Err(hyp(id, "harmonic branch needs s < 0"));
        }
    }
    if let Branch::Ck = branch {
        if per_point.iter().any(|&(_, _, s)| s <= 0.0) {
            return Err(hyp(id, "conformal Killing branch needs s > 0"));
        }
    }
    if id == IdentityId::CfHarmonicTachibana && per_point.iter().any(|&(_, _, s)| s >= 0.0) {
        // harmonic forms with s ≥ 0 would be □-eigenforms with negative eigenvalue
        return Err(hyp(id, "needs s < 0"));
    }
    let norm = per_point.iter().map(|v| v.1).fold(0.0, f64::max);
    let res = per_point.iter().map(|v| v.0).fold(0.0, f64::max);
    let residual = if norm > 0.0 { res / norm } else { res };
    let mean_s = per_point.iter().map(|v| v.2).sum::<f64>() / per_point.len() as f64;
    let predicted = match (id, branch) {
        (IdentityId::CfEigenvalue, Branch::Harmonic) => {
            let rf = r as f64;
            Some(-mean_s / (2.0 * (rf + 1.0) * (2.0 * rf - 1.0)))
        }
        (IdentityId::CfEigenvalue, _) => {
            IdentityId::CfCkEigenvalue.predicted_eigenvalue(n, r, mean_s)
        }
        (IdentityId::CfCkEigenvalue, _) => id.predicted_eigenvalue(n, r, mean_s),
        _ => id.predicted_eigenvalue(n, r, c),
    };
    Ok(IdentityCheck {
        id,
        chart: chart.label().name(),
        degree: r,
        residual,
        tol,
        pass: residual <= tol,
        form_norm: norm,
        predicted_eigenvalue: predicted,
        points: samples.points.len(),
    })
}
