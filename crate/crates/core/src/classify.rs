//! Membership of a form in the closed / co-closed / conformal Killing
//! lattice, judged from residuals at sample points.
//!
//! The residuals are sup-norms of the parts of `∇ω`:
//! `|D1ω| = |dω|/√(r+1)`, `|D2ω| = |d*ω|/√(n−r+1)`, `|D3ω|` and `|∇ω|`.
//! Because the parts are orthogonal, each is bounded by `|∇ω|`, so a parallel
//! form is automatically in every other class.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::forms::{jet_norm, FormField};
use crate::geometry::MetricChart;
use crate::operators::{d_decomposition, OperatorError, DEFAULT_ORDER};

pub const DEFAULT_TOL: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("classification needs 1 <= r <= n-1, got r = {r} in dimension {n}")]
    DegreeOutOfRange { r: usize, n: usize },
    #[error("empty sample point set")]
    NoPoints,
    #[error("internal error: inconsistent class lattice ({0})")]
    Inconsistent(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum FormClass {
    /// closed: `dω = 0`
    D,
    /// co-closed: `d*ω = 0`
    F,
    /// conformal Killing: `D3ω = 0`
    T,
    /// harmonic: closed and co-closed
    H,
    /// Killing: co-closed conformal Killing
    K,
    /// planar: closed conformal Killing
    P,
    /// parallel: `∇ω = 0`
    C,
}

impl FormClass {
    pub const ALL: [FormClass; 7] = [
        FormClass::D,
        FormClass::F,
        FormClass::T,
        FormClass::H,
        FormClass::K,
        FormClass::P,
        FormClass::C,
    ];

    pub fn description(self) -> &'static str {
        match self {
            FormClass::D => "closed",
            FormClass::F => "co-closed",
            FormClass::T => "conformal Killing",
            FormClass::H => "harmonic",
            FormClass::K => "Killing",
            FormClass::P => "closed conformal Killing",
            FormClass::C => "parallel",
        }
    }
}

/// Named set of sample points.
#[derive(Debug, Clone, Serialize)]
pub struct SampleSet {
    pub id: String,
    pub points: Vec<Vec<f64>>,
}

impl SampleSet {
    pub fn seeded(chart: &MetricChart, count: usize, seed: u64) -> Self {
        Self {
            id: format!("uniform:count={count}:seed={seed}"),
            points: chart.sample_points(count, seed),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct Residuals {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub nabla: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassificationReport {
    pub degree: usize,
    pub residuals: Residuals,
    /// `sup |ω|_g` over the sample points.
    pub form_norm: f64,
    pub tol: f64,
    /// `tol · (1 + form_norm)`.
    pub threshold: f64,
    pub memberships: BTreeMap<FormClass, bool>,
    pub sample_set: String,
    pub point_count: usize,
}

impl ClassificationReport {
    pub fn is(&self, class: FormClass) -> bool {
        self.memberships[&class]
    }

    pub fn classes(&self) -> Vec<FormClass> {
        self.memberships
            .iter()
            .filter(|(_, &v)| v)
            .map(|(c, _)| *c)
            .collect()
    }

    /// Re-thresholds the stored residuals.
    pub fn with_tol(&self, tol: f64) -> Result<Self, ClassifyError> {
        build(
            self.degree,
            self.residuals,
            self.form_norm,
            tol,
            &self.sample_set,
            self.point_count,
        )
    }
}

fn build(
    degree: usize,
    res: Residuals,
    form_norm: f64,
    tol: f64,
    sample_set: &str,
    point_count: usize,
) -> Result<ClassificationReport, ClassifyError> {
    let threshold = tol * (1.0 + form_norm);
    let d = res.d1 <= threshold;
    let f = res.d2 <= threshold;
    let t = res.d3 <= threshold;
    let c = res.nabla <= threshold;
    let memberships: BTreeMap<FormClass, bool> = [
        (FormClass::D, d),
        (FormClass::F, f),
        (FormClass::T, t),
        (FormClass::H, d && f),
        (FormClass::K, t && f),
        (FormClass::P, t && d),
        (FormClass::C, c),
    ]
    .into_iter()
    .collect();
    if c && !(d && f && t) {
        return Err(ClassifyError::Inconsistent(format!(
            "parallel but residuals {res:?} exceed {threshold:e}"
        )));
    }
    Ok(ClassificationReport {
        degree,
        residuals: res,
        form_norm,
        tol,
        threshold,
        memberships,
        sample_set: sample_set.to_string(),
        point_count,
    })
}

pub fn classify(
    form: &dyn FormField,
    chart: &MetricChart,
    samples: &SampleSet,
    tol: f64,
) -> Result<ClassificationReport, ClassifyError> {
    let (n, r) = (form.dim(), form.degree());
    if r == 0 || r >= n {
        return Err(ClassifyError::DegreeOutOfRange { r, n });
    }
    if samples.points.is_empty() {
        return Err(ClassifyError::NoPoints);
    }
    let per_point = samples
        .points
        .par_iter()
        .map(|p| {
            let geo = chart.local(p, DEFAULT_ORDER).map_err(OperatorError::from)?;
            let w = form.jet_at(&geo).map_err(OperatorError::from)?;
            let dec = d_decomposition(&w, &geo)?;
            Ok([
                dec.d1.norm(&geo),
                dec.d2.norm(&geo),
                dec.d3.norm(&geo),
                dec.nabla.norm(&geo),
                jet_norm(&w, &geo),
            ])
        })
        .collect::<Result<Vec<[f64; 5]>, ClassifyError>>()?;
    let sup = |i: usize| per_point.iter().map(|v| v[i]).fold(0.0, f64::max);
    let res = Residuals {
        d1: sup(0),
        d2: sup(1),
        d3: sup(2),
        nabla: sup(3),
    };
    build(r, res, sup(4), tol, &samples.id, samples.points.len())
}
