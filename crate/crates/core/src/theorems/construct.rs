//! Explicit constructions behind the lower bound on parallel forms and the
//! splitting of conformal Killing forms on flat tori.

use std::f64::consts::TAU;

use itertools::Itertools;
use nalgebra::DMatrix;
use serde::Serialize;

use super::TheoremError;
use crate::classify::{classify, ClassificationReport, FormClass, SampleSet, DEFAULT_TOL};
use crate::forms::{binomial, jet_inner, ExprForm, FormField, FourierForm};
use crate::geometry::make_flat_torus;
use crate::operators::fourier::hodge_parts;
use crate::operators::DEFAULT_ORDER;

/// Parallel `r`-forms `dx_I`, `I ⊂ {1..h}`, on the flat torus `T^n`.
#[derive(Debug, Clone, Serialize)]
pub struct WedgeWitness {
    pub n: usize,
    pub h: usize,
    pub r: usize,
    /// one-based index sets, e.g. `"1,3"`
    pub labels: Vec<String>,
    #[serde(skip)]
    pub forms: Vec<ExprForm>,
    pub gram_rank: usize,
    /// `C(h, r)`, the bound the witness realises.
    pub expected: usize,
    pub all_parallel: bool,
    pub max_nabla_residual: f64,
}

impl WedgeWitness {
    pub fn holds(&self) -> bool {
        self.all_parallel && self.gram_rank == self.expected && self.forms.len() == self.expected
    }
}

pub fn parallel_wedge_witness(n: usize, h: usize, r: usize) -> Result<WedgeWitness, TheoremError> {
    // r = h is allowed: the single form dx1 ∧ .. ∧ dxh
    if h > n || r == 0 || r > h {
        return Err(TheoremError::Construction(format!(
            "needs 1 <= r <= h <= n, got n = {n}, h = {h}, r = {r}"
        )));
    }
    let chart = make_flat_torus(n, &vec![TAU; n])?;
    let samples = SampleSet::seeded(&chart, 12, 4);
    let sets: Vec<Vec<usize>> = (1..=h).combinations(r).collect();
    let forms = sets
        .iter()
        .map(|s| ExprForm::basis_form(n, s))
        .collect::<Result<Vec<_>, _>>()?;
    let mut all_parallel = true;
    let mut max_nabla: f64 = 0.0;
    for w in &forms {
        let rep = classify(w, &chart, &samples, DEFAULT_TOL)?;
        all_parallel &= rep.is(FormClass::C);
        max_nabla = max_nabla.max(rep.residuals.nabla);
    }
    let geo = chart.local(&samples.points[0], DEFAULT_ORDER)?;
    let jets = forms
        .iter()
        .map(|w| w.jet_at(&geo))
        .collect::<Result<Vec<_>, _>>()?;
    let k = jets.len();
    let gram = DMatrix::from_fn(k, k, |i, j| jet_inner(&jets[i], &jets[j], &geo));
    let sv = gram.singular_values();
    let top = sv.max();
    let gram_rank = sv.iter().filter(|&&s| s > 1e-10 * top.max(1.0)).count();
    Ok(WedgeWitness {
        n,
        h,
        r,
        labels: sets.iter().map(|s| s.iter().join(",")).collect(),
        forms,
        gram_rank,
        expected: binomial(h, r),
        all_parallel,
        max_nabla_residual: max_nabla,
    })
}

/// `ω = ω' + ω''` with `ω'` Killing and `ω''` closed conformal Killing.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub killing: FourierForm,
    pub planar: FourierForm,
    pub input: ClassificationReport,
    pub killing_report: ClassificationReport,
    pub planar_report: ClassificationReport,
    /// `‖ω − ω' − ω''‖_{L²} / ‖ω‖_{L²}`
    pub reassembly_error: f64,
}

impl Decomposition {
    pub fn holds(&self) -> bool {
        self.killing_report.is(FormClass::K)
            && self.planar_report.is(FormClass::P)
            && self.reassembly_error < 1e-12
    }
}

/// Splits a conformal Killing form on a flat torus. The harmonic (constant)
/// part is both Killing and planar; it is assigned to the Killing part.
pub fn decomposition_check(w: &FourierForm, tol: f64) -> Result<Decomposition, TheoremError> {
    let chart = make_flat_torus(w.dim(), w.periods())?;
    let set = SampleSet::seeded(&chart, 20, 11);
    let input = classify(w, &chart, &set, tol)?;
    if !input.is(FormClass::T) {
        return Err(TheoremError::Construction(format!(
            "form is not conformal Killing (residuals {:?})",
            input.residuals
        )));
    }
    let parts = hodge_parts(w)?;
    let killing = parts.harmonic.axpy(1.0, &parts.coexact)?;
    let planar = parts.exact;
    let rest = w.axpy(-1.0, &killing)?.axpy(-1.0, &planar)?;
    let norm = w.l2_norm();
    Ok(Decomposition {
        killing_report: classify(&killing, &chart, &set, tol)?,
        planar_report: classify(&planar, &chart, &set, tol)?,
        input,
        reassembly_error: if norm > 0.0 {
            rest.l2_norm() / norm
        } else {
            rest.l2_norm()
        },
        killing,
        planar,
    })
}
