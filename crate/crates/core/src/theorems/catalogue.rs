//! Fixture catalogues: one identity check per line.
//!
//! ```text
//! # id                 chart        form          tol    options
//! cc-curvature-term    sphere:3:1   random:4:2    1e-8   points=40 seed=7
//! cc-harmonic-eigenvalue ball:3:-1  harmonic-radial 1e-7 box=0.1:0.5
//! ```
//!
//! Charts: `torus:n`, `sphere:n:C`, `ball:n:C`, `conformal:n:<f>`, `file:<path>`.
//! Forms: `random:<seed>:<r>`, `killing`, `dkilling`, `closedck`, `harmonic-radial`,
//! `harmonic-coord`, `basis:<i,j,..>`, `star:<form>`, `file:<path>`.
//! File paths are relative to the catalogue's directory.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::{verify_identity, IdentityCheck, IdentityId, TheoremError};
use crate::classify::SampleSet;
use crate::expr::parse;
use crate::forms::{
    parse_form_fixture, parse_fourier_fixture, ExprForm, FormField, FourierForm, Starred,
};
use crate::geometry::{
    make_conformally_flat, make_flat_torus, make_poincare_ball, make_round_sphere,
    parse_chart_fixture, Axis, MetricChart,
};
use crate::samples::{
    closed_conformal_killing_form, coordinate_form, radial_harmonic_form, random_form,
    rotation_killing_form,
};

pub const DEFAULT_POINTS: usize = 50;
const DEFAULT_SEED: u64 = 20240607;

#[derive(Debug, Clone, PartialEq)]
pub enum ChartSpec {
    Torus(usize),
    Sphere(usize, f64),
    Ball(usize, f64),
    Conformal(usize, String),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FormSpec {
    Random { seed: u64, r: usize },
    Killing,
    DKilling,
    ClosedCk,
    HarmonicRadial,
    HarmonicCoord,
    Basis(Vec<usize>),
    Star(Box<FormSpec>),
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct CatalogueEntry {
    pub line: usize,
    pub id: IdentityId,
    pub chart: ChartSpec,
    pub chart_text: String,
    pub form: FormSpec,
    pub form_text: String,
    pub tol: f64,
    pub points: usize,
    pub seed: u64,
    pub sub_box: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowStatus {
    Pass,
    Fail,
    HypothesisViolated,
    Error,
}

#[derive(Debug, Clone, Serialize)]
pub struct CatalogueRow {
    pub line: usize,
    pub id: IdentityId,
    pub chart: String,
    pub form: String,
    pub tol: f64,
    pub status: RowStatus,
    pub residual: Option<f64>,
    pub predicted_eigenvalue: Option<f64>,
    pub points: usize,
    pub message: Option<String>,
}

impl CatalogueRow {
    pub fn passed(&self) -> bool {
        self.status == RowStatus::Pass
    }
}

// line 0 marks a spec given outside a catalogue
fn bad(line: usize, message: impl Into<String>) -> TheoremError {
    if line == 0 {
        return TheoremError::Spec(message.into());
    }
    TheoremError::Catalogue {
        line,
        message: message.into(),
    }
}

impl ChartSpec {
    pub fn parse(text: &str) -> Result<Self, TheoremError> {
        parse_chart_spec(text, 0)
    }

    /// Builds the chart; `file:` paths are resolved against `base`.
    pub fn build(&self, base: &Path) -> Result<MetricChart, TheoremError> {
        build_chart(self, None, base, 0)
    }
}

impl FormSpec {
    pub fn parse(text: &str) -> Result<Self, TheoremError> {
        parse_form_spec(text, 0)
    }

    pub fn build(&self, chart: &MetricChart, base: &Path) -> Result<LoadedForm, TheoremError> {
        build_form(self, chart, base, 0)
    }
}

fn parse_chart_spec(text: &str, line: usize) -> Result<ChartSpec, TheoremError> {
    let (kind, rest) = text.split_once(':').unwrap_or((text, ""));
    let num = |s: &str| -> Result<f64, TheoremError> {
        s.parse()
            .map_err(|_| bad(line, format!("bad number `{s}` in chart `{text}`")))
    };
    let dim = |s: &str| -> Result<usize, TheoremError> {
        s.parse()
            .map_err(|_| bad(line, format!("bad dimension `{s}` in chart `{text}`")))
    };
    match kind {
        "torus" => Ok(ChartSpec::Torus(dim(rest)?)),
        "sphere" | "ball" => {
            let (n, c) = rest
                .split_once(':')
                .ok_or_else(|| bad(line, format!("`{text}` needs <n>:<C>")))?;
            let (n, c) = (dim(n)?, num(c)?);
            Ok(if kind == "sphere" {
                ChartSpec::Sphere(n, c)
            } else {
                ChartSpec::Ball(n, c)
            })
        }
        "conformal" => {
            let (n, f) = rest
                .split_once(':')
                .ok_or_else(|| bad(line, format!("`{text}` needs <n>:<f>")))?;
            Ok(ChartSpec::Conformal(dim(n)?, f.to_string()))
        }
        "file" if !rest.is_empty() => Ok(ChartSpec::File(rest.into())),
        _ => Err(bad(line, format!("unknown chart `{text}`"))),
    }
}

fn parse_form_spec(text: &str, line: usize) -> Result<FormSpec, TheoremError> {
    let (kind, rest) = text.split_once(':').unwrap_or((text, ""));
    match kind {
        "random" => {
            let (seed, r) = rest
                .split_once(':')
                .ok_or_else(|| bad(line, format!("`{text}` needs <seed>:<r>")))?;
            Ok(FormSpec::Random {
                seed: seed
                    .parse()
                    .map_err(|_| bad(line, format!("bad seed `{seed}`")))?,
                r: r.parse()
                    .map_err(|_| bad(line, format!("bad degree `{r}`")))?,
            })
        }
        "killing" => Ok(FormSpec::Killing),
        "dkilling" => Ok(FormSpec::DKilling),
        "closedck" => Ok(FormSpec::ClosedCk),
        "harmonic-radial" => Ok(FormSpec::HarmonicRadial),
        "harmonic-coord" => Ok(FormSpec::HarmonicCoord),
        "basis" => rest
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| bad(line, format!("bad index `{s}`")))
            })
            .collect::<Result<_, _>>()
            .map(FormSpec::Basis),
        "star" => Ok(FormSpec::Star(Box::new(parse_form_spec(rest, line)?))),
        "file" if !rest.is_empty() => Ok(FormSpec::File(rest.into())),
        _ => Err(bad(line, format!("unknown form `{text}`"))),
    }
}

pub fn parse_catalogue(text: &str) -> Result<Vec<CatalogueEntry>, TheoremError> {
    let mut out = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() < 4 {
            return Err(bad(
                line,
                "expected `<id> <chart> <form> <tol> [key=value]`",
            ));
        }
        let id: IdentityId = fields[0]
            .parse()
            .map_err(|_| bad(line, format!("unknown identity `{}`", fields[0])))?;
        let tol: f64 = fields[3]
            .parse()
            .ok()
            .filter(|t: &f64| *t > 0.0 && t.is_finite())
            .ok_or_else(|| bad(line, format!("bad tolerance `{}`", fields[3])))?;
        let mut entry = CatalogueEntry {
            line,
            id,
            chart: parse_chart_spec(fields[1], line)?,
            chart_text: fields[1].to_string(),
            form: parse_form_spec(fields[2], line)?,
            form_text: fields[2].to_string(),
            tol,
            points: DEFAULT_POINTS,
            seed: DEFAULT_SEED,
            sub_box: None,
        };
        for opt in &fields[4..] {
            let (k, v) = opt
                .split_once('=')
                .ok_or_else(|| bad(line, format!("expected key=value, got `{opt}`")))?;
            match k {
                "points" => {
                    entry.points = v
                        .parse()
                        .ok()
                        .filter(|&p| p > 0)
                        .ok_or_else(|| bad(line, format!("bad point count `{v}`")))?
                }
                "seed" => {
                    entry.seed = v
                        .parse()
                        .map_err(|_| bad(line, format!("bad seed `{v}`")))?
                }
                "box" => {
                    let (lo, hi) = v
                        .split_once(':')
                        .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)))
                        .filter(|(a, b): &(f64, f64)| a < b)
                        .ok_or_else(|| bad(line, format!("bad box `{v}`")))?;
                    entry.sub_box = Some((lo, hi));
                }
                _ => return Err(bad(line, format!("unknown option `{k}`"))),
            }
        }
        out.push(entry);
    }
    if out.is_empty() {
        return Err(TheoremError::NoFixtures);
    }
    Ok(out)
}

fn read(base: &Path, rel: &Path, line: usize) -> Result<String, TheoremError> {
    let path = base.join(rel);
    std::fs::read_to_string(&path).map_err(|e| bad(line, format!("{}: {e}", path.display())))
}

fn build_chart(
    spec: &ChartSpec,
    sub_box: Option<(f64, f64)>,
    base: &Path,
    line: usize,
) -> Result<MetricChart, TheoremError> {
    let chart = match spec {
        ChartSpec::Torus(n) => make_flat_torus(*n, &vec![std::f64::consts::TAU; *n])?,
        ChartSpec::Sphere(n, c) => make_round_sphere(*n, *c)?,
        ChartSpec::Ball(n, c) => make_poincare_ball(*n, *c)?,
        ChartSpec::Conformal(n, f) => {
            let f = parse(f, *n).map_err(|err| bad(line, format!("conformal factor: {err}")))?;
            make_conformally_flat(*n, &f)?
        }
        ChartSpec::File(p) => parse_chart_fixture(&read(base, p, line)?)
            .map_err(|err| bad(line, format!("{}: {err}", p.display())))?,
    };
    match sub_box {
        Some((lo, hi)) => Ok(chart.with_axes(vec![Axis::new(lo, hi); chart.dim()])?),
        None => Ok(chart),
    }
}

/// A form built from a [`FormSpec`].
pub enum LoadedForm {
    Expr(ExprForm),
    Fourier(FourierForm),
    Star(Box<LoadedForm>),
}

impl LoadedForm {
    pub fn field(&self) -> Box<dyn FormField + '_> {
        match self {
            LoadedForm::Expr(w) => Box::new(w),
            LoadedForm::Fourier(w) => Box::new(w),
            LoadedForm::Star(inner) => Box::new(Starred(inner.field())),
        }
    }
}

fn model_curvature(chart: &MetricChart, what: &str, line: usize) -> Result<f64, TheoremError> {
    chart.constant_curvature().ok_or_else(|| {
        bad(
            line,
            format!("`{what}` needs a constant-curvature model chart"),
        )
    })
}

fn build_form(
    spec: &FormSpec,
    chart: &MetricChart,
    base: &Path,
    line: usize,
) -> Result<LoadedForm, TheoremError> {
    let n = chart.dim();
    Ok(match spec {
        FormSpec::Random { seed, r } => LoadedForm::Expr(random_form(n, *r, *seed)?),
        FormSpec::Killing => LoadedForm::Expr(rotation_killing_form(
            n,
            model_curvature(chart, "killing", line)?,
        )),
        FormSpec::DKilling => LoadedForm::Expr(
            rotation_killing_form(n, model_curvature(chart, "dkilling", line)?).exterior_d()?,
        ),
        FormSpec::ClosedCk => LoadedForm::Expr(closed_conformal_killing_form(
            n,
            model_curvature(chart, "closedck", line)?,
        )),
        FormSpec::HarmonicRadial => {
            if n != 3 {
                return Err(bad(line, "`harmonic-radial` needs dimension 3"));
            }
            LoadedForm::Expr(radial_harmonic_form(model_curvature(
                chart,
                "harmonic-radial",
                line,
            )?))
        }
        FormSpec::HarmonicCoord => LoadedForm::Expr(coordinate_form(n)),
        FormSpec::Basis(idx) => LoadedForm::Expr(ExprForm::basis_form(n, idx)?),
        FormSpec::Star(inner) => LoadedForm::Star(Box::new(build_form(inner, chart, base, line)?)),
        FormSpec::File(p) => {
            let text = read(base, p, line)?;
            let msg = |err: crate::forms::FormError| bad(line, format!("{}: {err}", p.display()));
            if text
                .lines()
                .any(|l| l.split('#').next().unwrap_or("").contains(';'))
            {
                LoadedForm::Fourier(parse_fourier_fixture(&text).map_err(msg)?)
            } else {
                LoadedForm::Expr(parse_form_fixture(&text, n).map_err(msg)?)
            }
        }
    })
}

fn run_entry(e: &CatalogueEntry, base: &Path) -> Result<IdentityCheck, TheoremError> {
    let chart = build_chart(&e.chart, e.sub_box, base, e.line)?;
    let form = build_form(&e.form, &chart, base, e.line)?;
    let samples = SampleSet::seeded(&chart, e.points, e.seed);
    let field = form.field();
    verify_identity(e.id, &*field, &chart, &samples, e.tol)
}

/// Runs every entry; failures and violated hypotheses become rows rather
/// than aborting the run.
pub fn run_catalogue(entries: &[CatalogueEntry], base: &Path) -> Vec<CatalogueRow> {
    entries
        .par_iter()
        .map(|e| {
            let mut row = CatalogueRow {
                line: e.line,
                id: e.id,
                chart: e.chart_text.clone(),
                form: e.form_text.clone(),
                tol: e.tol,
                status: RowStatus::Error,
                residual: None,
                predicted_eigenvalue: None,
                points: e.points,
                message: None,
            };
            match run_entry(e, base) {
                Ok(check) => {
                    row.status = if check.pass {
                        RowStatus::Pass
                    } else {
                        RowStatus::Fail
                    };
                    row.residual = Some(check.residual);
                    row.predicted_eigenvalue = check.predicted_eigenvalue;
                }
                Err(err @ TheoremError::Hypothesis { .. }) => {
                    row.status = RowStatus::HypothesisViolated;
                    row.message = Some(err.to_string());
                }
                Err(err) => row.message = Some(err.to_string()),
            }
            row
        })
        .collect()
}

const DEFAULT_CATALOGUE: &str = "\
# id                      chart                              form              tol    options
weitzenbock               sphere:2:1                         random:1:1        1e-8
weitzenbock               sphere:3:1                         random:2:2        1e-8
weitzenbock               ball:3:-1                          random:3:1        1e-8
weitzenbock               conformal:3:0.3*sin(x1)+0.2*x2*x3  random:4:2        1e-8
tachibana-routes          sphere:3:1                         random:5:1        1e-8
tachibana-routes          sphere:4:1                         random:6:2        1e-8   points=20
tachibana-routes          ball:3:-1                          random:7:2        1e-8
tachibana-routes          conformal:2:0.4*x1+0.3*sin(x2)     random:8:1        1e-8
ck-hodge-split            sphere:3:1                         killing           1e-8
ck-hodge-split            sphere:3:1                         closedck          1e-8
ck-hodge-split            ball:3:-1                          star:closedck     1e-8
cf-curvature-term         sphere:2:1                         random:9:1        1e-8
cf-curvature-term         conformal:2:0.4*x1+0.3*sin(x2)     random:10:1       1e-8
cf-curvature-term         sphere:4:1                         random:11:2       1e-8   points=20
cf-curvature-term         conformal:4:0.2*x1*x2+0.1*cos(x3)  random:12:2       1e-8   points=20
cf-ck-eigenvalue          sphere:2:1                         closedck          1e-8
cf-ck-eigenvalue          sphere:2:1                         killing           1e-8
cf-ck-eigenvalue          sphere:4:1                         dkilling          1e-8   points=20
cf-eigenvalue             sphere:4:1                         star:dkilling     1e-8   points=20
cf-tachibana              sphere:2:1                         random:13:1       1e-8
cf-tachibana              conformal:4:0.2*x1*x2+0.1*cos(x3)  random:14:2       1e-8   points=20
cf-harmonic-tachibana     ball:2:-1                          harmonic-coord    1e-8
cf-eigenvalue             sphere:2:1                         closedck          1e-8
cf-eigenvalue             ball:2:-1                          harmonic-coord    1e-8
cc-curvature-term         sphere:2:1                         random:15:1       1e-8
cc-curvature-term         sphere:3:1                         random:16:1       1e-8
cc-curvature-term         sphere:3:1                         random:17:2       1e-8
cc-curvature-term         ball:3:-1                          random:18:1       1e-8
cc-curvature-term         sphere:4:1                         random:19:2       1e-8   points=20
cc-curvature-term         torus:3                            random:20:1       1e-8
cc-tachibana              sphere:3:1                         random:21:1       1e-8
cc-tachibana              ball:3:-1                          random:22:2       1e-8
cc-tachibana              sphere:4:1                         random:23:2       1e-8   points=20
cc-tachibana-codiff-d     sphere:3:1                         random:24:1       1e-8
cc-tachibana-codiff-d     ball:4:-0.5                        random:25:3       1e-8   points=20
cc-tachibana-d-codiff     sphere:3:1                         random:26:2       1e-8
cc-tachibana-d-codiff     ball:4:-0.5                        random:27:1       1e-8   points=20
cc-harmonic-eigenvalue    ball:3:-1                          harmonic-radial   1e-8   box=0.1:0.5
cc-harmonic-eigenvalue    ball:2:-1                          harmonic-coord    1e-8
cc-closed-ck-eigenvalue   sphere:2:1                         closedck          1e-8
cc-closed-ck-eigenvalue   sphere:3:1                         closedck          1e-8
cc-closed-ck-eigenvalue   sphere:4:1                         dkilling          1e-8   points=20
cc-killing-eigenvalue     sphere:3:1                         killing           1e-8
cc-killing-eigenvalue     sphere:4:1                         killing           1e-8   points=20
cc-killing-eigenvalue     sphere:3:1                         star:closedck     1e-8
cc-killing-eigenvalue     sphere:4:1                         star:dkilling     1e-8   points=20
";

const VIOLATION_CATALOGUE: &str = "\
# every line violates a hypothesis of its identity
weitzenbock               sphere:3:1                         random:1:3        1e-8
tachibana-routes          sphere:3:1                         random:2:3        1e-8
ck-hodge-split            sphere:3:1                         random:3:1        1e-8
cf-curvature-term         sphere:3:1                         random:4:1        1e-8
cf-ck-eigenvalue          sphere:2:1                         random:5:1        1e-8
cf-tachibana              sphere:3:1                         random:6:1        1e-8
cf-harmonic-tachibana     sphere:2:1                         closedck          1e-8
cf-eigenvalue             sphere:2:1                         random:7:1        1e-8
cc-curvature-term         conformal:2:0.4*x1+0.3*sin(x2)     random:8:1        1e-8
cc-tachibana              conformal:3:0.3*sin(x1)+0.2*x2*x3  random:9:1        1e-8
cc-tachibana-codiff-d     conformal:3:0.3*sin(x1)+0.2*x2*x3  random:10:2       1e-8
cc-tachibana-d-codiff     conformal:2:0.4*x1+0.3*sin(x2)     random:11:1       1e-8
cc-harmonic-eigenvalue    sphere:2:1                         harmonic-coord    1e-8
cc-closed-ck-eigenvalue   ball:3:-1                          closedck          1e-8
cc-killing-eigenvalue     sphere:3:1                         closedck          1e-8
";

/// Fixtures covering every identity; all pass.
pub fn default_catalogue() -> Vec<CatalogueEntry> {
    parse_catalogue(DEFAULT_CATALOGUE).expect("built-in catalogue parses")
}

/// One fixture per identity whose hypotheses do not hold.
pub fn hypothesis_violation_catalogue() -> Vec<CatalogueEntry> {
    parse_catalogue(VIOLATION_CATALOGUE).expect("built-in catalogue parses")
}
