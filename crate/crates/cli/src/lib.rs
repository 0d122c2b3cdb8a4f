//! Front end for `tachibana-core`: argument model, subcommands and report
//! serialization. `main.rs` only maps [`run`] onto exit codes.

mod output;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use tachibana_core::classify::{self, ClassificationReport, SampleSet};
use tachibana_core::forms::{FourierForm, MultiIndex};
use tachibana_core::spectral::{
    self, bound_check, duality_check, BoundOutcome, IdentityOutcome, SpectralError,
};
use tachibana_core::theorems::{
    decomposition_check, default_catalogue, parallel_wedge_witness, parse_catalogue, run_catalogue,
    CatalogueRow, ChartSpec, FormSpec, TheoremError, WedgeWitness,
};
use tachibana_core::SpectralNumbers;

pub use output::{to_csv, to_json};

pub const SCHEMA: u32 = 1;
pub const DEFAULT_SEED: u64 = 20240607;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("spectral kernels supported on flat tori only (got `{0}`)")]
    NotATorus(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Theorem(#[from] TheoremError),
    #[error(transparent)]
    Classify(#[from] classify::ClassifyError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Parser)]
#[command(
    name = "tachibana",
    version,
    about = "Tachibana, Killing and planarity numbers and Laplacian identity checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Betti, Tachibana, Killing and planarity numbers of a flat torus.
    Numbers(NumbersArgs),
    /// Class memberships of a form on a chart.
    Classify(ClassifyArgs),
    /// Run an identity catalogue.
    Verify(VerifyArgs),
    /// Numbers, classifications, identities and constructions in one document.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Relative tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Seed for sample points.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NumbersArgs {
    /// `torus`, or any chart spec (only tori are supported).
    #[arg(long, default_value = "torus")]
    pub manifold: String,
    #[arg(long)]
    pub dim: usize,
    /// Form degree; all of 1..n-1 when absent.
    #[arg(long)]
    pub r: Option<usize>,
    /// Frequency band limit B.
    #[arg(long, default_value_t = 2)]
    pub band: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// `torus`, `sphere`, `ball`, `conformal` with --dim, or a chart spec
    /// such as `sphere:3:1` or `file:chart.txt`.
    #[arg(long)]
    pub manifold: String,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Sectional curvature for `sphere` (default 1) and `ball` (default -1).
    #[arg(long, allow_hyphen_values = true)]
    pub curvature: Option<f64>,
    /// Conformal factor exponent f for `conformal` (metric e^(2f) δ).
    #[arg(long)]
    pub factor: Option<String>,
    /// Form fixture file, or a form spec such as `killing` or `random:3:1`.
    #[arg(long)]
    pub form: String,
    #[arg(long, default_value_t = 50)]
    pub points: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Catalogue file; the built-in catalogue when absent.
    #[arg(long)]
    pub catalogue: Option<PathBuf>,
    /// Override every fixture's point count.
    #[arg(long)]
    pub points: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, default_value_t = 2)]
    pub band: usize,
    #[arg(long, default_value_t = 20)]
    pub points: usize,
    #[command(flatten)]
    pub common: Common,
}

/// Serialized document plus whether every check in it passed.
pub struct Outcome {
    pub body: String,
    pub all_pass: bool,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct DegreeReport {
    pub numbers: NumbersSummary,
    pub duality: Vec<IdentityOutcome>,
    pub bounds: Vec<BoundOutcome>,
}

#[derive(Debug, Serialize)]
pub struct NumbersSummary {
    pub n: usize,
    pub r: usize,
    pub band: usize,
    pub b: usize,
    pub t: usize,
    pub k: usize,
    pub p: usize,
    pub tol: f64,
    pub blocks: usize,
    /// smallest singular value kept as nonzero, over all blocks and operators
    pub min_kept_singular_value: f64,
}

impl From<&SpectralNumbers> for NumbersSummary {
    fn from(s: &SpectralNumbers) -> Self {
        let min_kept = s
            .blocks
            .iter()
            .flat_map(|b| b.kernels.iter().zip(&b.smallest_singular_values))
            .filter(|(k, _)| **k == 0)
            .map(|(_, v)| *v)
            .fold(f64::INFINITY, f64::min);
        Self {
            n: s.n,
            r: s.r,
            band: s.band,
            b: s.b,
            t: s.t,
            k: s.k,
            p: s.p,
            tol: s.tol,
            blocks: s.blocks.len(),
            min_kept_singular_value: min_kept,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct NumbersDoc {
    pub schema: u32,
    pub command: &'static str,
    pub manifold: String,
    pub seed: u64,
    pub degrees: Vec<DegreeReport>,
}

#[derive(Debug, Serialize)]
pub struct ClassifyDoc {
    pub schema: u32,
    pub command: &'static str,
    pub manifold: String,
    pub form: String,
    pub seed: u64,
    pub classes: Vec<String>,
    pub report: ClassificationReport,
}

#[derive(Debug, Serialize)]
pub struct VerifyDoc {
    pub schema: u32,
    pub command: &'static str,
    pub catalogue: String,
    pub seed: u64,
    pub passed: usize,
    pub failed: usize,
    pub rows: Vec<CatalogueRow>,
}

#[derive(Debug, Serialize)]
pub struct DecompositionSummary {
    pub input: String,
    pub killing_classes: Vec<String>,
    pub planar_classes: Vec<String>,
    pub reassembly_error: f64,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct ReportDoc {
    pub schema: u32,
    pub command: &'static str,
    pub seed: u64,
    pub band: usize,
    pub scope: &'static str,
    pub numbers: Vec<NumbersDoc>,
    pub classifications: Vec<ClassifyDoc>,
    pub identities: VerifyDoc,
    pub wedge_witness: WedgeWitness,
    pub decomposition: DecompositionSummary,
    pub all_pass: bool,
}

const SCOPE: &str =
    "identity checks are pointwise on charts; global numbers are computed on flat tori only";

fn class_names(report: &ClassificationReport) -> Vec<String> {
    report.classes().iter().map(|c| format!("{c:?}")).collect()
}

fn torus_dim(manifold: &str, dim: usize) -> Result<usize, CliError> {
    match manifold {
        "torus" => Ok(dim),
        other => match ChartSpec::parse(other) {
            Ok(ChartSpec::Torus(n)) if n == dim => Ok(n),
            Ok(ChartSpec::Torus(n)) => Err(CliError::Config(format!(
                "manifold `{other}` has dimension {n} but --dim is {dim}"
            ))),
            _ => Err(CliError::NotATorus(other.to_string())),
        },
    }
}

fn numbers_for(
    n: usize,
    degrees: &[usize],
    band: usize,
    tol: f64,
) -> Result<Vec<DegreeReport>, CliError> {
    let mut out = Vec::new();
    for &r in degrees {
        let a = spectral::compute_numbers(n, r, band, tol)?;
        let b = spectral::compute_numbers(n, n - r, band, tol)?;
        out.push(DegreeReport {
            numbers: NumbersSummary::from(&a),
            duality: duality_check(&a, &b),
            bounds: bound_check(&a),
        });
    }
    Ok(out)
}

fn degree_reports_pass(d: &[DegreeReport]) -> bool {
    d.iter()
        .all(|x| x.duality.iter().all(|o| o.pass) && x.bounds.iter().all(|o| o.pass))
}

pub fn cmd_numbers(args: &NumbersArgs) -> Result<(NumbersDoc, bool), CliError> {
    let n = torus_dim(&args.manifold, args.dim)?;
    if n < 2 {
        return Err(SpectralError::DimensionTooSmall(n).into());
    }
    let tol = args.common.tol.unwrap_or(spectral::DEFAULT_TOL);
    let degrees: Vec<usize> = match args.r {
        Some(r) => vec![r],
        None => (1..n).collect(),
    };
    let reports = numbers_for(n, &degrees, args.band, tol)?;
    let pass = degree_reports_pass(&reports);
    Ok((
        NumbersDoc {
            schema: SCHEMA,
            command: "numbers",
            manifold: format!("torus:{n}"),
            seed: args.common.seed,
            degrees: reports,
        },
        pass,
    ))
}

fn chart_spec(args: &ClassifyArgs) -> Result<ChartSpec, CliError> {
    let need_dim = || {
        args.dim
            .ok_or_else(|| CliError::Config(format!("--manifold {} needs --dim", args.manifold)))
    };
    Ok(match args.manifold.as_str() {
        "torus" => ChartSpec::Torus(need_dim()?),
        "sphere" => ChartSpec::Sphere(need_dim()?, args.curvature.unwrap_or(1.0)),
        "ball" => ChartSpec::Ball(need_dim()?, args.curvature.unwrap_or(-1.0)),
        "conformal" => ChartSpec::Conformal(
            need_dim()?,
            args.factor
                .clone()
                .ok_or_else(|| CliError::Config("--manifold conformal needs --factor".into()))?,
        ),
        other => ChartSpec::parse(other)?,
    })
}

fn form_spec(text: &str) -> FormSpec {
    FormSpec::parse(text).unwrap_or_else(|_| FormSpec::File(text.into()))
}

pub fn cmd_classify(args: &ClassifyArgs) -> Result<ClassifyDoc, CliError> {
    let tol = args.common.tol.unwrap_or(classify::DEFAULT_TOL);
    check_tol(tol)?;
    if args.points == 0 {
        return Err(CliError::Config("--points must be positive".into()));
    }
    let spec = chart_spec(args)?;
    let chart = spec.build(Path::new("."))?;
    let form = form_spec(&args.form).build(&chart, Path::new("."))?;
    let samples = SampleSet::seeded(&chart, args.points, args.common.seed);
    let report = classify::classify(&*form.field(), &chart, &samples, tol)?;
    Ok(ClassifyDoc {
        schema: SCHEMA,
        command: "classify",
        manifold: chart.label().name(),
        form: args.form.clone(),
        seed: args.common.seed,
        classes: class_names(&report),
        report,
    })
}

fn check_tol(tol: f64) -> Result<(), CliError> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "tolerance must be positive, got {tol}"
        )))
    }
}

fn verify_rows(
    text: Option<(&str, &Path)>,
    seed: u64,
    points: Option<usize>,
    tol: Option<f64>,
) -> Result<Vec<CatalogueRow>, CliError> {
    let (mut entries, base) = match text {
        Some((t, base)) => (parse_catalogue(t)?, base.to_path_buf()),
        None => (default_catalogue(), PathBuf::from(".")),
    };
    if let Some(t) = tol {
        check_tol(t)?;
    }
    for e in &mut entries {
        e.seed = seed;
        if let Some(p) = points {
            e.points = p.max(1);
        }
        if let Some(t) = tol {
            e.tol = t;
        }
    }
    Ok(run_catalogue(&entries, &base))
}

fn verify_doc(name: String, seed: u64, rows: Vec<CatalogueRow>) -> VerifyDoc {
    let passed = rows.iter().filter(|r| r.passed()).count();
    VerifyDoc {
        schema: SCHEMA,
        command: "verify",
        catalogue: name,
        seed,
        failed: rows.len() - passed,
        passed,
        rows,
    }
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<VerifyDoc, CliError> {
    let seed = args.common.seed;
    let rows = match &args.catalogue {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            let base = path.parent().unwrap_or(Path::new("."));
            verify_rows(Some((&text, base)), seed, args.points, args.common.tol)?
        }
        None => verify_rows(None, seed, args.points, args.common.tol)?,
    };
    let name = args
        .catalogue
        .as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_else(|| "built-in".into());
    Ok(verify_doc(name, seed, rows))
}

fn report_classifications(seed: u64, points: usize) -> Result<Vec<ClassifyDoc>, CliError> {
    let cases = [
        ("sphere:3:1", "killing"),
        ("sphere:3:1", "closedck"),
        ("sphere:2:1", "random:7:1"),
        ("torus:3", "basis:1,2"),
        ("ball:2:-1", "harmonic-coord"),
    ];
    cases
        .iter()
        .map(|(m, f)| {
            cmd_classify(&ClassifyArgs {
                manifold: m.to_string(),
                dim: None,
                curvature: None,
                factor: None,
                form: f.to_string(),
                points,
                common: Common {
                    tol: None,
                    seed,
                    format: Format::Json,
                    out: None,
                },
            })
        })
        .collect()
}

fn report_decomposition() -> Result<DecompositionSummary, CliError> {
    let n = 3;
    let mut w =
        FourierForm::new(n, 2, vec![std::f64::consts::TAU; n], 1).map_err(TheoremError::from)?;
    let a = MultiIndex::one_based(&[1, 2], n).map_err(TheoremError::from)?;
    let b = MultiIndex::one_based(&[2, 3], n).map_err(TheoremError::from)?;
    w.add_real_mode(&[0, 0, 0], &a, 1.0, 0.0)
        .map_err(TheoremError::from)?;
    w.add_real_mode(&[0, 0, 0], &b, -2.0, 0.0)
        .map_err(TheoremError::from)?;
    let dec = decomposition_check(&w, classify::DEFAULT_TOL)?;
    Ok(DecompositionSummary {
        input: "dx1^dx2 - 2 dx2^dx3 on T^3".into(),
        killing_classes: class_names(&dec.killing_report),
        planar_classes: class_names(&dec.planar_report),
        reassembly_error: dec.reassembly_error,
        pass: dec.holds(),
    })
}

pub fn cmd_report(args: &ReportArgs) -> Result<ReportDoc, CliError> {
    let seed = args.common.seed;
    let tol = args.common.tol.unwrap_or(spectral::DEFAULT_TOL);
    check_tol(tol)?;
    if args.points == 0 {
        return Err(CliError::Config("--points must be positive".into()));
    }
    let numbers = (2..=4)
        .map(|n| {
            let degrees: Vec<usize> = (1..n).collect();
            Ok(NumbersDoc {
                schema: SCHEMA,
                command: "numbers",
                manifold: format!("torus:{n}"),
                seed,
                degrees: numbers_for(n, &degrees, args.band, tol)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let classifications = report_classifications(seed, args.points)?;
    let identities = verify_doc(
        "built-in".into(),
        seed,
        verify_rows(None, seed, Some(args.points), None)?,
    );
    let wedge_witness = parallel_wedge_witness(4, 4, 2)?;
    let decomposition = report_decomposition()?;
    let all_pass = numbers.iter().all(|d| degree_reports_pass(&d.degrees))
        && identities.failed == 0
        && wedge_witness.holds()
        && decomposition.pass;
    Ok(ReportDoc {
        schema: SCHEMA,
        command: "report",
        seed,
        band: args.band,
        scope: SCOPE,
        numbers,
        classifications,
        identities,
        wedge_witness,
        decomposition,
        all_pass,
    })
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let (body, all_pass, common) = match &cli.command {
        Command::Numbers(a) => {
            let (doc, pass) = cmd_numbers(a)?;
            let body = match a.common.format {
                Format::Json => to_json(&doc)?,
                Format::Csv => output::numbers_csv(&doc)?,
            };
            (body, pass, &a.common)
        }
        Command::Classify(a) => {
            let doc = cmd_classify(a)?;
            let body = match a.common.format {
                Format::Json => to_json(&doc)?,
                Format::Csv => output::classify_csv(&doc)?,
            };
            (body, true, &a.common)
        }
        Command::Verify(a) => {
            let doc = cmd_verify(a)?;
            let body = match a.common.format {
                Format::Json => to_json(&doc)?,
                Format::Csv => to_csv(&doc.rows)?,
            };
            (body, doc.failed == 0, &a.common)
        }
        Command::Report(a) => {
            let doc = cmd_report(a)?;
            let body = match a.common.format {
                Format::Json => to_json(&doc)?,
                Format::Csv => output::report_csv(&doc)?,
            };
            (body, doc.all_pass, &a.common)
        }
    };
    Ok(Outcome {
        body,
        all_pass,
        out: common.out.clone(),
    })
}
