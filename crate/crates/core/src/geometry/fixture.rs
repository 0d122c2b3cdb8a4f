//! Chart fixture files.
//!
//! ```text
//! # comments and blank lines are ignored
//! dim 2
//! label custom                 # optional: torus | sphere <C> | ball <C> | conformal <f> | custom
//! axis 1 -1 1                  # axis index, lower, upper, optional `periodic`
//! axis 2 -1 1
//! g 1 1 = 4/(1+x1^2+x2^2)^2    # unspecified entries are zero; g j i mirrors g i j
//! g 2 2 = 4/(1+x1^2+x2^2)^2
//! ```

use std::fmt::Write as _;

use thiserror::Error;

use super::{Axis, GeometryError, MetricChart, ModelTag};
use crate::expr::{parse, Expression, ParseError};

#[derive(Debug, Error)]
pub enum ChartFixtureError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}, column {column}: {source}")]
    Expression {
        line: usize,
        column: usize,
        source: ParseError,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn malformed(line: usize, message: impl Into<String>) -> ChartFixtureError {
    ChartFixtureError::Malformed {
        line,
        message: message.into(),
    }
}

pub fn parse_chart_fixture(text: &str) -> Result<MetricChart, ChartFixtureError> {
    let mut dim: Option<usize> = None;
    let mut label_line: Option<(usize, String)> = None;
    let mut axes: Vec<Option<Axis>> = Vec::new();
    let mut entries: Vec<(usize, usize, usize, Expression)> = Vec::new();

    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        match key {
            "dim" => {
                let n: usize = rest
                    .parse()
                    .map_err(|_| malformed(line_no, format!("bad dimension `{rest}`")))?;
                dim = Some(n);
                axes = vec![None; n];
            }
            "label" => label_line = Some((line_no, rest.to_string())),
            "axis" => {
                let n = dim.ok_or_else(|| malformed(line_no, "`dim` must come first"))?;
                let parts: Vec<&str> = rest.split_whitespace().collect();
                if parts.len() < 3 || parts.len() > 4 {
                    return Err(malformed(
                        line_no,
                        "expected `axis <i> <lo> <hi> [periodic]`",
                    ));
                }
                let i: usize = parts[0]
                    .parse()
                    .map_err(|_| malformed(line_no, "bad axis index"))?;
                if i == 0 || i > n {
                    return Err(malformed(line_no, format!("axis index {i} out of range")));
                }
                let lo: f64 = parts[1]
                    .parse()
                    .map_err(|_| malformed(line_no, "bad lower bound"))?;
                let hi: f64 = parts[2]
                    .parse()
                    .map_err(|_| malformed(line_no, "bad upper bound"))?;
                let periodic = match parts.get(3) {
                    None => false,
                    Some(&"periodic") => true,
                    Some(other) => {
                        return Err(malformed(line_no, format!("unknown axis flag `{other}`")))
                    }
                };
                axes[i - 1] = Some(Axis { lo, hi, periodic });
            }
            "g" => {
                let n = dim.ok_or_else(|| malformed(line_no, "`dim` must come first"))?;
                let (idx, expr_text) = rest
                    .split_once('=')
                    .ok_or_else(|| malformed(line_no, "expected `g <i> <j> = <expression>`"))?;
                let ij: Vec<usize> = idx
                    .split_whitespace()
                    .map(|s| s.parse::<usize>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| malformed(line_no, "bad metric index"))?;
                if ij.len() != 2 || ij.iter().any(|&v| v == 0 || v > n) {
                    return Err(malformed(line_no, "metric index out of range"));
                }
                let column = raw.find('=').map(|c| c + 2).unwrap_or(1);
                let lead = expr_text.len() - expr_text.trim_start().len();
                let e =
                    parse(expr_text.trim(), n).map_err(|source| ChartFixtureError::Expression {
                        line: line_no,
                        column: column + lead + source.offset(),
                        source,
                    })?;
                entries.push((line_no, ij[0] - 1, ij[1] - 1, e));
            }
            other => return Err(malformed(line_no, format!("unknown key `{other}`"))),
        }
    }

    let n = dim.ok_or_else(|| malformed(0, "missing `dim`"))?;
    let axes: Vec<Axis> = axes
        .into_iter()
        .enumerate()
        .map(|(i, a)| a.ok_or_else(|| malformed(0, format!("missing axis {}", i + 1))))
        .collect::<Result<_, _>>()?;
    let mut g = vec![Expression::zero(); n * n];
    for (line_no, i, j, e) in entries {
        if i != j && !g[j * n + i].is_zero() && g[j * n + i] != e {
            return Err(malformed(line_no, "conflicting symmetric metric entries"));
        }
        g[i * n + j] = e.clone();
        g[j * n + i] = e;
    }
    let label = match label_line {
        None => ModelTag::Custom,
        Some((line_no, text)) => parse_label(&text, n).map_err(|m| malformed(line_no, m))?,
    };
    Ok(MetricChart::custom(n, axes, g, label)?)
}

fn parse_label(text: &str, n: usize) -> Result<ModelTag, String> {
    let (kind, arg) = text.split_once(char::is_whitespace).unwrap_or((text, ""));
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| format!("bad curvature `{s}`"))
    };
    Ok(match kind {
        "torus" | "flat-torus" => ModelTag::FlatTorus,
        "sphere" => ModelTag::RoundSphere(num(arg)?),
        "ball" => ModelTag::PoincareBall(num(arg)?),
        "conformal" => ModelTag::ConformallyFlat(parse(arg.trim(), n).map_err(|e| e.to_string())?),
        "custom" => ModelTag::Custom,
        other => return Err(format!("unknown label `{other}`")),
    })
}

impl MetricChart {
    /// Serializes in the fixture format read by [`parse_chart_fixture`].
    pub fn to_fixture_string(&self) -> String {
        let n = self.dim();
        let mut out = String::new();
        writeln!(out, "dim {n}").unwrap();
        let label = match self.label() {
            ModelTag::FlatTorus => "torus".to_string(),
            ModelTag::RoundSphere(c) => format!("sphere {c:?}"),
            ModelTag::PoincareBall(c) => format!("ball {c:?}"),
            ModelTag::ConformallyFlat(f) => format!("conformal {f}"),
            ModelTag::Custom => "custom".to_string(),
        };
        writeln!(out, "label {label}").unwrap();
        for (i, a) in self.axes().iter().enumerate() {
            let flag = if a.periodic { " periodic" } else { "" };
            writeln!(out, "axis {} {:?} {:?}{flag}", i + 1, a.lo, a.hi).unwrap();
        }
        for i in 0..n {
            for j in i..n {
                let e = self.metric_entry(i, j);
                if !e.is_zero() {
                    writeln!(out, "g {} {} = {e}", i + 1, j + 1).unwrap();
                }
            }
        }
        out
    }
}
