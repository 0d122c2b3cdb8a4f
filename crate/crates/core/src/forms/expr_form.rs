//! Forms with symbolic coefficients.
//!
//! Fixture format:
//!
//! ```text
//! degree 2
//! 1,2 : sin(x1)*cos(x3)
//! 2,3 : x2^2
//! ```
//!
//! Indices are one-based and must be increasing. Omitted components are
//! zero. A `0`-form is written as a single line ` : <expression>`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use itertools::Itertools;

use super::{binomial, shuffle_sign, Basis, FormError, FormField, JetForm, MultiIndex};
use crate::expr::{parse, Expression};
use crate::geometry::{LocalGeometry, MetricChart};

#[derive(Debug, Clone, PartialEq)]
pub struct ExprForm {
    n: usize,
    r: usize,
    comps: BTreeMap<MultiIndex, Expression>,
}

impl ExprForm {
    pub fn zero(n: usize, r: usize) -> Result<Self, FormError> {
        if r > n {
            return Err(FormError::DegreeOutOfRange { r, n });
        }
        Ok(Self {
            n,
            r,
            comps: BTreeMap::new(),
        })
    }

    pub fn from_components(
        n: usize,
        r: usize,
        comps: impl IntoIterator<Item = (MultiIndex, Expression)>,
    ) -> Result<Self, FormError> {
        let mut out = Self::zero(n, r)?;
        for (idx, e) in comps {
            out.set(idx, e)?;
        }
        Ok(out)
    }

    /// The constant coordinate form `dx_{i1}∧…∧dx_{ir}` (one-based).
    pub fn basis_form(n: usize, one_based: &[usize]) -> Result<Self, FormError> {
        let idx = MultiIndex::one_based(one_based, n)?;
        Self::from_components(n, one_based.len(), [(idx, Expression::one())])
    }

    /// A 1-form from its `n` coefficients.
    pub fn one_form(coeffs: Vec<Expression>) -> Self {
        let n = coeffs.len();
        let comps = coeffs
            .into_iter()
            .enumerate()
            .filter(|(_, e)| !e.is_zero())
            .map(|(i, e)| (MultiIndex(vec![i]), e))
            .collect();
        Self { n, r: 1, comps }
    }

    /// The 0-form `f`.
    pub fn function(n: usize, f: Expression) -> Self {
        let mut comps = BTreeMap::new();
        if !f.is_zero() {
            comps.insert(MultiIndex(vec![]), f);
        }
        Self { n, r: 0, comps }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.r
    }

    pub fn set(&mut self, idx: MultiIndex, e: Expression) -> Result<(), FormError> {
        if idx.degree() != self.r {
            return Err(FormError::DegreeMismatch {
                left: self.r,
                right: idx.degree(),
            });
        }
        if idx.indices().iter().any(|&i| i >= self.n) {
            return Err(FormError::IndexOutOfRange {
                indices: idx.indices().iter().map(|i| i + 1).collect(),
                n: self.n,
            });
        }
        if let Some(v) = e.max_var() {
            if v >= self.n {
                return Err(FormError::DimensionMismatch {
                    left: self.n,
                    right: v + 1,
                });
            }
        }
        if e.is_zero() {
            self.comps.remove(&idx);
        } else {
            self.comps.insert(idx, e);
        }
        Ok(())
    }

    pub fn component(&self, idx: &MultiIndex) -> Expression {
        self.comps
            .get(idx)
            .cloned()
            .unwrap_or_else(Expression::zero)
    }

    /// Nonzero components in lexicographic order.
    pub fn components(&self) -> impl Iterator<Item = (&MultiIndex, &Expression)> {
        self.comps.iter()
    }

    /// All components in basis order, zeros included.
    pub fn dense(&self) -> Vec<Expression> {
        Basis::new(self.n, self.r)
            .iter()
            .map(|i| self.component(i))
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn scale(&self, s: f64) -> Self {
        let k = Expression::num(s);
        let comps = self
            .comps
            .iter()
            .map(|(i, e)| (i.clone(), &k * e))
            .filter(|(_, e)| !e.is_zero())
            .collect();
        Self {
            n: self.n,
            r: self.r,
            comps,
        }
    }

    pub fn add(&self, other: &ExprForm) -> Result<Self, FormError> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (i, e) in &other.comps {
            let sum = &out.component(i) + e;
            out.set(i.clone(), sum)?;
        }
        Ok(out)
    }

    fn check_same(&self, other: &ExprForm) -> Result<(), FormError> {
        if self.n != other.n {
            return Err(FormError::DimensionMismatch {
                left: self.n,
                right: other.n,
            });
        }
        if self.r != other.r {
            return Err(FormError::DegreeMismatch {
                left: self.r,
                right: other.r,
            });
        }
        Ok(())
    }

    /// Symbolic wedge product.
    pub fn wedge(&self, other: &ExprForm) -> Result<Self, FormError> {
        if self.n != other.n {
            return Err(FormError::DimensionMismatch {
                left: self.n,
                right: other.n,
            });
        }
        let (p, q, n) = (self.r, other.r, self.n);
        if p + q > n {
            return Err(FormError::DegreeOverflow { p, q, n });
        }
        let mut acc: BTreeMap<MultiIndex, Vec<(f64, Expression)>> = BTreeMap::new();
        for (a, ea) in &self.comps {
            for (b, eb) in &other.comps {
                if a.indices().iter().any(|i| b.contains(*i)) {
                    continue;
                }
                let s = shuffle_sign(a.indices(), b.indices());
                let merged: Vec<usize> = a
                    .indices()
                    .iter()
                    .chain(b.indices())
                    .copied()
                    .sorted()
                    .collect();
                acc.entry(MultiIndex(merged))
                    .or_default()
                    .push((s, ea * eb));
            }
        }
        let comps = acc
            .into_iter()
            .map(|(i, terms)| (i, Expression::lincomb(terms.iter().map(|(s, e)| (*s, e)))))
            .filter(|(_, e)| !e.is_zero())
            .collect();
        Ok(Self { n, r: p + q, comps })
    }

    /// Metric-independent exterior derivative, computed symbolically.
    pub fn exterior_d(&self) -> Result<Self, FormError> {
        let n = self.n;
        if self.r >= n {
            return Err(FormError::DegreeOutOfRange { r: self.r + 1, n });
        }
        let mut acc: BTreeMap<MultiIndex, Vec<(f64, Expression)>> = BTreeMap::new();
        for (i, e) in &self.comps {
            for j in 0..n {
                if i.contains(j) {
                    continue;
                }
                let de = e.differentiate(j);
                if de.is_zero() {
                    continue;
                }
                let s = shuffle_sign(&[j], i.indices());
                let mut merged = i.indices().to_vec();
                merged.push(j);
                merged.sort_unstable();
                acc.entry(MultiIndex(merged)).or_default().push((s, de));
            }
        }
        let comps = acc
            .into_iter()
            .map(|(i, terms)| (i, Expression::lincomb(terms.iter().map(|(s, e)| (*s, e)))))
            .filter(|(_, e)| !e.is_zero())
            .collect();
        Ok(Self {
            n,
            r: self.r + 1,
            comps,
        })
    }

    /// Component values in basis order.
    pub fn evaluate(&self, p: &[f64]) -> Result<Vec<f64>, FormError> {
        Basis::new(self.n, self.r)
            .iter()
            .map(|i| match self.comps.get(i) {
                Some(e) => Ok(e.evaluate(p)?),
                None => Ok(0.0),
            })
            .collect()
    }

    /// `g(ω,θ)` at `p`.
    pub fn pointwise_inner(
        &self,
        other: &ExprForm,
        chart: &MetricChart,
        p: &[f64],
    ) -> Result<f64, FormError> {
        self.check_same(other)?;
        let geo = chart.local(p, 0)?;
        Ok(super::jet_inner(
            &self.jet_at(&geo)?,
            &other.jet_at(&geo)?,
            &geo,
        ))
    }

    pub fn to_fixture_string(&self) -> String {
        let mut out = String::new();
        writeln!(out, "dim {}", self.n).unwrap();
        writeln!(out, "degree {}", self.r).unwrap();
        for (i, e) in &self.comps {
            writeln!(out, "{i} : {e}").unwrap();
        }
        out
    }
}

impl FormField for ExprForm {
    fn dim(&self) -> usize {
        self.n
    }

    fn degree(&self) -> usize {
        self.r
    }

    fn jet_at(&self, geo: &LocalGeometry) -> Result<JetForm, FormError> {
        let coords = geo.coords();
        let mut out = JetForm::zeros(geo.space(), self.n, self.r);
        let basis = Basis::new(self.n, self.r);
        debug_assert_eq!(basis.len(), binomial(self.n, self.r));
        for (i, e) in &self.comps {
            out.components_mut()[basis.rank(i.indices())] = e.eval_jet(&coords)?;
        }
        Ok(out)
    }
}

fn fixture_err(line: usize, message: impl Into<String>) -> FormError {
    FormError::Fixture {
        line,
        message: message.into(),
    }
}

/// Reads a form fixture for a chart of dimension `n`. An optional `dim`
/// line must agree with `n`.
pub fn parse_form_fixture(text: &str, n: usize) -> Result<ExprForm, FormError> {
    let mut form: Option<ExprForm> = None;
    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.split('#').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        let trimmed = line.trim();
        if let Some(rest) = trimmed.strip_prefix("dim ") {
            let d: usize = rest
                .trim()
                .parse()
                .map_err(|_| fixture_err(line_no, "bad dimension"))?;
            if d != n {
                return Err(FormError::DimensionMismatch { left: n, right: d });
            }
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("degree ") {
            if form.is_some() {
                return Err(fixture_err(line_no, "duplicate `degree`"));
            }
            let r: usize = rest
                .trim()
                .parse()
                .map_err(|_| fixture_err(line_no, "bad degree"))?;
            form = Some(ExprForm::zero(n, r)?);
            continue;
        }
        let f = form
            .as_mut()
            .ok_or_else(|| fixture_err(line_no, "`degree` must come first"))?;
        let colon = line
            .find(':')
            .ok_or_else(|| fixture_err(line_no, "expected `<indices> : <expression>`"))?;
        let idx_text = line[..colon].trim();
        let idx: Vec<usize> = if idx_text.is_empty() {
            vec![]
        } else {
            idx_text
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|_| fixture_err(line_no, format!("bad index list `{idx_text}`")))?
        };
        if idx.len() != f.r {
            return Err(FormError::DegreeMismatch {
                left: f.r,
                right: idx.len(),
            });
        }
        let mi = MultiIndex::one_based(&idx, n)?;
        if f.comps.contains_key(&mi) {
            return Err(fixture_err(line_no, format!("duplicate component {mi}")));
        }
        let expr_text = &line[colon + 1..];
        let lead = expr_text.len() - expr_text.trim_start().len();
        let e = parse(expr_text.trim(), n).map_err(|source| FormError::Expression {
            line: line_no,
            column: colon + 2 + lead + source.offset(),
            source,
        })?;
        f.set(mi, e)?;
    }
    form.ok_or_else(|| fixture_err(0, "missing `degree`"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(s: &str, n: usize) -> Expression {
        parse(s, n).unwrap()
    }

    #[test]
    fn wedge_of_coordinate_forms() {
        let dx1 = ExprForm::basis_form(3, &[1]).unwrap();
        let dx2 = ExprForm::basis_form(3, &[2]).unwrap();
        let w = dx2.wedge(&dx1).unwrap();
        let idx = MultiIndex::one_based(&[1, 2], 3).unwrap();
        assert_eq!(w.component(&idx).as_num(), Some(-1.0));
        assert!(dx1.wedge(&dx1).unwrap().is_zero());
    }

    #[test]
    fn exterior_d_symbolic() {
        // d(sin(x1) dx2) = cos(x1) dx1∧dx2
        let w = ExprForm::from_components(
            3,
            1,
            [(MultiIndex::one_based(&[2], 3).unwrap(), e("sin(x1)", 3))],
        )
        .unwrap();
        let dw = w.exterior_d().unwrap();
        let v = dw.evaluate(&[0.4, 0.0, 0.0]).unwrap();
        assert!((v[0] - 0.4f64.cos()).abs() < 1e-15);
        assert_eq!(&v[1..], &[0.0, 0.0]);
        // d∘d = 0
        let f = ExprForm::function(3, e("x1^2*sin(x2)*exp(x3)", 3));
        assert!(f
            .exterior_d()
            .unwrap()
            .exterior_d()
            .unwrap()
            .evaluate(&[0.3, 0.2, 0.1])
            .unwrap()
            .iter()
            .all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn fixture_round_trip() {
        let text = "degree 2\n1,2 : sin(x1)*cos(x3)\n2,3 : x2^2\n";
        let f = parse_form_fixture(text, 3).unwrap();
        let back = parse_form_fixture(&f.to_fixture_string(), 3).unwrap();
        assert_eq!(f, back);
        let p = [0.1, 0.2, 0.3];
        assert_eq!(f.evaluate(&p).unwrap(), back.evaluate(&p).unwrap());
    }

    #[test]
    fn fixture_errors() {
        assert!(matches!(
            parse_form_fixture("degree 2\n2,1 : x1\n", 3),
            Err(FormError::NotIncreasing(_))
        ));
        assert!(matches!(
            parse_form_fixture("degree 1\n1 : x1 + \n", 3),
            Err(FormError::Expression { line: 2, .. })
        ));
        assert!(parse_form_fixture("1 : x1\n", 3).is_err());
        assert!(parse_form_fixture("degree 4\n", 3).is_err());
        assert!(parse_form_fixture("degree 1\n1 : x1\n1 : x2\n", 3).is_err());
    }
}
