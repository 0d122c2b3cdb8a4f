//! Band-limited forms on a flat torus, stored as Fourier coefficients.
//!
//! A component is `ω_I(x) = Σ_k c_{k,I} exp(i κ_k·x)` with
//! `κ_j = 2π k_j / L_j` and `|k_j| ≤ B`. Real forms satisfy
//! `c_{-k,I} = conj(c_{k,I})`.
//!
//! Fixture format:
//!
//! ```text
//! dim 3
//! degree 1
//! periods 6.283185307179586 6.283185307179586 6.283185307179586   # optional, default 2π
//! band 2                                                          # optional
//! 1,0,0 ; 2 ; 0.5,0      # k ; I (one-based, comma separated) ; re,im
//! -1,0,0 ; 2 ; 0.5,0
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use itertools::Itertools;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{complement, shuffle_sign, Basis, ExprForm, FormError, FormField, JetForm, MultiIndex};
use crate::expr::Expression;
use crate::geometry::{LocalGeometry, MetricChart};
use crate::jet::Jet;

pub type Frequency = Vec<i64>;

#[derive(Debug, Clone, PartialEq)]
pub struct FourierForm {
    n: usize,
    r: usize,
    periods: Vec<f64>,
    band: usize,
    coeffs: BTreeMap<(Frequency, MultiIndex), Complex64>,
}

/// All frequencies in the box `[-B, B]^n`, lexicographic.
pub fn frequencies(n: usize, band: usize) -> Vec<Frequency> {
    let b = band as i64;
    if n == 0 {
        return vec![vec![]];
    }
    (0..n).map(|_| -b..=b).multi_cartesian_product().collect()
}

impl FourierForm {
    pub fn new(n: usize, r: usize, periods: Vec<f64>, band: usize) -> Result<Self, FormError> {
        if r > n {
            return Err(FormError::DegreeOutOfRange { r, n });
        }
        if periods.len() != n {
            return Err(FormError::DimensionMismatch {
                left: n,
                right: periods.len(),
            });
        }
        Ok(Self {
            n,
            r,
            periods,
            band,
            coeffs: BTreeMap::new(),
        })
    }

    /// Zero form on the torus described by `chart`.
    pub fn on_torus(chart: &MetricChart, r: usize, band: usize) -> Result<Self, FormError> {
        if !chart.is_flat_torus() {
            return Err(FormError::NotATorus);
        }
        let periods = chart.axes().iter().map(|a| a.len()).collect();
        Self::new(chart.dim(), r, periods, band)
    }

    /// A random real form with every admissible coefficient populated.
    pub fn random(
        n: usize,
        r: usize,
        periods: Vec<f64>,
        band: usize,
        seed: u64,
    ) -> Result<Self, FormError> {
        let mut out = Self::new(n, r, periods, band)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = Basis::new(n, r);
        for k in frequencies(n, band) {
            if !is_half_space(&k) && k.iter().any(|&v| v != 0) {
                continue;
            }
            for idx in basis.iter() {
                let a = rng.random::<f64>() - 0.5;
                let b = rng.random::<f64>() - 0.5;
                out.add_real_mode(&k, idx, a, b)?;
            }
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.r
    }

    pub fn band(&self) -> usize {
        self.band
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    pub fn wave_vector(&self, k: &[i64]) -> Vec<f64> {
        k.iter()
            .zip(&self.periods)
            .map(|(&kj, &l)| 2.0 * PI * kj as f64 / l)
            .collect()
    }

    fn check_k(&self, k: &[i64]) -> Result<(), FormError> {
        if k.len() != self.n {
            return Err(FormError::DimensionMismatch {
                left: self.n,
                right: k.len(),
            });
        }
        if k.iter().any(|v| v.unsigned_abs() as usize > self.band) {
            return Err(FormError::BandExceeded(k.to_vec()));
        }
        Ok(())
    }

    fn check_idx(&self, idx: &MultiIndex) -> Result<(), FormError> {
        if idx.degree() != self.r {
            return Err(FormError::DegreeMismatch {
                left: self.r,
                right: idx.degree(),
            });
        }
        MultiIndex::new(idx.indices().to_vec(), self.n).map(|_| ())
    }

    pub fn set(&mut self, k: &[i64], idx: &MultiIndex, c: Complex64) -> Result<(), FormError> {
        self.check_k(k)?;
        self.check_idx(idx)?;
        let key = (k.to_vec(), idx.clone());
        if c == Complex64::new(0.0, 0.0) {
            self.coeffs.remove(&key);
        } else {
            self.coeffs.insert(key, c);
        }
        Ok(())
    }

    pub fn coefficient(&self, k: &[i64], idx: &MultiIndex) -> Complex64 {
        self.coeffs
            .get(&(k.to_vec(), idx.clone()))
            .copied()
            .unwrap_or_default()
    }

    /// Adds `a cos(κ·x) + b sin(κ·x)` to component `idx`.
    pub fn add_real_mode(
        &mut self,
        k: &[i64],
        idx: &MultiIndex,
        a: f64,
        b: f64,
    ) -> Result<(), FormError> {
        self.check_k(k)?;
        if k.iter().all(|&v| v == 0) {
            let c = self.coefficient(k, idx) + a;
            return self.set(k, idx, c);
        }
        let neg: Vec<i64> = k.iter().map(|v| -v).collect();
        let cp = self.coefficient(k, idx) + Complex64::new(a, -b) / 2.0;
        let cm = self.coefficient(&neg, idx) + Complex64::new(a, b) / 2.0;
        self.set(k, idx, cp)?;
        self.set(&neg, idx, cm)
    }

    /// Nonzero coefficients keyed by frequency and multi-index.
    pub fn coefficients(&self) -> impl Iterator<Item = (&Frequency, &MultiIndex, Complex64)> {
        self.coeffs.iter().map(|((k, i), c)| (k, i, *c))
    }

    /// Largest violation of `c_{-k} = conj(c_k)`.
    pub fn reality_defect(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|((k, i), c)| {
                let neg: Vec<i64> = k.iter().map(|v| -v).collect();
                (self.coefficient(&neg, i) - c.conj()).norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn check_compatible(&self, other: &FourierForm) -> Result<(), FormError> {
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
        if self.periods != other.periods {
            return Err(FormError::TorusMismatch);
        }
        Ok(())
    }

    pub fn axpy(&self, s: f64, other: &FourierForm) -> Result<Self, FormError> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        out.band = self.band.max(other.band);
        for ((k, i), c) in &other.coeffs {
            let v = out.coefficient(k, i) + c * s;
            out.set(k, i, v)?;
        }
        Ok(out)
    }

    /// Global inner product `∫ g(ω,θ) dvol` by Parseval.
    pub fn global_inner(&self, other: &FourierForm) -> Result<f64, FormError> {
        self.check_compatible(other)?;
        let vol: f64 = self.periods.iter().product();
        let s: Complex64 = self
            .coeffs
            .iter()
            .map(|((k, i), c)| c * other.coefficient(k, i).conj())
            .sum();
        Ok(vol * s.re)
    }

    pub fn l2_norm(&self) -> f64 {
        self.global_inner(self).unwrap_or(0.0).max(0.0).sqrt()
    }

    /// Flat Hodge star, applied coefficientwise.
    pub fn hodge_star(&self) -> Self {
        let n = self.n;
        let mut out = Self {
            n,
            r: n - self.r,
            periods: self.periods.clone(),
            band: self.band,
            coeffs: BTreeMap::new(),
        };
        for ((k, i), c) in &self.coeffs {
            let j = complement(n, i.indices());
            let sign = shuffle_sign(i.indices(), &j);
            out.coeffs.insert((k.clone(), MultiIndex(j)), c * sign);
        }
        out
    }

    /// Samples `form` on a `(2B+1)^n` grid and takes the discrete Fourier
    /// transform. Exact for forms band-limited to `B`.
    pub fn from_expr_form(
        form: &ExprForm,
        chart: &MetricChart,
        band: usize,
    ) -> Result<Self, FormError> {
        let mut out = Self::on_torus(chart, form.degree(), band)?;
        let n = out.n;
        let m = 2 * band + 1;
        let lo: Vec<f64> = chart.axes().iter().map(|a| a.lo).collect();
        let grid: Vec<Vec<f64>> = if n == 0 {
            vec![vec![]]
        } else {
            (0..n)
                .map(|_| 0..m)
                .multi_cartesian_product()
                .map(|ix| {
                    ix.iter()
                        .enumerate()
                        .map(|(j, &t)| lo[j] + out.periods[j] * t as f64 / m as f64)
                        .collect()
                })
                .collect()
        };
        let samples: Vec<Vec<f64>> = grid
            .iter()
            .map(|x| form.evaluate(x))
            .collect::<Result<_, _>>()?;
        let basis = Basis::new(n, form.degree());
        let norm = (m as f64).powi(n as i32);
        for k in frequencies(n, band) {
            let kv = out.wave_vector(&k);
            for (rank, idx) in basis.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (x, vals) in grid.iter().zip(&samples) {
                    let th: f64 = kv.iter().zip(x).map(|(a, b)| a * b).sum();
                    acc += Complex64::from_polar(vals[rank], -th);
                }
                let c = acc / norm;
                if c.norm() > 1e-14 * (1.0 + vals_scale(&samples)) {
                    out.set(&k, idx, c)?;
                }
            }
        }
        Ok(out)
    }

    /// Real symbolic form `Σ Re(c exp(iκ·x))`.
    pub fn to_expr_form(&self) -> ExprForm {
        let n = self.n;
        let mut acc: BTreeMap<MultiIndex, Vec<(f64, Expression)>> = BTreeMap::new();
        for ((k, i), c) in &self.coeffs {
            let kv = self.wave_vector(k);
            let vars: Vec<Expression> = (0..n).map(Expression::var).collect();
            let theta = Expression::lincomb(
                kv.iter()
                    .zip(&vars)
                    .filter(|(a, _)| **a != 0.0)
                    .map(|(a, v)| (*a, v)),
            );
            let terms = acc.entry(i.clone()).or_default();
            if theta.is_zero() {
                terms.push((c.re, Expression::one()));
            } else {
                if c.re != 0.0 {
                    terms.push((c.re, Expression::cos(&theta)));
                }
                if c.im != 0.0 {
                    terms.push((-c.im, Expression::sin(&theta)));
                }
            }
        }
        let comps = acc
            .into_iter()
            .map(|(i, t)| (i, Expression::lincomb(t.iter().map(|(s, e)| (*s, e)))));
        ExprForm::from_components(n, self.r, comps).expect("indices validated on insert")
    }

    pub fn to_fixture_string(&self) -> String {
        let mut out = String::new();
        writeln!(out, "dim {}", self.n).unwrap();
        writeln!(out, "degree {}", self.r).unwrap();
        writeln!(
            out,
            "periods {}",
            self.periods.iter().map(|p| format!("{p:?}")).join(" ")
        )
        .unwrap();
        writeln!(out, "band {}", self.band).unwrap();
        for ((k, i), c) in &self.coeffs {
            writeln!(out, "{} ; {i} ; {:?},{:?}", k.iter().join(","), c.re, c.im).unwrap();
        }
        out
    }
}

fn vals_scale(samples: &[Vec<f64>]) -> f64 {
    samples.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// First nonzero entry positive.
pub(crate) fn is_half_space(k: &[i64]) -> bool {
    k.iter().find(|&&v| v != 0).is_some_and(|&v| v > 0)
}

impl FormField for FourierForm {
    fn dim(&self) -> usize {
        self.n
    }

    fn degree(&self) -> usize {
        self.r
    }

    fn jet_at(&self, geo: &LocalGeometry) -> Result<JetForm, FormError> {
        let coords = geo.coords();
        let basis = Basis::new(self.n, self.r);
        let mut out = JetForm::zeros(geo.space(), self.n, self.r);
        for ((k, i), c) in &self.coeffs {
            let kv = self.wave_vector(k);
            let mut th = Jet::zero(geo.space());
            for (a, x) in kv.iter().zip(&coords) {
                th.add_scaled(*a, x);
            }
            let slot = &mut out.components_mut()[basis.rank(i.indices())];
            slot.add_scaled(c.re, &th.cos());
            slot.add_scaled(-c.im, &th.sin());
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

pub fn parse_fourier_fixture(text: &str) -> Result<FourierForm, FormError> {
    let mut n: Option<usize> = None;
    let mut r: Option<usize> = None;
    let mut periods: Option<Vec<f64>> = None;
    let mut band: Option<usize> = None;
    let mut entries: Vec<(usize, Frequency, Vec<usize>, Complex64)> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let num = |s: &str| -> Result<usize, FormError> {
            s.trim()
                .parse()
                .map_err(|_| fixture_err(line_no, format!("bad integer `{s}`")))
        };
        match key {
            "dim" => n = Some(num(rest)?),
            "degree" => r = Some(num(rest)?),
            "band" => band = Some(num(rest)?),
            "periods" => {
                periods = Some(
                    rest.split_whitespace()
                        .map(|s| s.parse::<f64>())
                        .collect::<Result<_, _>>()
                        .map_err(|_| fixture_err(line_no, "bad period"))?,
                )
            }
            _ => {
                let parts: Vec<&str> = line.split(';').map(str::trim).collect();
                if parts.len() != 3 {
                    return Err(fixture_err(line_no, "expected `k ; I ; re,im`"));
                }
                let k: Frequency = parts[0]
                    .split(',')
                    .map(|s| s.trim().parse::<i64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| fixture_err(line_no, "bad frequency"))?;
                let idx: Vec<usize> = if parts[1].is_empty() {
                    vec![]
                } else {
                    parts[1]
                        .split(',')
                        .map(|s| s.trim().parse::<usize>())
                        .collect::<Result<_, _>>()
                        .map_err(|_| fixture_err(line_no, "bad multi-index"))?
                };
                let (re, im) = parts[2]
                    .split_once(',')
                    .ok_or_else(|| fixture_err(line_no, "expected `re,im`"))?;
                let c = Complex64::new(
                    re.trim()
                        .parse()
                        .map_err(|_| fixture_err(line_no, "bad real part"))?,
                    im.trim()
                        .parse()
                        .map_err(|_| fixture_err(line_no, "bad imaginary part"))?,
                );
                entries.push((line_no, k, idx, c));
            }
        }
    }
    let n = n.ok_or_else(|| fixture_err(0, "missing `dim`"))?;
    let r = r.ok_or_else(|| fixture_err(0, "missing `degree`"))?;
    let periods = periods.unwrap_or_else(|| vec![2.0 * PI; n]);
    let band = band.unwrap_or_else(|| {
        entries
            .iter()
            .flat_map(|(_, k, _, _)| k.iter().map(|v| v.unsigned_abs() as usize))
            .max()
            .unwrap_or(0)
    });
    let mut out = FourierForm::new(n, r, periods, band)?;
    for (line_no, k, idx, c) in entries {
        if idx.len() != r {
            return Err(fixture_err(line_no, "multi-index has the wrong degree"));
        }
        let mi = MultiIndex::one_based(&idx, n)?;
        if out.coeffs.contains_key(&(k.clone(), mi.clone())) {
            return Err(fixture_err(line_no, "duplicate coefficient"));
        }
        out.set(&k, &mi, c)?;
    }
    Ok(out)
}
