//! Scalar expressions over chart coordinates.
//!
//! Expressions define metric components and form components. They are
//! immutable trees with shared subterms, support exact symbolic
//! differentiation, plain evaluation, and evaluation to Taylor [`Jet`]s.
//!
//! Grammar (the `ln` function is an extension used for conformal factors):
//!
//! ```text
//! expr   := term (("+"|"-") term)* ;
//! term   := factor (("*"|"/") factor)* ;
//! factor := base ("^" integer)? ;
//! base   := number | "pi" | ident | "(" expr ")" | func "(" expr ")" | "-" base ;
//! func   := "sin" | "cos" | "exp" | "sqrt" | "ln" ;
//! ident  := "x" digit+ ;
//! ```

mod parser;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::jet::{Jet, JetSpace};

pub use parser::{parse, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Ln,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Ln => "ln",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "ln" => Func::Ln,
            _ => return None,
        })
    }
}

#[derive(Debug, PartialEq)]
pub enum Node {
    Num(f64),
    Pi,
    /// Zero-based coordinate index; printed as `x{i+1}`.
    Var(usize),
    Add(Expression, Expression),
    Sub(Expression, Expression),
    Mul(Expression, Expression),
    Div(Expression, Expression),
    Pow(Expression, u32),
    Neg(Expression),
    Call(Func, Expression),
}

/// Immutable expression tree. Cloning is cheap.
///
/// The constructors fold constants and drop neutral elements; no further
/// simplification is attempted.
#[derive(Clone, PartialEq)]
pub struct Expression(Arc<Node>);

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("domain violation in `{subterm}`: {reason}")]
    Domain {
        subterm: String,
        reason: &'static str,
    },
    #[error("point has {got} coordinates but `x{needed}` is referenced")]
    MissingCoordinate { needed: usize, got: usize },
}

impl Expression {
    pub fn node(&self) -> &Node {
        &self.0
    }

    fn wrap(n: Node) -> Self {
        Expression(Arc::new(n))
    }

    pub fn num(v: f64) -> Self {
        Self::wrap(Node::Num(v))
    }

    pub fn zero() -> Self {
        Self::num(0.0)
    }

    pub fn one() -> Self {
        Self::num(1.0)
    }

    pub fn pi() -> Self {
        Self::wrap(Node::Pi)
    }

    /// Coordinate `x_{i+1}` (zero-based index).
    pub fn var(i: usize) -> Self {
        Self::wrap(Node::Var(i))
    }

    pub fn as_num(&self) -> Option<f64> {
        match *self.0 {
            Node::Num(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_num() == Some(0.0)
    }

    pub fn add(a: &Expression, b: &Expression) -> Self {
        match (a.as_num(), b.as_num()) {
            (Some(x), Some(y)) => Self::num(x + y),
            (Some(x), _) if x == 0.0 => b.clone(),
            (_, Some(y)) if y == 0.0 => a.clone(),
            _ => Self::wrap(Node::Add(a.clone(), b.clone())),
        }
    }

    pub fn sub(a: &Expression, b: &Expression) -> Self {
        match (a.as_num(), b.as_num()) {
            (Some(x), Some(y)) => Self::num(x - y),
            (_, Some(y)) if y == 0.0 => a.clone(),
            (Some(x), _) if x == 0.0 => Self::neg(b),
            _ => Self::wrap(Node::Sub(a.clone(), b.clone())),
        }
    }

    pub fn mul(a: &Expression, b: &Expression) -> Self {
        match (a.as_num(), b.as_num()) {
            (Some(x), Some(y)) => Self::num(x * y),
            (Some(x), _) if x == 0.0 => Self::zero(),
            (_, Some(y)) if y == 0.0 => Self::zero(),
            (Some(x), _) if x == 1.0 => b.clone(),
            (_, Some(y)) if y == 1.0 => a.clone(),
            _ => Self::wrap(Node::Mul(a.clone(), b.clone())),
        }
    }

    pub fn div(a: &Expression, b: &Expression) -> Self {
        match (a.as_num(), b.as_num()) {
            (Some(x), Some(y)) if y != 0.0 && (x / y).is_finite() => Self::num(x / y),
            (_, Some(y)) if y == 1.0 => a.clone(),
            (Some(x), Some(y)) if x == 0.0 && y != 0.0 => Self::zero(),
            (Some(x), None) if x == 0.0 => Self::zero(),
            _ => Self::wrap(Node::Div(a.clone(), b.clone())),
        }
    }

    pub fn powi(a: &Expression, k: u32) -> Self {
        match (k, a.as_num()) {
            (0, _) => Self::one(),
            (1, _) => a.clone(),
            (_, Some(x)) if x.powi(k as i32).is_finite() => Self::num(x.powi(k as i32)),
            _ => Self::wrap(Node::Pow(a.clone(), k)),
        }
    }

    pub fn neg(a: &Expression) -> Self {
        match a.node() {
            Node::Num(x) => Self::num(-x),
            Node::Neg(inner) => inner.clone(),
            _ => Self::wrap(Node::Neg(a.clone())),
        }
    }

    pub fn call(f: Func, a: &Expression) -> Self {
        if let Some(x) = a.as_num() {
            if let Ok(v) = apply_func(f, x) {
                return Self::num(v);
            }
        }
        Self::wrap(Node::Call(f, a.clone()))
    }

    pub fn sin(a: &Expression) -> Self {
        Self::call(Func::Sin, a)
    }

    pub fn cos(a: &Expression) -> Self {
        Self::call(Func::Cos, a)
    }

    pub fn exp(a: &Expression) -> Self {
        Self::call(Func::Exp, a)
    }

    pub fn sqrt(a: &Expression) -> Self {
        Self::call(Func::Sqrt, a)
    }

    pub fn ln(a: &Expression) -> Self {
        Self::call(Func::Ln, a)
    }

    /// Linear combination `Σ c_i e_i`.
    pub fn lincomb<'a>(terms: impl IntoIterator<Item = (f64, &'a Expression)>) -> Self {
        terms.into_iter().fold(Self::zero(), |acc, (c, e)| {
            Self::add(&acc, &Self::mul(&Self::num(c), e))
        })
    }

    /// Largest zero-based variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self.node() {
            Node::Num(_) | Node::Pi => None,
            Node::Var(i) => Some(*i),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                match (a.max_var(), b.max_var()) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, y) => x.or(y),
                }
            }
            Node::Pow(a, _) | Node::Neg(a) | Node::Call(_, a) => a.max_var(),
        }
    }

    /// Exact symbolic partial derivative with respect to the zero-based
    /// coordinate `i`.
    pub fn differentiate(&self, i: usize) -> Expression {
        use Expression as E;
        match self.node() {
            Node::Num(_) | Node::Pi => E::zero(),
            Node::Var(j) => E::num(if *j == i { 1.0 } else { 0.0 }),
            Node::Add(a, b) => E::add(&a.differentiate(i), &b.differentiate(i)),
            Node::Sub(a, b) => E::sub(&a.differentiate(i), &b.differentiate(i)),
            Node::Mul(a, b) => E::add(
                &E::mul(&a.differentiate(i), b),
                &E::mul(a, &b.differentiate(i)),
            ),
            Node::Div(a, b) => {
                let da = a.differentiate(i);
                let db = b.differentiate(i);
                if db.is_zero() {
                    E::div(&da, b)
                } else {
                    E::div(&E::sub(&E::mul(&da, b), &E::mul(a, &db)), &E::powi(b, 2))
                }
            }
            Node::Pow(a, k) => E::mul(
                &E::mul(&E::num(*k as f64), &E::powi(a, k - 1)),
                &a.differentiate(i),
            ),
            Node::Neg(a) => E::neg(&a.differentiate(i)),
            Node::Call(f, a) => {
                let da = a.differentiate(i);
                if da.is_zero() {
                    return E::zero();
                }
                let outer = match f {
                    Func::Sin => E::cos(a),
                    Func::Cos => E::neg(&E::sin(a)),
                    Func::Exp => self.clone(),
                    Func::Sqrt => E::div(&E::num(0.5), self),
                    Func::Ln => E::div(&E::one(), a),
                };
                E::mul(&outer, &da)
            }
        }
    }

    /// Evaluates at a point given in chart coordinates.
    pub fn evaluate(&self, p: &[f64]) -> Result<f64, EvalError> {
        let v = match self.node() {
            Node::Num(v) => *v,
            Node::Pi => std::f64::consts::PI,
            Node::Var(i) => *p.get(*i).ok_or(EvalError::MissingCoordinate {
                needed: i + 1,
                got: p.len(),
            })?,
            Node::Add(a, b) => a.evaluate(p)? + b.evaluate(p)?,
            Node::Sub(a, b) => a.evaluate(p)? - b.evaluate(p)?,
            Node::Mul(a, b) => a.evaluate(p)? * b.evaluate(p)?,
            Node::Div(a, b) => {
                let den = b.evaluate(p)?;
                if den == 0.0 {
                    return Err(self.domain("division by zero"));
                }
                a.evaluate(p)? / den
            }
            Node::Pow(a, k) => a.evaluate(p)?.powi(*k as i32),
            Node::Neg(a) => -a.evaluate(p)?,
            Node::Call(f, a) => apply_func(*f, a.evaluate(p)?).map_err(|r| self.domain(r))?,
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.domain("non-finite value"))
        }
    }

    /// Evaluates to a Taylor jet; `vars` are the coordinate jets at the point.
    pub fn eval_jet(&self, vars: &[Jet]) -> Result<Jet, EvalError> {
        let space = vars
            .first()
            .map(|v| v.space().clone())
            .unwrap_or_else(|| JetSpace::new(0, 0));
        self.eval_jet_in(&space, vars)
    }

    fn eval_jet_in(&self, space: &Arc<JetSpace>, vars: &[Jet]) -> Result<Jet, EvalError> {
        let j = match self.node() {
            Node::Num(v) => Jet::constant(space, *v),
            Node::Pi => Jet::constant(space, std::f64::consts::PI),
            Node::Var(i) => vars
                .get(*i)
                .ok_or(EvalError::MissingCoordinate {
                    needed: i + 1,
                    got: vars.len(),
                })?
                .clone(),
            Node::Add(a, b) => &a.eval_jet_in(space, vars)? + &b.eval_jet_in(space, vars)?,
            Node::Sub(a, b) => &a.eval_jet_in(space, vars)? - &b.eval_jet_in(space, vars)?,
            Node::Mul(a, b) => &a.eval_jet_in(space, vars)? * &b.eval_jet_in(space, vars)?,
            Node::Div(a, b) => {
                let num = a.eval_jet_in(space, vars)?;
                let den = b.eval_jet_in(space, vars)?;
                num.div(&den)
                    .ok_or_else(|| self.domain("division by zero"))?
            }
            Node::Pow(a, k) => a.eval_jet_in(space, vars)?.powi(*k),
            Node::Neg(a) => -&a.eval_jet_in(space, vars)?,
            Node::Call(f, a) => {
                let x = a.eval_jet_in(space, vars)?;
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Sqrt => x
                        .sqrt()
                        .ok_or_else(|| self.domain("square root at a non-positive value"))?,
                    Func::Ln => x
                        .ln()
                        .ok_or_else(|| self.domain("logarithm of a non-positive value"))?,
                }
            }
        };
        if j.coeffs().iter().all(|c| c.is_finite()) {
            Ok(j)
        } else {
            Err(self.domain("non-finite value"))
        }
    }

    fn domain(&self, reason: &'static str) -> EvalError {
        EvalError::Domain {
            subterm: self.to_string(),
            reason,
        }
    }
}

fn apply_func(f: Func, x: f64) -> Result<f64, &'static str> {
    match f {
        Func::Sin => Ok(x.sin()),
        Func::Cos => Ok(x.cos()),
        Func::Exp => Ok(x.exp()),
        Func::Sqrt if x < 0.0 => Err("square root of a negative value"),
        Func::Sqrt => Ok(x.sqrt()),
        Func::Ln if x <= 0.0 => Err("logarithm of a non-positive value"),
        Func::Ln => Ok(x.ln()),
    }
}

impl std::ops::Add for &Expression {
    type Output = Expression;
    fn add(self, rhs: &Expression) -> Expression {
        Expression::add(self, rhs)
    }
}

impl std::ops::Sub for &Expression {
    type Output = Expression;
    fn sub(self, rhs: &Expression) -> Expression {
        Expression::sub(self, rhs)
    }
}

impl std::ops::Mul for &Expression {
    type Output = Expression;
    fn mul(self, rhs: &Expression) -> Expression {
        Expression::mul(self, rhs)
    }
}

impl std::ops::Div for &Expression {
    type Output = Expression;
    fn div(self, rhs: &Expression) -> Expression {
        Expression::div(self, rhs)
    }
}

impl std::ops::Neg for &Expression {
    type Output = Expression;
    fn neg(self) -> Expression {
        Expression::neg(self)
    }
}

// Precedence levels matching the grammar productions.
const LVL_EXPR: u8 = 1;
const LVL_TERM: u8 = 2;
const LVL_FACTOR: u8 = 3;
const LVL_BASE: u8 = 4;

fn level(n: &Node) -> u8 {
    match n {
        Node::Add(..) | Node::Sub(..) => LVL_EXPR,
        Node::Mul(..) | Node::Div(..) => LVL_TERM,
        Node::Pow(..) => LVL_FACTOR,
        _ => LVL_BASE,
    }
}

fn write_at(f: &mut fmt::Formatter<'_>, e: &Expression, need: u8) -> fmt::Result {
    if level(e.node()) < need {
        write!(f, "(")?;
        write_at(f, e, LVL_EXPR)?;
        return write!(f, ")");
    }
    match e.node() {
        Node::Num(v) => write!(f, "{v:?}"),
        Node::Pi => write!(f, "pi"),
        Node::Var(i) => write!(f, "x{}", i + 1),
        Node::Add(a, b) => {
            write_at(f, a, LVL_EXPR)?;
            write!(f, "+")?;
            write_at(f, b, LVL_TERM)
        }
        Node::Sub(a, b) => {
            write_at(f, a, LVL_EXPR)?;
            write!(f, "-")?;
            write_at(f, b, LVL_TERM)
        }
        Node::Mul(a, b) => {
            write_at(f, a, LVL_TERM)?;
            write!(f, "*")?;
            write_at(f, b, LVL_FACTOR)
        }
        Node::Div(a, b) => {
            write_at(f, a, LVL_TERM)?;
            write!(f, "/")?;
            write_at(f, b, LVL_FACTOR)
        }
        Node::Pow(a, k) => {
            write_at(f, a, LVL_BASE)?;
            write!(f, "^{k}")
        }
        Node::Neg(a) => {
            write!(f, "-")?;
            write_at(f, a, LVL_BASE)
        }
        Node::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_at(f, a, LVL_EXPR)?;
            write!(f, ")")
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_at(f, self, LVL_EXPR)
    }
}

impl fmt::Debug for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expression({self})")
    }
}

impl serde::Serialize for Expression {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn central_difference(e: &Expression, p: &[f64], i: usize) -> f64 {
        let h = 1e-5;
        let mut a = p.to_vec();
        let mut b = p.to_vec();
        a[i] += h;
        b[i] -= h;
        (e.evaluate(&a).unwrap() - e.evaluate(&b).unwrap()) / (2.0 * h)
    }

    #[test]
    fn derivative_of_sin() {
        let e = parse("sin(x1)", 2).unwrap();
        assert_eq!(e.differentiate(0), parse("cos(x1)", 2).unwrap());
        assert!(e.differentiate(1).is_zero());
    }

    #[test]
    fn derivative_of_conformal_factor_matches_central_difference() {
        let e = parse("4/(1+x1^2)^2", 1).unwrap();
        let exact = e.differentiate(0).evaluate(&[0.5]).unwrap();
        let fd = central_difference(&e, &[0.5], 0);
        assert!(((exact - fd) / exact).abs() <= 1e-6, "{exact} vs {fd}");
        // closed form: -16 x / (1+x^2)^3
        let want = -16.0 * 0.5 / 1.25f64.powi(3);
        assert!((exact - want).abs() < 1e-14);
    }

    #[test]
    fn evaluate_basics() {
        assert_eq!(parse("sin(x1)", 1).unwrap().evaluate(&[0.0]).unwrap(), 0.0);
        assert_eq!(
            parse("pi", 3).unwrap().evaluate(&[1.0, 2.0, 3.0]).unwrap(),
            std::f64::consts::PI
        );
        let err = parse("1/x1", 1).unwrap().evaluate(&[0.0]).unwrap_err();
        match err {
            EvalError::Domain { subterm, .. } => assert_eq!(subterm, "1.0/x1"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse("sqrt(x1)", 1).unwrap().evaluate(&[-1.0]).is_err());
    }

    #[test]
    fn jet_agrees_with_symbolic_second_derivatives() {
        let e = parse("exp(x1*x2)/(2+cos(x1))+sqrt(1+x2^2)*ln(2+x1)", 2).unwrap();
        let p = [0.3, -0.8];
        let space = JetSpace::new(2, 2);
        let vars: Vec<Jet> = p
            .iter()
            .enumerate()
            .map(|(i, &v)| Jet::variable(&space, i, v))
            .collect();
        let j = e.eval_jet(&vars).unwrap();
        assert!((j.value() - e.evaluate(&p).unwrap()).abs() < 1e-14);
        for i in 0..2 {
            let mut ex = [0u8; 2];
            ex[i] = 1;
            let d = e.differentiate(i).evaluate(&p).unwrap();
            assert!((j.partial(&ex).unwrap() - d).abs() < 1e-13);
            for k in 0..2 {
                let mut ex = [0u8; 2];
                ex[i] += 1;
                ex[k] += 1;
                let d2 = e.differentiate(i).differentiate(k).evaluate(&p).unwrap();
                assert!((j.partial(&ex).unwrap() - d2).abs() < 1e-12);
            }
        }
    }

    fn arb_expr(n: usize) -> impl Strategy<Value = Expression> {
        let leaf = prop_oneof![
            (-3.0f64..3.0).prop_map(Expression::num),
            (0..n).prop_map(Expression::var),
            Just(Expression::pi()),
        ];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| &a + &b),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| &a - &b),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| &a * &b),
                (inner.clone(), inner.clone()).prop_map(
                    |(a, b)| &a / &Expression::add(&Expression::num(2.5), &Expression::sin(&b))
                ),
                (inner.clone(), 0u32..4).prop_map(|(a, k)| Expression::powi(&a, k)),
                inner.clone().prop_map(|a| -&a),
                inner.clone().prop_map(|a| Expression::sin(&a)),
                inner.clone().prop_map(|a| Expression::cos(&a)),
                inner
                    .clone()
                    .prop_map(|a| Expression::exp(&Expression::sin(&a))),
                inner
                    .clone()
                    .prop_map(|a| Expression::sqrt(&Expression::add(
                        &Expression::num(1.5),
                        &Expression::cos(&a)
                    ))),
            ]
        })
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1.0)
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(e in arb_expr(3), p in proptest::array::uniform3(-1.0f64..1.0)) {
            let text = e.to_string();
            let back = parse(&text, 3).unwrap();
            prop_assert_eq!(&back, &e, "text: {}", text);
            prop_assert_eq!(back.evaluate(&p).unwrap().to_bits(), e.evaluate(&p).unwrap().to_bits());
        }

        #[test]
        fn differentiation_is_linear(
            e1 in arb_expr(2), e2 in arb_expr(2),
            a in -2.0f64..2.0, b in -2.0f64..2.0,
            p in proptest::array::uniform2(-1.0f64..1.0),
        ) {
            let combo = Expression::lincomb([(a, &e1), (b, &e2)]);
            for i in 0..2 {
                let lhs = combo.differentiate(i).evaluate(&p).unwrap();
                let rhs = a * e1.differentiate(i).evaluate(&p).unwrap()
                    + b * e2.differentiate(i).evaluate(&p).unwrap();
                prop_assert!(rel(lhs, rhs) <= 1e-12, "{} vs {}", lhs, rhs);
            }
        }

        #[test]
        fn mixed_partials_commute(e in arb_expr(2), p in proptest::array::uniform2(-1.0f64..1.0)) {
            let a = e.differentiate(0).differentiate(1).evaluate(&p).unwrap();
            let b = e.differentiate(1).differentiate(0).evaluate(&p).unwrap();
            prop_assert!(rel(a, b) <= 1e-12, "{} vs {}", a, b);
        }

        #[test]
        fn symbolic_derivative_matches_central_difference(e in arb_expr(2), p in proptest::array::uniform2(-0.9f64..0.9)) {
            for i in 0..2 {
                let exact = e.differentiate(i).evaluate(&p).unwrap();
                let fd = central_difference(&e, &p, i);
                let scale = exact.abs().max(1.0);
                prop_assert!((exact - fd).abs() / scale <= 1e-6, "{} vs {}", exact, fd);
            }
        }
    }
}
