use thiserror::Error;

use super::{Expression, Func};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("variable `x{index}` at byte {offset} is out of range for dimension {dim}")]
    VariableOutOfRange {
        offset: usize,
        index: usize,
        dim: usize,
    },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::VariableOutOfRange { offset, .. } => *offset,
        }
    }
}

/// Parses `text` as an expression over the coordinates `x1..xn`.
pub fn parse(text: &str, n: usize) -> Result<Expression, ParseError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        dim: n,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
}

impl Parser<'_> {
    fn syntax(&self, message: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.syntax(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expression, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = Expression::add(&acc, &self.term()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = Expression::sub(&acc, &self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expression, ParseError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    acc = Expression::mul(&acc, &self.factor()?);
                }
                Some(b'/') => {
                    self.pos += 1;
                    acc = Expression::div(&acc, &self.factor()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<Expression, ParseError> {
        let base = self.base()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.syntax("expected a non-negative integer exponent"));
            }
            let k: u32 = std::str::from_utf8(&self.src[start..self.pos])
                .unwrap()
                .parse()
                .map_err(|_| ParseError::Syntax {
                    offset: start,
                    message: "exponent too large".into(),
                })?;
            return Ok(Expression::powi(&base, k));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Expression, ParseError> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'-') => {
                self.pos += 1;
                Ok(Expression::neg(&self.base()?))
            }
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            Some(c) => Err(self.syntax(&format!("unexpected character `{}`", c as char))),
        }
    }

    fn number(&mut self) -> Result<Expression, ParseError> {
        let start = self.pos;
        let s = self.src;
        let digits = |pos: &mut usize| {
            let b = *pos;
            while *pos < s.len() && s[*pos].is_ascii_digit() {
                *pos += 1;
            }
            *pos - b
        };
        let mut mantissa = digits(&mut self.pos);
        if self.pos < s.len() && s[self.pos] == b'.' {
            self.pos += 1;
            mantissa += digits(&mut self.pos);
        }
        if mantissa == 0 {
            self.pos = start;
            return Err(self.syntax("malformed number"));
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < s.len() && (s[self.pos] == b'+' || s[self.pos] == b'-') {
                self.pos += 1;
            }
            if digits(&mut self.pos) == 0 {
                self.pos = save;
                return Err(self.syntax("malformed exponent"));
            }
        }
        let text = std::str::from_utf8(&s[start..self.pos]).unwrap();
        let v: f64 = text.parse().map_err(|_| ParseError::Syntax {
            offset: start,
            message: format!("malformed number `{text}`"),
        })?;
        Ok(Expression::num(v))
    }

    fn ident(&mut self) -> Result<Expression, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        if name == "pi" {
            return Ok(Expression::pi());
        }
        if let Some(f) = Func::from_name(name) {
            self.expect(b'(')?;
            let arg = self.expr()?;
            self.expect(b')')?;
            return Ok(Expression::call(f, &arg));
        }
        if let Some(idx) = name.strip_prefix('x') {
            if !idx.is_empty() && idx.bytes().all(|b| b.is_ascii_digit()) {
                let index: usize = idx.parse().unwrap_or(usize::MAX);
                if index == 0 || index > self.dim {
                    return Err(ParseError::VariableOutOfRange {
                        offset: start,
                        index,
                        dim: self.dim,
                    });
                }
                return Ok(Expression::var(index - 1));
            }
        }
        Err(ParseError::UnknownIdentifier {
            offset: start,
            name: name.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Node;

    #[test]
    fn product_tree() {
        let e = parse("sin(x1)*cos(x2)", 2).unwrap();
        match e.node() {
            Node::Mul(a, b) => {
                assert!(matches!(a.node(), Node::Call(Func::Sin, _)));
                assert!(matches!(b.node(), Node::Call(Func::Cos, _)));
            }
            other => panic!("expected product, got {other:?}"),
        }
    }

    #[test]
    fn nested_conformal_factor() {
        let e = parse("4/(1+x1^2+x2^2)^2", 2).unwrap();
        match e.node() {
            Node::Div(num, den) => {
                assert_eq!(num.as_num(), Some(4.0));
                assert!(matches!(den.node(), Node::Pow(_, 2)));
            }
            other => panic!("expected quotient, got {other:?}"),
        }
        assert!((e.evaluate(&[0.0, 0.0]).unwrap() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn variable_out_of_range() {
        assert_eq!(
            parse("x3", 2).unwrap_err(),
            ParseError::VariableOutOfRange {
                offset: 0,
                index: 3,
                dim: 2
            }
        );
        assert!(matches!(
            parse("1 + x0", 2),
            Err(ParseError::VariableOutOfRange { offset: 4, .. })
        ));
    }

    #[test]
    fn error_offsets() {
        assert_eq!(parse("1 + * 2", 1).unwrap_err().offset(), 4);
        assert!(matches!(
            parse("tan(x1)", 1),
            Err(ParseError::UnknownIdentifier { offset: 0, .. })
        ));
        assert_eq!(parse("(x1", 1).unwrap_err().offset(), 3);
        assert_eq!(parse("x1 x1", 1).unwrap_err().offset(), 3);
        assert!(parse("x1^-2", 1).is_err());
    }

    #[test]
    fn numbers_and_unary_minus() {
        let e = parse("1.5e-1 + .5 - -2", 0).unwrap();
        assert!((e.evaluate(&[]).unwrap() - 2.65).abs() < 1e-15);
        // unary minus binds tighter than `^` by the grammar
        let e = parse("-x1^2", 1).unwrap();
        assert_eq!(e.evaluate(&[3.0]).unwrap(), 9.0);
        let e = parse("-(x1^2)", 1).unwrap();
        assert_eq!(e.evaluate(&[3.0]).unwrap(), -9.0);
    }
}
