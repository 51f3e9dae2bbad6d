use num_complex::Complex64;

use super::{BinaryOp, Interval, TimeExpr, UnaryOp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    Ge,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(Tok, usize)>> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let (tok, at) = lx.next()?;
            let end = tok == Tok::End;
            out.push((tok, at));
            if end {
                return Ok(out);
            }
        }
    }

    fn next(&mut self) -> Result<(Tok, usize)> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = bytes.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        if c.is_ascii_digit() || c == b'.' {
            return self.number(start).map(|n| (Tok::Num(n), start));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self.pos < bytes.len()
                && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_')
            {
                self.pos += 1;
            }
            return Ok((Tok::Ident(self.src[start..self.pos].to_string()), start));
        }
        if c == b'>' && bytes.get(self.pos + 1) == Some(&b'=') {
            self.pos += 2;
            return Ok((Tok::Ge, start));
        }
        if b"+-*/^(){}[],:;<".contains(&c) {
            self.pos += 1;
            return Ok((Tok::Sym(c as char), start));
        }
        let ch = self.src[start..].chars().next().unwrap_or('?');
        Err(Error::Syntax {
            offset: start,
            message: format!("unexpected character `{ch}`"),
        })
    }

    fn number(&mut self, start: usize) -> Result<f64> {
        let bytes = self.src.as_bytes();
        let digits = |lx: &mut Self| {
            while lx.pos < bytes.len() && bytes[lx.pos].is_ascii_digit() {
                lx.pos += 1;
            }
        };
        digits(self);
        if bytes.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(bytes.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(bytes.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            let exp_start = self.pos;
            digits(self);
            if self.pos == exp_start {
                // `2e` followed by something else: not an exponent
                self.pos = save;
            }
        }
        let text = &self.src[start..self.pos];
        text.parse::<f64>().map_err(|_| Error::Syntax {
            offset: start,
            message: format!("malformed number `{text}`"),
        })
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    i: usize,
}

/// Parses an expression in `t`.
pub fn parse(source: &str) -> Result<TimeExpr> {
    let mut p = Parser {
        toks: Lexer::tokens(source)?,
        i: 0,
    };
    let e = p.expr()?;
    match p.peek() {
        Tok::End => Ok(e),
        other => Err(p.error(format!("unexpected {}", describe(other)))),
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(x) => format!("number {x}"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Sym(c) => format!("`{c}`"),
        Tok::Ge => "`>=`".into(),
        Tok::End => "end of input".into(),
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn offset(&self) -> usize {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].0.clone();
        if t != Tok::End {
            self.i += 1;
        }
        t
    }

    fn error(&self, message: String) -> Error {
        Error::Syntax {
            offset: self.offset(),
            message,
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected `{c}`, found {}", describe(self.peek()))))
        }
    }

    fn expr(&mut self) -> Result<TimeExpr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('+') => BinaryOp::Add,
                Tok::Sym('-') => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = TimeExpr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<TimeExpr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('*') => BinaryOp::Mul,
                Tok::Sym('/') => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = TimeExpr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<TimeExpr> {
        match self.peek() {
            Tok::Sym('-') => {
                self.bump();
                Ok(TimeExpr::unary(UnaryOp::Neg, self.unary()?))
            }
            Tok::Sym('+') => {
                self.bump();
                self.unary()
            }
            _ => self.factor(),
        }
    }

    fn factor(&mut self) -> Result<TimeExpr> {
        let base = self.base()?;
        if *self.peek() != Tok::Sym('^') {
            return Ok(base);
        }
        self.bump();
        let negative = match self.peek() {
            Tok::Sym('-') => {
                self.bump();
                true
            }
            Tok::Sym('+') => {
                self.bump();
                false
            }
            _ => false,
        };
        let at = self.offset();
        match self.bump() {
            Tok::Num(k) if k.fract() == 0.0 && k.abs() <= i32::MAX as f64 => {
                let k = k as i32;
                Ok(base.powi(if negative { -k } else { k }))
            }
            other => Err(Error::Syntax {
                offset: at,
                message: format!("exponent must be an integer, found {}", describe(&other)),
            }),
        }
    }

    fn base(&mut self) -> Result<TimeExpr> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(x) => Ok(TimeExpr::real(x)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "t" => Ok(TimeExpr::t()),
                "i" => Ok(TimeExpr::constant(Complex64::new(0.0, 1.0))),
                "piecewise" => self.piecewise(),
                _ => match UnaryOp::from_name(&name) {
                    Some(op) => {
                        self.expect('(')?;
                        let arg = self.expr()?;
                        self.expect(')')?;
                        Ok(TimeExpr::unary(op, arg))
                    }
                    None => Err(Error::UnknownIdentifier { name, offset: at }),
                },
            },
            other => Err(Error::Syntax {
                offset: at,
                message: format!("expected a value, found {}", describe(&other)),
            }),
        }
    }

    fn piecewise(&mut self) -> Result<TimeExpr> {
        self.expect('{')?;
        let mut branches = Vec::new();
        loop {
            if matches!(self.peek(), Tok::Ident(s) if s == "else") {
                self.bump();
                self.expect(':')?;
                let default = self.expr()?;
                if *self.peek() == Tok::Sym(';') {
                    self.bump();
                }
                self.expect('}')?;
                if branches.is_empty() {
                    return Err(self.error("piecewise needs at least one guarded branch".into()));
                }
                return Ok(TimeExpr::piecewise(branches, default));
            }
            let guard = self.guard()?;
            self.expect(':')?;
            let e = self.expr()?;
            self.expect(';')?;
            branches.push((guard, e));
        }
    }

    fn guard(&mut self) -> Result<Interval> {
        let at = self.offset();
        match self.bump() {
            Tok::Sym('[') => {
                let lo = self.bound()?;
                self.expect(',')?;
                let hi = self.bound()?;
                self.expect(')')?;
                if !(lo < hi) {
                    return Err(Error::Syntax {
                        offset: at,
                        message: format!("empty guard interval [{lo}, {hi})"),
                    });
                }
                Ok(Interval::new(lo, hi))
            }
            Tok::Ident(s) if s == "t" => match self.bump() {
                Tok::Sym('<') => Ok(Interval::new(f64::NEG_INFINITY, self.bound()?)),
                Tok::Ge => Ok(Interval::new(self.bound()?, f64::INFINITY)),
                other => Err(Error::Syntax {
                    offset: at,
                    message: format!("expected `<` or `>=` in guard, found {}", describe(&other)),
                }),
            },
            other => Err(Error::Syntax {
                offset: at,
                message: format!("expected a guard, found {}", describe(&other)),
            }),
        }
    }

    fn bound(&mut self) -> Result<f64> {
        let sign = match self.peek() {
            Tok::Sym('-') => {
                self.bump();
                -1.0
            }
            Tok::Sym('+') => {
                self.bump();
                1.0
            }
            _ => 1.0,
        };
        let at = self.offset();
        match self.bump() {
            Tok::Num(x) => Ok(sign * x),
            Tok::Ident(s) if s == "inf" => Ok(sign * f64::INFINITY),
            other => Err(Error::Syntax {
                offset: at,
                message: format!("expected a numeric bound, found {}", describe(&other)),
            }),
        }
    }
}
