//! Arithmetic expressions over a universe: residue variables, series axes,
//! `+ - * / ^`, parentheses and `O(...)` precision tails.
//!
//! Exponents are integers, or parenthesised rationals such as `t^(1/2)` and
//! `t^(-3)`. Rational exponents apply only to monomials with coefficient 1.

use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::HahnSeries;
use crate::error::{Error, Result};
use crate::hahn_series::Universe;
use crate::ordered_groups::Rational;
use crate::residue_algebra::ResElement;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigInt),
    Ident(String),
    Sym(char),
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            out.push((Tok::Num(s.parse().expect("digits")), col));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
        } else if "+-*/^()".contains(c) {
            out.push((Tok::Sym(c), col));
            i += 1;
        } else if c == '−' {
            out.push((Tok::Sym('-'), col));
            i += 1;
        } else {
            return Err(Error::parse(col, format!("unexpected character {c:?}")));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
enum Ast {
    Num(BigInt),
    Ident(String, usize),
    Neg(Box<Ast>),
    Bin(char, Box<Ast>, Box<Ast>),
    Pow(Box<Ast>, Rational, usize),
    BigO(Box<Ast>, usize),
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end_col: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |(_, c)| *c)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(Error::parse(self.col(), format!("expected '{c}'")))
        }
    }

    fn expr(&mut self) -> Result<Ast> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Ast::Bin('+', Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Ast::Bin('-', Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Ast> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Ast::Bin('*', Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Ast::Bin('/', Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Ast> {
        if self.eat('-') {
            return Ok(Ast::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Ast> {
        let base = self.atom()?;
        if self.eat('^') {
            let col = self.col();
            let e = self.exponent()?;
            return Ok(Ast::Pow(Box::new(base), e, col));
        }
        Ok(base)
    }

    fn number(&mut self) -> Result<BigInt> {
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.pos += 1;
                Ok(n)
            }
            _ => Err(Error::parse(self.col(), "expected a number")),
        }
    }

    fn exponent(&mut self) -> Result<Rational> {
        if self.eat('(') {
            let neg = self.eat('-');
            let n = self.number()?;
            let d = if self.eat('/') { self.number()? } else { BigInt::one() };
            if d.is_zero() {
                return Err(Error::parse(self.col(), "zero denominator in exponent"));
            }
            self.expect(')')?;
            let q = Rational::new(n, d);
            return Ok(if neg { -q } else { q });
        }
        let neg = self.eat('-');
        let n = Rational::from_integer(self.number()?);
        Ok(if neg { -n } else { n })
    }

    fn atom(&mut self) -> Result<Ast> {
        let col = self.col();
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.pos += 1;
                Ok(Ast::Num(n))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if name == "O" {
                    self.expect('(')?;
                    let inner = self.expr()?;
                    self.expect(')')?;
                    return Ok(Ast::BigO(Box::new(inner), col));
                }
                Ok(Ast::Ident(name, col))
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            _ => Err(Error::parse(col, "expected a number, name or '('")),
        }
    }
}

fn parse(src: &str) -> Result<Ast> {
    let toks = tokenize(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end_col: src.chars().count() + 1,
    };
    let ast = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(Error::parse(p.col(), "unexpected trailing input"));
    }
    Ok(ast)
}

fn relocate(col: usize, e: Error) -> Error {
    match e {
        Error::Parse { .. } => e,
        other => Error::parse(col, other.to_string()),
    }
}

fn eval_series(u: &Universe, ast: &Ast) -> Result<HahnSeries> {
    let rank = u.rank();
    Ok(match ast {
        Ast::Num(n) => HahnSeries::constant(rank, ResElement::from_rational(Rational::from_integer(n.clone()))),
        Ast::Ident(name, col) => {
            if let Some(v) = u.var_index(name) {
                HahnSeries::constant(rank, ResElement::var(v))
            } else if let Some(g) = u.axis_unit(name) {
                HahnSeries::monomial(ResElement::one(), g)
            } else {
                return Err(Error::parse(*col, format!("unknown name {name:?}")));
            }
        }
        Ast::Neg(a) => -&eval_series(u, a)?,
        Ast::Bin(op, a, b) => {
            let x = eval_series(u, a)?;
            let y = eval_series(u, b)?;
            match op {
                '+' => &x + &y,
                '-' => &x - &y,
                '*' => x.mul(&y)?,
                '/' => x.div(&y, &u.precision())?,
                _ => unreachable!(),
            }
        }
        Ast::Pow(base, e, col) => {
            let b = eval_series(u, base)?;
            if e.is_integer() {
                let k: i64 = e
                    .to_integer()
                    .try_into()
                    .map_err(|_| Error::parse(*col, "exponent too large"))?;
                b.pow(k, &u.precision()).map_err(|err| relocate(*col, err))?
            } else {
                match b.as_monomial() {
                    Some((g, c)) if c.is_one() => HahnSeries::monomial(ResElement::one(), g.scale(e)),
                    _ => {
                        return Err(Error::parse(
                            *col,
                            "rational exponents apply only to monomials with coefficient 1",
                        ))
                    }
                }
            }
        }
        Ast::BigO(inner, col) => {
            let b = eval_series(u, inner)?;
            match b.as_monomial() {
                Some((g, _)) => HahnSeries::truncated_zero(g),
                None => return Err(Error::parse(*col, "O(...) needs a monomial")),
            }
        }
    })
}

fn eval_res(u: &Universe, ast: &Ast) -> Result<ResElement> {
    Ok(match ast {
        Ast::Num(n) => ResElement::from_rational(Rational::from_integer(n.clone())),
        Ast::Ident(name, col) => match u.var_index(name) {
            Some(v) => ResElement::var(v),
            None => return Err(Error::parse(*col, format!("unknown residue variable {name:?}"))),
        },
        Ast::Neg(a) => -&eval_res(u, a)?,
        Ast::Bin(op, a, b) => {
            let x = eval_res(u, a)?;
            let y = eval_res(u, b)?;
            match op {
                '+' => &x + &y,
                '-' => &x - &y,
                '*' => &x * &y,
                '/' => x.checked_div(&y)?,
                _ => unreachable!(),
            }
        }
        Ast::Pow(base, e, col) => {
            if !e.is_integer() {
                return Err(Error::parse(*col, "residue exponents must be integers"));
            }
            let k: i64 = e
                .to_integer()
                .try_into()
                .map_err(|_| Error::parse(*col, "exponent too large"))?;
            eval_res(u, base)?.pow(k)?
        }
        Ast::BigO(_, col) => return Err(Error::parse(*col, "O(...) is not a residue element")),
    })
}

pub fn parse_series(u: &Universe, src: &str) -> Result<HahnSeries> {
    eval_series(u, &parse(src)?)
}

pub fn parse_res(u: &Universe, src: &str) -> Result<ResElement> {
    eval_res(u, &parse(src)?)
}
