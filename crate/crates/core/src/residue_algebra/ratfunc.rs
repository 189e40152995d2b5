use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Signed, Zero};

use super::poly::{default_var_name, Poly};
use crate::error::{Error, Result};
use crate::ordered_groups::Rational;

/// Element of the residue field `Q(x1, ..., xm)`.
///
/// Canonical form: `gcd(num, den) = 1` and `den` is monic, so two elements
/// are equal exactly when their representations are.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct ResElement {
    num: Poly,
    den: Poly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Exact field arithmetic on residue elements.
pub fn res_arith(a: &ResElement, b: &ResElement, op: ResOp) -> Result<ResElement> {
    match op {
        ResOp::Add => Ok(a + b),
        ResOp::Sub => Ok(a - b),
        ResOp::Mul => Ok(a * b),
        ResOp::Div => a.checked_div(b),
    }
}

impl ResElement {
    pub fn new(num: Poly, den: Poly) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(Self::reduce(num, den))
    }

    fn reduce(num: Poly, den: Poly) -> Self {
        if num.is_zero() {
            return ResElement::zero();
        }
        if let Some(c) = den.as_constant() {
            return ResElement {
                num: num.scale(&c.recip()),
                den: Poly::one(),
            };
        }
        let g = Poly::gcd(&num, &den);
        let (num, den) = if g.is_one() {
            (num, den)
        } else {
            (num.div_exact(&g).unwrap(), den.div_exact(&g).unwrap())
        };
        let lc = den.leading_coeff().recip();
        ResElement {
            num: num.scale(&lc),
            den: den.scale(&lc),
        }
    }

    pub fn zero() -> Self {
        ResElement {
            num: Poly::zero(),
            den: Poly::one(),
        }
    }

    pub fn one() -> Self {
        Self::from_rational(Rational::one())
    }

    pub fn from_rational(q: Rational) -> Self {
        ResElement {
            num: Poly::constant(q),
            den: Poly::one(),
        }
    }

    pub fn from_int(n: i64) -> Self {
        Self::from_rational(Rational::from_integer(n.into()))
    }

    pub fn var(v: usize) -> Self {
        Self::from_poly(Poly::var(v))
    }

    pub fn from_poly(p: Poly) -> Self {
        ResElement {
            num: p,
            den: Poly::one(),
        }
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.den.is_one() && self.num.is_one()
    }

    pub fn as_rational(&self) -> Option<Rational> {
        if self.den.is_one() {
            self.num.as_constant()
        } else {
            None
        }
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_one()
    }

    pub fn vars(&self) -> BTreeSet<usize> {
        let mut v = self.num.vars();
        v.extend(self.den.vars());
        v
    }

    pub fn inverse(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(Self::reduce(self.den.clone(), self.num.clone()))
    }

    pub fn checked_div(&self, other: &Self) -> Result<Self> {
        Ok(self * &other.inverse()?)
    }

    pub fn pow(&self, e: i64) -> Result<Self> {
        let base = if e < 0 { self.inverse()? } else { self.clone() };
        let k = e.unsigned_abs() as u32;
        Ok(ResElement {
            num: base.num.pow(k),
            den: base.den.pow(k),
        })
    }

    pub fn scale(&self, q: &Rational) -> Self {
        if q.is_zero() {
            return ResElement::zero();
        }
        ResElement {
            num: self.num.scale(q),
            den: self.den.clone(),
        }
    }

    pub fn derivative(&self, v: usize) -> Self {
        if self.den.is_one() {
            return Self::from_poly(self.num.derivative(v));
        }
        let top = &(&self.num.derivative(v) * &self.den) - &(&self.num * &self.den.derivative(v));
        Self::reduce(top, &self.den * &self.den)
    }

    /// Value at a rational point (indexed by variable); `None` when the
    /// denominator vanishes there.
    pub fn eval(&self, point: &[Rational]) -> Option<Rational> {
        let d = self.den.eval(point);
        if d.is_zero() {
            return None;
        }
        Some(self.num.eval(point) / d)
    }

    /// Sign under the ordering of `Q(x)` in which every variable is
    /// infinitely large and `x1 ≫ x2 ≫ ...`: the sign of the lex-leading
    /// coefficient (the denominator is monic).
    pub fn leading_sign(&self) -> Ordering {
        let c = self.num.leading_coeff();
        if c.is_positive() {
            Ordering::Greater
        } else if c.is_negative() {
            Ordering::Less
        } else {
            Ordering::Equal
        }
    }

    pub fn fmt_with(&self, names: &dyn Fn(usize) -> String) -> String {
        let num = self.num.fmt_with(names);
        if self.den.is_one() {
            return num;
        }
        let den = self.den.fmt_with(names);
        let wrap = |p: &Poly, s: String| {
            if p.num_terms() > 1 {
                format!("({s})")
            } else {
                s
            }
        };
        let den_wrapped = if self.den.num_terms() > 1 || !self.den.leading_coeff().is_one() {
            format!("({den})")
        } else {
            den
        };
        format!("{}/{}", wrap(&self.num, num), den_wrapped)
    }
}

impl fmt::Display for ResElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.fmt_with(&default_var_name))
    }
}

impl Add for &ResElement {
    type Output = ResElement;
    fn add(self, rhs: &ResElement) -> ResElement {
        if self.den == rhs.den {
            if self.den.is_one() {
                return ResElement {
                    num: &self.num + &rhs.num,
                    den: Poly::one(),
                };
            }
            return ResElement::reduce(&self.num + &rhs.num, self.den.clone());
        }
        let num = &(&self.num * &rhs.den) + &(&rhs.num * &self.den);
        ResElement::reduce(num, &self.den * &rhs.den)
    }
}

impl Sub for &ResElement {
    type Output = ResElement;
    fn sub(self, rhs: &ResElement) -> ResElement {
        self + &(-rhs)
    }
}

impl Neg for &ResElement {
    type Output = ResElement;
    fn neg(self) -> ResElement {
        ResElement {
            num: -&self.num,
            den: self.den.clone(),
        }
    }
}

impl Mul for &ResElement {
    type Output = ResElement;
    fn mul(self, rhs: &ResElement) -> ResElement {
        if self.is_zero() || rhs.is_zero() {
            return ResElement::zero();
        }
        if self.den.is_one() && rhs.den.is_one() {
            return ResElement {
                num: &self.num * &rhs.num,
                den: Poly::one(),
            };
        }
        ResElement::reduce(&self.num * &rhs.num, &self.den * &rhs.den)
    }
}

impl Zero for ResElement {
    fn zero() -> Self {
        ResElement::zero()
    }
    fn is_zero(&self) -> bool {
        self.num.is_zero()
    }
}

impl Add for ResElement {
    type Output = ResElement;
    fn add(self, rhs: ResElement) -> ResElement {
        &self + &rhs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ordered_groups::int;

    fn x(i: usize) -> ResElement {
        ResElement::var(i)
    }

    fn c(n: i64) -> ResElement {
        ResElement::from_int(n)
    }

    #[test]
    fn arithmetic_examples() {
        let one_over_x = res_arith(&c(1), &x(0), ResOp::Div).unwrap();
        assert!(res_arith(&x(0), &one_over_x, ResOp::Mul).unwrap().is_one());
        let s = res_arith(&(&x(0) + &x(1)), &x(1), ResOp::Sub).unwrap();
        assert_eq!(s, x(0));
    }

    #[test]
    fn sum_of_reciprocals_matches_cross_multiplication() {
        let a = c(1).checked_div(&(&c(1) - &x(0))).unwrap();
        let b = c(1).checked_div(&(&c(1) + &x(0))).unwrap();
        // Cross-multiplication oracle: (1+x) + (1-x) over (1-x)(1+x).
        let expect = ResElement::new(Poly::constant(int(2)), &Poly::one() - &(&Poly::var(0) * &Poly::var(0))).unwrap();
        assert_eq!(&a + &b, expect);
        assert_eq!((&a + &b).to_string(), "-2/(x1^2 - 1)");
    }

    #[test]
    fn division_by_zero() {
        assert_eq!(
            res_arith(&c(1), &ResElement::zero(), ResOp::Div),
            Err(Error::DivisionByZero)
        );
    }

    #[test]
    fn canonical_form_makes_equality_syntactic() {
        let a = ResElement::new(
            &(&Poly::var(0) * &Poly::var(0)) - &Poly::one(),
            (&Poly::var(0) - &Poly::one()).scale(&int(3)),
        )
        .unwrap();
        let b = (&x(0) + &c(1)).scale(&crate::ordered_groups::rat(1, 3));
        assert_eq!(a, b);
    }

    #[test]
    fn quotient_rule() {
        let f = x(0).checked_div(&(&x(0) + &c(1))).unwrap();
        let d = f.derivative(0);
        let expect = c(1).checked_div(&(&x(0) + &c(1)).pow(2).unwrap()).unwrap();
        assert_eq!(d, expect);
    }
}
