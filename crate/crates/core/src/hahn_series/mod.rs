//! Generalized power series with finite support, exponents in a lexicographic
//! value group and coefficients in the residue field, carrying an explicit
//! precision tail.

mod expr;
mod universe;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use crate::error::{Error, Result};
use crate::ordered_groups::GammaElement;
use crate::residue_algebra::ResElement;
use crate::rv_sort::RvElement;

pub use universe::{default_cutoff, Universe, DEFAULT_PRECISION, PRECISION_ENV};

/// Upper bound on the number of geometric-series steps in [`hs_inv`].
const MAX_INVERSE_STEPS: usize = 10_000;

/// Either an exact series, or a cutoff below which every term is known.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Precision {
    Exact,
    Cutoff(GammaElement),
}

impl Precision {
    pub fn cutoff(&self) -> Option<&GammaElement> {
        match self {
            Precision::Exact => None,
            Precision::Cutoff(c) => Some(c),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Precision::Exact)
    }

    /// The coarser of two precisions.
    pub fn min(&self, other: &Precision) -> Precision {
        match (self, other) {
            (Precision::Exact, p) | (p, Precision::Exact) => p.clone(),
            (Precision::Cutoff(a), Precision::Cutoff(b)) => Precision::Cutoff(a.min(b).clone()),
        }
    }

    /// Whether a term at exponent `g` is below the cutoff.
    pub fn admits(&self, g: &GammaElement) -> bool {
        self.cutoff().is_none_or(|c| g < c)
    }
}

/// A finite-support series `Σ c_γ t^γ` plus an optional `O(t^cutoff)` tail.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HahnSeries {
    rank: (usize, usize),
    terms: BTreeMap<GammaElement, ResElement>,
    precision: Precision,
}

impl HahnSeries {
    /// Builds a series, summing repeated exponents and dropping zero
    /// coefficients and terms at or beyond the cutoff.
    pub fn from_terms(
        rank: (usize, usize),
        terms: Vec<(GammaElement, ResElement)>,
        precision: Precision,
    ) -> Result<Self> {
        if let Precision::Cutoff(c) = &precision {
            c.check_rank(rank)?;
        }
        let mut map: BTreeMap<GammaElement, ResElement> = BTreeMap::new();
        for (g, c) in terms {
            g.check_rank(rank)?;
            if !precision.admits(&g) {
                continue;
            }
            match map.get_mut(&g) {
                Some(acc) => *acc = &*acc + &c,
                None => {
                    map.insert(g, c);
                }
            }
        }
        map.retain(|_, c| !c.is_zero());
        Ok(HahnSeries {
            rank,
            terms: map,
            precision,
        })
    }

    fn from_map(rank: (usize, usize), mut terms: BTreeMap<GammaElement, ResElement>, precision: Precision) -> Self {
        terms.retain(|g, c| !c.is_zero() && precision.admits(g));
        HahnSeries { rank, terms, precision }
    }

    pub fn zero(rank: (usize, usize)) -> Self {
        HahnSeries {
            rank,
            terms: BTreeMap::new(),
            precision: Precision::Exact,
        }
    }

    /// `O(t^cutoff)`: no known terms.
    pub fn truncated_zero(cutoff: &GammaElement) -> Self {
        HahnSeries {
            rank: cutoff.rank(),
            terms: BTreeMap::new(),
            precision: Precision::Cutoff(cutoff.clone()),
        }
    }

    pub fn one(rank: (usize, usize)) -> Self {
        Self::constant(rank, ResElement::one())
    }

    pub fn constant(rank: (usize, usize), c: ResElement) -> Self {
        Self::monomial(c, GammaElement::zero(rank))
    }

    /// `c · t^g`, exact.
    pub fn monomial(c: ResElement, g: GammaElement) -> Self {
        let rank = g.rank();
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(g, c);
        }
        HahnSeries {
            rank,
            terms,
            precision: Precision::Exact,
        }
    }

    pub fn rank(&self) -> (usize, usize) {
        self.rank
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&GammaElement, &ResElement)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, g: &GammaElement) -> Option<&ResElement> {
        self.terms.get(g)
    }

    pub fn precision(&self) -> &Precision {
        &self.precision
    }

    pub fn is_exact(&self) -> bool {
        self.precision.is_exact()
    }

    pub fn is_exact_zero(&self) -> bool {
        self.terms.is_empty() && self.is_exact()
    }

    /// Whether the leading term is known: a nonzero term exists.
    pub fn is_determinable(&self) -> bool {
        !self.terms.is_empty()
    }

    /// The single term of an exact monomial.
    pub fn as_monomial(&self) -> Option<(&GammaElement, &ResElement)> {
        if self.is_exact() && self.terms.len() == 1 {
            self.terms.iter().next()
        } else {
            None
        }
    }

    pub fn leading(&self) -> Result<(&GammaElement, &ResElement)> {
        match self.terms.iter().next() {
            Some(t) => Ok(t),
            None if self.is_exact() => Err(Error::InfiniteValuation),
            None => Err(Error::PrecisionExhausted("no term is known below the cutoff".into())),
        }
    }

    pub fn valuation(&self) -> Result<GammaElement> {
        Ok(self.leading()?.0.clone())
    }

    pub fn leading_coeff(&self) -> Result<ResElement> {
        Ok(self.leading()?.1.clone())
    }

    /// Coefficient at exponent 0 of an element of the valuation ring.
    pub fn residue(&self) -> Result<ResElement> {
        let zero = GammaElement::zero(self.rank);
        match self.terms.iter().next() {
            Some((g, c)) => {
                if g < &zero {
                    Err(Error::NotInValuationRing)
                } else if g == &zero {
                    Ok(c.clone())
                } else {
                    Ok(ResElement::zero())
                }
            }
            None => match &self.precision {
                Precision::Exact => Ok(ResElement::zero()),
                Precision::Cutoff(c) if c > &zero => Ok(ResElement::zero()),
                Precision::Cutoff(_) => Err(Error::PrecisionExhausted(
                    "valuation is not determined below the cutoff".into(),
                )),
            },
        }
    }

    pub fn rv(&self) -> Result<RvElement> {
        let (g, c) = self.leading()?;
        Ok(RvElement::new(g.clone(), c.clone()))
    }

    /// A lower bound for the valuation: the valuation itself when known, the
    /// cutoff otherwise; `None` for the exact zero.
    fn valuation_floor(&self) -> Option<&GammaElement> {
        self.terms.keys().next().or(self.precision.cutoff())
    }

    /// Lowers the precision to `cutoff` if that is coarser.
    pub fn truncate(&self, cutoff: &GammaElement) -> Self {
        let p = self.precision.min(&Precision::Cutoff(cutoff.clone()));
        Self::from_map(self.rank, self.terms.clone(), p)
    }

    /// Multiplication by `c · t^g`.
    pub fn mul_monomial(&self, c: &ResElement, g: &GammaElement) -> Self {
        if c.is_zero() {
            return Self::zero(self.rank);
        }
        let terms = self.terms.iter().map(|(e, x)| (e + g, x * c)).collect();
        let precision = match &self.precision {
            Precision::Exact => Precision::Exact,
            Precision::Cutoff(cut) => Precision::Cutoff(cut + g),
        };
        HahnSeries {
            rank: self.rank,
            terms,
            precision,
        }
    }

    pub fn scale(&self, c: &ResElement) -> Self {
        self.mul_monomial(c, &GammaElement::zero(self.rank))
    }

    pub fn mul(&self, other: &HahnSeries) -> Result<HahnSeries> {
        hs_mul(self, other)
    }

    pub fn inv(&self, target: &Precision) -> Result<HahnSeries> {
        hs_inv(self, target)
    }

    pub fn div(&self, other: &HahnSeries, target: &Precision) -> Result<HahnSeries> {
        self.mul(&other.inv(target)?)
    }

    pub fn pow(&self, k: i64, target: &Precision) -> Result<HahnSeries> {
        let base = if k < 0 { self.inv(target)? } else { self.clone() };
        let mut acc = HahnSeries::one(self.rank);
        for _ in 0..k.unsigned_abs() {
            acc = acc.mul(&base)?;
        }
        Ok(acc)
    }

    /// Re-embeds into a rank with `extra` additional trailing infinitesimal
    /// axes (all new coordinates zero).
    pub fn extend_inf(&self, extra: usize) -> Self {
        let rank = (self.rank.0, self.rank.1 + extra);
        let terms = self
            .terms
            .iter()
            .map(|(g, c)| (g.extend_inf(extra), c.clone()))
            .collect();
        let precision = match &self.precision {
            Precision::Exact => Precision::Exact,
            Precision::Cutoff(c) => Precision::Cutoff(c.extend_inf(extra)),
        };
        HahnSeries { rank, terms, precision }
    }
}

/// Product with the precision rule `min(cut(a) + v(b), cut(b) + v(a))`.
pub fn hs_mul(a: &HahnSeries, b: &HahnSeries) -> Result<HahnSeries> {
    assert_eq!(a.rank, b.rank, "series of different ranks");
    if a.is_exact_zero() || b.is_exact_zero() {
        return Ok(HahnSeries::zero(a.rank));
    }
    if a.terms.is_empty() && b.terms.is_empty() {
        return Err(Error::PrecisionExhausted("product of two truncated zeros".into()));
    }
    let va = a.valuation_floor().expect("nonzero");
    let vb = b.valuation_floor().expect("nonzero");
    let mut precision = Precision::Exact;
    if let Some(ca) = a.precision.cutoff() {
        precision = precision.min(&Precision::Cutoff(ca + vb));
    }
    if let Some(cb) = b.precision.cutoff() {
        precision = precision.min(&Precision::Cutoff(cb + va));
    }
    let mut terms: BTreeMap<GammaElement, ResElement> = BTreeMap::new();
    for (ga, ca) in &a.terms {
        for (gb, cb) in &b.terms {
            let g = ga + gb;
            if !precision.admits(&g) {
                // Terms of b are increasing, so later ones are cut as well.
                break;
            }
            let c = ca * cb;
            match terms.get_mut(&g) {
                Some(acc) => *acc = &*acc + &c,
                None => {
                    terms.insert(g, c);
                }
            }
        }
    }
    Ok(HahnSeries::from_map(a.rank, terms, precision))
}

/// Inverse with `a · hs_inv(a, target) = 1 + O(target)`. Exact for exact
/// monomials; otherwise the geometric series of the unit part is expanded
/// until the target (or the input's own precision) is reached.
pub fn hs_inv(a: &HahnSeries, target: &Precision) -> Result<HahnSeries> {
    let (g, c) = match a.leading() {
        Ok(t) => t,
        Err(Error::InfiniteValuation) => return Err(Error::DivisionByZero),
        Err(e) => return Err(e),
    };
    let c_inv = c.inverse()?;
    let neg_g = -g;
    if let Some((g, c)) = a.as_monomial() {
        return Ok(HahnSeries::monomial(c.inverse()?, -g));
    }
    // a = c t^g (1 + eps), v(eps) > 0.
    let unit = a.mul_monomial(&c_inv, &neg_g);
    let mut eps = unit.clone();
    eps.terms.remove(&GammaElement::zero(a.rank));
    let relative = match (target, unit.precision.cutoff()) {
        (Precision::Exact, None) => {
            return Err(Error::PrecisionExhausted(
                "an exact inverse of a non-monomial series has infinite support".into(),
            ))
        }
        (Precision::Exact, Some(u)) => u.clone(),
        (Precision::Cutoff(t), None) => t.clone(),
        (Precision::Cutoff(t), Some(u)) => t.min(u).clone(),
    };
    let eps = eps.truncate(&relative);
    if let Some(e0) = eps.terms.keys().next() {
        if !reaches(e0, &relative) {
            return Err(Error::PrecisionExhausted(format!(
                "powers of {e0} never reach the cutoff {relative}"
            )));
        }
    }
    let neg_eps = -&eps;
    let mut sum = HahnSeries::one(a.rank).truncate(&relative);
    let mut power = sum.clone();
    let mut steps = 0;
    while !power.terms.is_empty() {
        steps += 1;
        if steps > MAX_INVERSE_STEPS {
            return Err(Error::PrecisionExhausted("inverse expansion too long".into()));
        }
        power = hs_mul(&power, &neg_eps)?.truncate(&relative);
        sum = &sum + &power;
    }
    Ok(sum.mul_monomial(&c_inv, &neg_g))
}

/// Whether some multiple `n · e` (with `e > 0`) is at least `r`.
fn reaches(e: &GammaElement, r: &GammaElement) -> bool {
    if !r.is_positive() {
        return true;
    }
    let lead = |x: &GammaElement| x.coords().iter().position(|q| !num_traits::Zero::is_zero(q));
    match (lead(e), lead(r)) {
        (Some(ie), Some(ir)) => ie <= ir,
        _ => true,
    }
}

/// Valuation; exact zero yields [`Error::InfiniteValuation`].
pub fn valuation(a: &HahnSeries) -> Result<GammaElement> {
    a.valuation()
}

pub fn residue(a: &HahnSeries) -> Result<ResElement> {
    a.residue()
}

pub fn rv_of(a: &HahnSeries) -> Result<RvElement> {
    a.rv()
}

impl Add for &HahnSeries {
    type Output = HahnSeries;
    fn add(self, rhs: &HahnSeries) -> HahnSeries {
        assert_eq!(self.rank, rhs.rank, "series of different ranks");
        let precision = self.precision.min(&rhs.precision);
        let mut terms = self.terms.clone();
        for (g, c) in &rhs.terms {
            match terms.get_mut(g) {
                Some(acc) => *acc = &*acc + c,
                None => {
                    terms.insert(g.clone(), c.clone());
                }
            }
        }
        HahnSeries::from_map(self.rank, terms, precision)
    }
}

impl Sub for &HahnSeries {
    type Output = HahnSeries;
    fn sub(self, rhs: &HahnSeries) -> HahnSeries {
        self + &(-rhs)
    }
}

impl Neg for &HahnSeries {
    type Output = HahnSeries;
    fn neg(self) -> HahnSeries {
        HahnSeries {
            rank: self.rank,
            terms: self.terms.iter().map(|(g, c)| (g.clone(), -c)).collect(),
            precision: self.precision.clone(),
        }
    }
}

impl fmt::Display for HahnSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&Universe::anonymous(self.rank).fmt_series(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ordered_groups::{int, rat};

    fn u1() -> Universe {
        Universe::new(&["t"], &["x1", "x2"])
    }

    fn u2() -> Universe {
        Universe::new(&["t1", "t2"], &["x1", "x2"])
    }

    fn s(u: &Universe, e: &str) -> HahnSeries {
        u.parse_series(e).unwrap()
    }

    fn g1(q: Rational) -> GammaElement {
        GammaElement::new(vec![q], vec![])
    }

    use crate::ordered_groups::Rational;

    #[test]
    fn multiplication_examples() {
        let u = u1();
        assert_eq!(s(&u, "(1+t)*(1-t)"), s(&u, "1 - t^2"));
        assert_eq!(s(&u, "(1+x1*t)*(1-x1*t)"), s(&u, "1 - x1^2*t^2"));
        let a = s(&u, "t + O(t^3)");
        let b = s(&u, "t^(-1)");
        let p = hs_mul(&a, &b).unwrap();
        assert_eq!(p, s(&u, "1 + O(t^2)"));
        assert_eq!(u.fmt_series(&p), "1 + O(t^2)");
    }

    #[test]
    fn precision_rule_matches_representatives() {
        // Any two representatives of a and b agree in their product below
        // the computed cutoff.
        let u = u1();
        let a = s(&u, "1 + 2*t + O(t^3)");
        let b = s(&u, "t - t^2 + O(t^4)");
        let p = hs_mul(&a, &b).unwrap();
        assert_eq!(p.precision(), &Precision::Cutoff(g1(int(4))));
        let reps = [
            (s(&u, "1 + 2*t"), s(&u, "t - t^2")),
            (s(&u, "1 + 2*t + 5*t^3 - t^7"), s(&u, "t - t^2 + x1*t^4")),
            (s(&u, "1 + 2*t + x2*t^(7/2)"), s(&u, "t - t^2 - 3*t^5")),
        ];
        for (ra, rb) in reps {
            let full = hs_mul(&ra, &rb).unwrap().truncate(&g1(int(4)));
            assert_eq!(full, p);
        }
    }

    #[test]
    fn two_truncated_zeros() {
        let u = u1();
        let z = s(&u, "O(t^2)");
        assert!(matches!(hs_mul(&z, &z), Err(Error::PrecisionExhausted(_))));
        let one = s(&u, "1 + O(t)");
        assert_eq!(hs_mul(&z, &one).unwrap(), s(&u, "O(t^2)"));
    }

    #[test]
    fn inverse_examples() {
        let u = u1();
        let t3 = Precision::Cutoff(g1(int(3)));
        let inv = hs_inv(&s(&u, "1 - t"), &t3).unwrap();
        assert_eq!(inv, s(&u, "1 + t + t^2 + O(t^3)"));
        assert_eq!(hs_inv(&s(&u, "t^2"), &Precision::Exact).unwrap(), s(&u, "t^(-2)"));
        let inv = hs_inv(&s(&u, "2 + x1*t"), &t3).unwrap();
        assert_eq!(inv, s(&u, "1/2 - (x1/4)*t + (x1^2/8)*t^2 + O(t^3)"));
        // Multiply-back oracle.
        let back = hs_mul(&inv, &s(&u, "2 + x1*t")).unwrap();
        assert_eq!(back, s(&u, "1 + O(t^3)"));
    }

    #[test]
    fn inverse_errors() {
        let u = u1();
        let t3 = Precision::Cutoff(g1(int(3)));
        assert!(hs_inv(&HahnSeries::zero((1, 0)), &t3).is_err());
        assert!(matches!(hs_inv(&s(&u, "O(t)"), &t3), Err(Error::PrecisionExhausted(_))));
        assert!(matches!(
            hs_inv(&s(&u, "1 + t"), &Precision::Exact),
            Err(Error::PrecisionExhausted(_))
        ));
        // A perturbation on the minor axis never reaches a cutoff on the major one.
        let v = u2();
        let t = Precision::Cutoff(GammaElement::from_ints(&[1, 0], &[]));
        assert!(matches!(
            hs_inv(&s(&v, "1 + t2"), &t),
            Err(Error::PrecisionExhausted(_))
        ));
    }

    #[test]
    fn inverse_of_truncated_input() {
        let u = u1();
        let a = s(&u, "t + t^2 + O(t^3)");
        let inv = hs_inv(&a, &Precision::Cutoff(g1(int(10)))).unwrap();
        // Relative precision 2, so the inverse is known below t^1.
        assert_eq!(inv, s(&u, "t^(-1) - 1 + O(t)"));
    }

    #[test]
    fn valuation_examples() {
        let u = u1();
        assert_eq!(s(&u, "t^2 + 3*t^5").valuation().unwrap(), g1(int(2)));
        assert_eq!(s(&u, "t^(1/2) + t").valuation().unwrap(), g1(rat(1, 2)));
        let v = u2();
        assert_eq!(
            s(&v, "t1*t2^(-1)").valuation().unwrap(),
            GammaElement::from_ints(&[1, -1], &[])
        );
        assert_eq!(HahnSeries::zero((1, 0)).valuation(), Err(Error::InfiniteValuation));
        assert!(matches!(s(&u, "O(t^4)").valuation(), Err(Error::PrecisionExhausted(_))));
    }

    #[test]
    fn residue_examples() {
        let u = u1();
        assert_eq!(s(&u, "2 + t").residue().unwrap(), ResElement::from_int(2));
        assert!(s(&u, "t").residue().unwrap().is_zero());
        assert_eq!(s(&u, "(1+t)/(1-t)").residue().unwrap(), ResElement::one());
        assert_eq!(s(&u, "t^(-1) + 1").residue(), Err(Error::NotInValuationRing));
    }

    #[test]
    fn rv_examples() {
        let u = u1();
        let r = s(&u, "2*t + t^2").rv().unwrap();
        assert_eq!(r, RvElement::new(g1(int(1)), ResElement::from_int(2)));
        let r = s(&u, "x1*t^(1/2)").rv().unwrap();
        assert_eq!(r, RvElement::new(g1(rat(1, 2)), ResElement::var(0)));
    }

    #[test]
    fn formatting_round_trip() {
        let u = u2();
        for e in [
            "1 - x1*t1 + (x1+x2)*t1^2*t2^(-1/3)",
            "-t2 + O(t1^2)",
            "(1/(1-x1))*t2 + 3/2",
            "O(t1)",
            "0",
        ] {
            let a = s(&u, e);
            let printed = u.fmt_series(&a);
            assert_eq!(s(&u, &printed), a, "{printed}");
            let json = u.series_to_json(&a);
            assert_eq!(u.series_from_json(&json).unwrap(), a);
        }
    }

    #[test]
    fn parse_errors_carry_columns() {
        let u = u1();
        match u.parse_series("1 + y") {
            Err(Error::Parse { column, .. }) => assert_eq!(column, 5),
            other => panic!("{other:?}"),
        }
        match u.parse_series("(1 + t") {
            Err(Error::Parse { column, .. }) => assert_eq!(column, 7),
            other => panic!("{other:?}"),
        }
        assert!(u.parse_series("(1+t)^(1/2)").is_err());
    }
}
