//! Seeded random generators for series, candidate bases and field triples.

use std::sync::Arc;

use num_bigint::BigInt;
use rand::Rng;

use crate::error::Result;
use crate::hahn_series::{HahnSeries, Precision, Universe};
use crate::ordered_groups::{GammaElement, Rational};
use crate::presentations::{check_hypotheses, small_rational, ValuedSubfieldPresentation};
use crate::residue_algebra::ResElement;

/// A small residue coefficient: a nonzero rational, sometimes times a
/// variable or divided by `1 + x`.
pub fn random_coeff<R: Rng>(rng: &mut R, nvars: usize) -> ResElement {
    let q = ResElement::from_rational(small_rational(rng));
    if nvars == 0 {
        return q;
    }
    let x = ResElement::var(rng.gen_range(0..nvars));
    match rng.gen_range(0..6) {
        0 | 1 => &q * &x,
        2 => (&q * &x)
            .checked_div(&(&ResElement::one() + &ResElement::var(rng.gen_range(0..nvars))))
            .expect("nonzero"),
        _ => q,
    }
}

/// A random exponent in `{-1, -1/2, 0, 1/2, 1, 3/2, 2}`.
fn random_exponent<R: Rng>(rng: &mut R) -> Rational {
    Rational::new(BigInt::from(rng.gen_range(-2i64..=4)), BigInt::from(2))
}

/// An exact series with one to four terms over the universe's axes.
pub fn random_series<R: Rng>(rng: &mut R, u: &Universe) -> HahnSeries {
    let rank = u.rank();
    let nvars = u.variables().len();
    loop {
        let mut terms = Vec::new();
        for _ in 0..rng.gen_range(1..=4) {
            let coords: Vec<Rational> = (0..rank.0 + rank.1).map(|_| random_exponent(rng)).collect();
            terms.push((GammaElement::from_coords(rank, &coords), random_coeff(rng, nvars)));
        }
        let s = HahnSeries::from_terms(rank, terms, Precision::Exact).expect("ranks agree");
        if !s.is_exact_zero() {
            return s;
        }
    }
}

/// A random candidate basis vector for a one-axis universe: one to three
/// terms with exponents in `{0, 1/2, 1, 3/2, 2}`.
pub fn random_vector<R: Rng>(rng: &mut R, u: &Universe) -> HahnSeries {
    let rank = u.rank();
    let nvars = u.variables().len();
    loop {
        let mut terms = Vec::new();
        for _ in 0..rng.gen_range(1..=3) {
            let mut coords = vec![Rational::from_integer(BigInt::from(0)); rank.0 + rank.1];
            coords[0] = Rational::new(BigInt::from(rng.gen_range(0i64..=4)), BigInt::from(2));
            let c = if nvars > 0 && rng.gen_bool(0.3) {
                &ResElement::from_rational(small_rational(rng)) * &ResElement::var(rng.gen_range(0..nvars))
            } else {
                ResElement::from_rational(small_rational(rng))
            };
            terms.push((GammaElement::from_coords(rank, &coords), c));
        }
        let s = HahnSeries::from_terms(rank, terms, Precision::Exact).expect("ranks agree");
        if !s.is_exact_zero() {
            return s;
        }
    }
}

/// A candidate basis of dimension `1..=max_dim` with pairwise distinct
/// vectors.
pub fn random_basis<R: Rng>(rng: &mut R, u: &Universe, max_dim: usize) -> Vec<HahnSeries> {
    let dim = rng.gen_range(1..=max_dim);
    let mut out: Vec<HahnSeries> = Vec::with_capacity(dim);
    while out.len() < dim {
        let v = random_vector(rng, u);
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// Base fields `C` and extensions `L`, `M` over it, for the universe with
/// axes `t1, t2` and residue variables `x1..x4`.
pub struct Triple {
    pub c: Arc<ValuedSubfieldPresentation>,
    pub l: Arc<ValuedSubfieldPresentation>,
    pub m: Arc<ValuedSubfieldPresentation>,
}

pub fn triple_universe() -> Universe {
    Universe::new(&["t1", "t2"], &["x1", "x2", "x3", "x4"])
}

/// A random triple passing the lifting hypotheses. The base is one of `Q`,
/// `Q(x1)` or `Q((t1))`; `L` adjoins elements built from `x2` and `t2`, `M`
/// elements built from `x3`, `x4` and `t1`.
pub fn random_triple<R: Rng>(rng: &mut R, u: &Universe, d: u32) -> Result<Triple> {
    let target = u.precision();
    let parse = |s: &str| u.parse_series(s).expect("fixed expressions parse");
    loop {
        let c = match rng.gen_range(0..3) {
            0 => ValuedSubfieldPresentation::prime("C", u.rank(), target.clone()),
            1 => ValuedSubfieldPresentation::new("C", None, vec![parse("x1")], d, target.clone())?,
            _ => ValuedSubfieldPresentation::new("C", None, vec![parse("t1")], d, target.clone())?,
        };
        let l_pool = ["x2", "t2", "x2*t2", "t2^(1/2)", "x2 + t2", "2*x2*t2^2"];
        let m_pool = ["x3", "x4", "x3*t1", "t1", "x3 + x4*t1", "x4^2"];
        let pick = |rng: &mut R, pool: &[&str]| -> Vec<HahnSeries> {
            let k = rng.gen_range(1..=2);
            let mut out: Vec<HahnSeries> = Vec::new();
            while out.len() < k {
                let s = parse(pool[rng.gen_range(0..pool.len())]);
                if !out.contains(&s) {
                    out.push(s);
                }
            }
            out
        };
        let l = ValuedSubfieldPresentation::new("L", Some(c.clone()), pick(rng, &l_pool), d, target.clone())?;
        let m = ValuedSubfieldPresentation::new("M", Some(c.clone()), pick(rng, &m_pool), d, target.clone())?;
        let hyp = check_hypotheses(&l, &m, &c);
        if hyp.all_pass() {
            return Ok(Triple { c, l, m });
        }
    }
}
