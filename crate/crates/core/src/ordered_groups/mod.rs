//! Value groups: finite-rank subgroups of a lexicographically ordered
//! rational vector space, optionally carrying infinitesimal axes that sit
//! below every main axis.

pub mod lattice;

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(n.into())
}

pub fn format_rational(q: &Rational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Invalid(format!("not a rational number: {s:?}"));
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(Error::DivisionByZero);
            }
            Ok(Rational::new(n, d))
        }
        None => Ok(Rational::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

/// Element of `Q^main ⊕ Q^inf`, ordered lexicographically with the main block
/// first. Within each block earlier axes are more significant.
///
/// The derived `Ord` is the lexicographic order whenever both operands share
/// a rank; [`lex_compare`] is the checked entry point.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct GammaElement {
    main: Vec<Rational>,
    inf: Vec<Rational>,
}

impl GammaElement {
    pub fn new(main: Vec<Rational>, inf: Vec<Rational>) -> Self {
        GammaElement { main, inf }
    }

    pub fn zero(rank: (usize, usize)) -> Self {
        GammaElement {
            main: vec![Rational::zero(); rank.0],
            inf: vec![Rational::zero(); rank.1],
        }
    }

    pub fn from_ints(main: &[i64], inf: &[i64]) -> Self {
        GammaElement {
            main: main.iter().map(|&x| int(x)).collect(),
            inf: inf.iter().map(|&x| int(x)).collect(),
        }
    }

    pub fn main_unit(rank: (usize, usize), axis: usize) -> Self {
        let mut g = Self::zero(rank);
        g.main[axis] = Rational::one();
        g
    }

    pub fn inf_unit(rank: (usize, usize), axis: usize) -> Self {
        let mut g = Self::zero(rank);
        g.inf[axis] = Rational::one();
        g
    }

    pub fn rank(&self) -> (usize, usize) {
        (self.main.len(), self.inf.len())
    }

    pub fn main(&self) -> &[Rational] {
        &self.main
    }

    pub fn inf(&self) -> &[Rational] {
        &self.inf
    }

    /// All coordinates, main block first.
    pub fn coords(&self) -> Vec<Rational> {
        self.main.iter().chain(&self.inf).cloned().collect()
    }

    pub fn from_coords(rank: (usize, usize), coords: &[Rational]) -> Self {
        debug_assert_eq!(coords.len(), rank.0 + rank.1);
        GammaElement {
            main: coords[..rank.0].to_vec(),
            inf: coords[rank.0..].to_vec(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.main.iter().chain(&self.inf).all(Zero::is_zero)
    }

    pub fn is_positive(&self) -> bool {
        self.sign() == Ordering::Greater
    }

    pub fn sign(&self) -> Ordering {
        for x in self.main.iter().chain(&self.inf) {
            if x.is_positive() {
                return Ordering::Greater;
            }
            if x.is_negative() {
                return Ordering::Less;
            }
        }
        Ordering::Equal
    }

    pub fn is_integral(&self) -> bool {
        self.main.iter().chain(&self.inf).all(|x| x.is_integer())
    }

    pub fn check_rank(&self, rank: (usize, usize)) -> Result<()> {
        if self.rank() == rank {
            Ok(())
        } else {
            Err(Error::RankMismatch {
                expected_main: rank.0,
                expected_inf: rank.1,
                got_main: self.main.len(),
                got_inf: self.inf.len(),
            })
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        other.check_rank(self.rank())?;
        Ok(self + other)
    }

    pub fn scale(&self, q: &Rational) -> Self {
        GammaElement {
            main: self.main.iter().map(|x| x * q).collect(),
            inf: self.inf.iter().map(|x| x * q).collect(),
        }
    }

    pub fn scale_int(&self, n: i64) -> Self {
        self.scale(&int(n))
    }

    pub fn min<'a>(&'a self, other: &'a Self) -> &'a Self {
        if other < self {
            other
        } else {
            self
        }
    }

    /// Drops the last `count` infinitesimal coordinates.
    pub fn drop_inf_tail(&self, count: usize) -> Self {
        GammaElement {
            main: self.main.clone(),
            inf: self.inf[..self.inf.len() - count].to_vec(),
        }
    }

    /// Appends `extra` zero infinitesimal coordinates.
    pub fn extend_inf(&self, extra: usize) -> Self {
        let mut inf = self.inf.clone();
        inf.extend(std::iter::repeat_n(Rational::zero(), extra));
        GammaElement {
            main: self.main.clone(),
            inf,
        }
    }
}

impl Add for &GammaElement {
    type Output = GammaElement;
    fn add(self, rhs: &GammaElement) -> GammaElement {
        assert_eq!(self.rank(), rhs.rank(), "gamma rank mismatch");
        GammaElement {
            main: self.main.iter().zip(&rhs.main).map(|(a, b)| a + b).collect(),
            inf: self.inf.iter().zip(&rhs.inf).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &GammaElement {
    type Output = GammaElement;
    fn sub(self, rhs: &GammaElement) -> GammaElement {
        self + &(-rhs)
    }
}

impl Neg for &GammaElement {
    type Output = GammaElement;
    fn neg(self) -> GammaElement {
        GammaElement {
            main: self.main.iter().map(|x| -x).collect(),
            inf: self.inf.iter().map(|x| -x).collect(),
        }
    }
}

impl fmt::Display for GammaElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let main: Vec<String> = self.main.iter().map(format_rational).collect();
        if self.inf.is_empty() && self.main.len() == 1 {
            return write!(f, "{}", main[0]);
        }
        write!(f, "({}", main.join(", "))?;
        if !self.inf.is_empty() {
            let inf: Vec<String> = self.inf.iter().map(format_rational).collect();
            write!(f, "; {}", inf.join(", "))?;
        }
        write!(f, ")")
    }
}

#[derive(Serialize, Deserialize)]
struct GammaJson {
    main: Vec<String>,
    #[serde(default)]
    inf: Vec<String>,
}

impl Serialize for GammaElement {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GammaJson {
            main: self.main.iter().map(format_rational).collect(),
            inf: self.inf.iter().map(format_rational).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GammaElement {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = GammaJson::deserialize(d)?;
        let conv = |v: &[String]| -> std::result::Result<Vec<Rational>, D::Error> {
            v.iter().map(|s| parse_rational(s).map_err(D::Error::custom)).collect()
        };
        Ok(GammaElement {
            main: conv(&raw.main)?,
            inf: conv(&raw.inf)?,
        })
    }
}

/// Total lexicographic comparison; main block first, then the infinitesimal
/// block, most significant coordinate first.
pub fn lex_compare(a: &GammaElement, b: &GammaElement) -> Result<Ordering> {
    b.check_rank(a.rank())?;
    Ok(a.cmp(b))
}

/// Integer span of finitely many generators.
#[derive(Clone, Debug)]
pub struct GammaSubgroup {
    rank: (usize, usize),
    generators: Vec<GammaElement>,
}

impl GammaSubgroup {
    pub fn new(rank: (usize, usize), generators: Vec<GammaElement>) -> Result<Self> {
        for g in &generators {
            g.check_rank(rank)?;
        }
        Ok(GammaSubgroup { rank, generators })
    }

    pub fn trivial(rank: (usize, usize)) -> Self {
        GammaSubgroup {
            rank,
            generators: Vec::new(),
        }
    }

    pub fn rank(&self) -> (usize, usize) {
        self.rank
    }

    pub fn generators(&self) -> &[GammaElement] {
        &self.generators
    }

    fn width(&self) -> usize {
        self.rank.0 + self.rank.1
    }

    /// Integer rows of `self.generators` followed by `extra`, all scaled by
    /// one common denominator.
    fn integer_rows(&self, extra: &[&GammaElement]) -> (Vec<Vec<BigInt>>, Vec<Vec<BigInt>>) {
        let gens: Vec<Vec<Rational>> = self.generators.iter().map(|g| g.coords()).collect();
        let ext: Vec<Vec<Rational>> = extra.iter().map(|g| g.coords()).collect();
        let d = lattice::common_denominator(gens.iter().chain(&ext).map(|v| v.as_slice()));
        (
            gens.iter().map(|v| lattice::scale_to_integers(v, &d)).collect(),
            ext.iter().map(|v| lattice::scale_to_integers(v, &d)).collect(),
        )
    }

    /// Integer coefficients expressing `g` in the generators, if `g` lies in
    /// the span.
    pub fn express(&self, g: &GammaElement) -> Result<Option<Vec<BigInt>>> {
        g.check_rank(self.rank)?;
        if g.is_zero() {
            return Ok(Some(vec![BigInt::zero(); self.generators.len()]));
        }
        let (rows, target) = self.integer_rows(&[g]);
        let h = lattice::hermite(&rows, self.width());
        Ok(h.solve(&target[0]))
    }

    pub fn contains(&self, g: &GammaElement) -> Result<bool> {
        Ok(self.express(g)?.is_some())
    }

    /// `self ⊆ other`.
    pub fn is_subgroup_of(&self, other: &GammaSubgroup) -> Result<bool> {
        for g in &self.generators {
            if !other.contains(g)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn same_group(&self, other: &GammaSubgroup) -> Result<bool> {
        Ok(self.is_subgroup_of(other)? && other.is_subgroup_of(self)?)
    }

    pub fn join(&self, other: &GammaSubgroup) -> Result<GammaSubgroup> {
        let mut gens = self.generators.clone();
        gens.extend(other.generators.iter().cloned());
        GammaSubgroup::new(self.rank, gens)
    }

    /// Canonical generators: the nonzero rows of the Hermite normal form.
    pub fn reduced(&self) -> GammaSubgroup {
        if self.generators.is_empty() {
            return self.clone();
        }
        let gens: Vec<Vec<Rational>> = self.generators.iter().map(|g| g.coords()).collect();
        let d = lattice::common_denominator(gens.iter().map(|v| v.as_slice()));
        let rows: Vec<Vec<BigInt>> = gens.iter().map(|v| lattice::scale_to_integers(v, &d)).collect();
        let h = lattice::hermite(&rows, self.width());
        let dq = Rational::from_integer(d);
        let generators = h
            .basis()
            .into_iter()
            .map(|row| {
                let coords: Vec<Rational> = row.into_iter().map(|x| Rational::from_integer(x) / &dq).collect();
                GammaElement::from_coords(self.rank, &coords)
            })
            .collect();
        GammaSubgroup {
            rank: self.rank,
            generators,
        }
    }

    pub fn intersection(&self, other: &GammaSubgroup) -> Result<GammaSubgroup> {
        if other.rank != self.rank {
            return Err(Error::RankMismatch {
                expected_main: self.rank.0,
                expected_inf: self.rank.1,
                got_main: other.rank.0,
                got_inf: other.rank.1,
            });
        }
        if self.generators.is_empty() || other.generators.is_empty() {
            return Ok(GammaSubgroup::trivial(self.rank));
        }
        let extra: Vec<&GammaElement> = other.generators.iter().collect();
        let (a, b) = self.integer_rows(&extra);
        let na = a.len();
        let mut stacked = a.clone();
        stacked.extend(b.iter().map(|row| row.iter().map(|x| -x).collect::<Vec<_>>()));
        let kernel = lattice::hermite(&stacked, self.width()).left_kernel();
        let gens_q: Vec<Vec<Rational>> = self.generators.iter().map(|g| g.coords()).collect();
        let mut out = Vec::new();
        for k in kernel {
            let mut acc = vec![Rational::zero(); self.width()];
            for (c, row) in k[..na].iter().zip(&gens_q) {
                let cq = Rational::from_integer(c.clone());
                for (x, y) in acc.iter_mut().zip(row) {
                    *x += &cq * y;
                }
            }
            let g = GammaElement::from_coords(self.rank, &acc);
            if !g.is_zero() {
                out.push(g);
            }
        }
        Ok(GammaSubgroup {
            rank: self.rank,
            generators: out,
        }
        .reduced())
    }

    pub fn rational_rank(&self) -> usize {
        let rows: Vec<Vec<Rational>> = self.generators.iter().map(|g| g.coords()).collect();
        lattice::rational_rank(&rows, self.width())
    }
}

impl fmt::Display for GammaSubgroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g: Vec<String> = self.generators.iter().map(|g| g.to_string()).collect();
        write!(f, "span{{{}}}", g.join(", "))
    }
}

/// Membership in the integer span, exact.
pub fn subgroup_contains(group: &GammaSubgroup, g: &GammaElement) -> Result<bool> {
    group.contains(g)
}

/// Greedy maximal sublist of `gens_l` whose images are Q-linearly independent
/// modulo `Q · group`. Input order decides ties.
pub fn q_basis_mod(gens_l: &[GammaElement], group: &GammaSubgroup) -> Result<Vec<GammaElement>> {
    let width = group.width();
    let mut rows: Vec<Vec<Rational>> = group.generators.iter().map(|g| g.coords()).collect();
    let mut rank = lattice::rational_rank(&rows, width);
    let mut chosen = Vec::new();
    for g in gens_l {
        g.check_rank(group.rank)?;
        rows.push(g.coords());
        let r = lattice::rational_rank(&rows, width);
        if r > rank {
            rank = r;
            chosen.push(g.clone());
        } else {
            rows.pop();
        }
    }
    Ok(chosen)
}

/// Whether `(span(gens_l) + group) / group` is torsion-free, i.e. whether the
/// lattice `A = span(gens_l ∪ group)` meets `Q · group` exactly in `group`.
pub fn torsion_free_quotient(gens_l: &[GammaElement], group: &GammaSubgroup) -> Result<bool> {
    for g in gens_l {
        g.check_rank(group.rank)?;
    }
    let width = group.width();
    let whole = GammaSubgroup {
        rank: group.rank,
        generators: gens_l.iter().chain(&group.generators).cloned().collect(),
    }
    .reduced();
    if whole.generators.is_empty() {
        return Ok(true);
    }
    let b_rows: Vec<Vec<Rational>> = group.generators.iter().map(|g| g.coords()).collect();
    let annihilator = lattice::right_nullspace(&b_rows, width);
    let a_rows: Vec<Vec<Rational>> = whole.generators.iter().map(|g| g.coords()).collect();
    // Pairings of A's basis against the annihilator of Q·B.
    let pairing: Vec<Vec<Rational>> = a_rows
        .iter()
        .map(|a| {
            annihilator
                .iter()
                .map(|w| a.iter().zip(w).fold(Rational::zero(), |acc, (x, y)| acc + x * y))
                .collect()
        })
        .collect();
    let candidates: Vec<Vec<BigInt>> = if annihilator.is_empty() {
        (0..a_rows.len())
            .map(|i| {
                (0..a_rows.len())
                    .map(|j| if i == j { BigInt::one() } else { BigInt::zero() })
                    .collect()
            })
            .collect()
    } else {
        let d = lattice::common_denominator(pairing.iter().map(|v| v.as_slice()));
        let rows: Vec<Vec<BigInt>> = pairing.iter().map(|v| lattice::scale_to_integers(v, &d)).collect();
        lattice::hermite(&rows, annihilator.len()).left_kernel()
    };
    for z in candidates {
        let mut acc = vec![Rational::zero(); width];
        for (c, row) in z.iter().zip(&a_rows) {
            let cq = Rational::from_integer(c.clone());
            for (x, y) in acc.iter_mut().zip(row) {
                *x += &cq * y;
            }
        }
        let g = GammaElement::from_coords(group.rank, &acc);
        if !group.contains(&g)? {
            return Ok(false);
        }
    }
    Ok(true)
}
