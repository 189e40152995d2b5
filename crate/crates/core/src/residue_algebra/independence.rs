//! Linear and algebraic independence of residue elements over
//! variable-generated subfields.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::poly::{Monomial, Poly};
use super::ratfunc::ResElement;

/// The subfield `Q(x_i : i ∈ vars)` of the residue field.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ResSubfield {
    vars: BTreeSet<usize>,
}

impl ResSubfield {
    pub fn prime() -> Self {
        ResSubfield::default()
    }

    pub fn new(vars: impl IntoIterator<Item = usize>) -> Self {
        ResSubfield {
            vars: vars.into_iter().collect(),
        }
    }

    pub fn vars(&self) -> &BTreeSet<usize> {
        &self.vars
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn contains(&self, e: &ResElement) -> bool {
        e.vars().is_subset(&self.vars)
    }

    pub fn union(&self, other: &ResSubfield) -> ResSubfield {
        ResSubfield {
            vars: self.vars.union(&other.vars).copied().collect(),
        }
    }
}

/// Row-reduces `rows` over the residue field; returns the rank. The same row
/// operations are applied to `companion` (one companion row per input row).
fn eliminate(rows: &mut [Vec<ResElement>], companion: &mut [Vec<ResElement>]) -> usize {
    let ncols = rows.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..ncols {
        let Some(p) = (rank..rows.len()).find(|&i| !rows[i][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, p);
        companion.swap(rank, p);
        let inv = rows[rank][col].inverse().expect("pivot is nonzero");
        let (pivot, pivot_companion) = (rows[rank].clone(), companion[rank].clone());
        for (i, (row, comp)) in rows.iter_mut().zip(companion.iter_mut()).enumerate() {
            if i == rank || row[col].is_zero() {
                continue;
            }
            let f = &row[col] * &inv;
            for (x, p) in row[col..].iter_mut().zip(&pivot[col..]) {
                *x = &*x - &(&f * p);
            }
            for (x, p) in comp.iter_mut().zip(&pivot_companion) {
                *x = &*x - &(&f * p);
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

/// Exact rank of a matrix over the residue field.
pub fn rank(matrix: &[Vec<ResElement>]) -> usize {
    let mut rows = matrix.to_vec();
    let mut none: Vec<Vec<ResElement>> = vec![Vec::new(); rows.len()];
    eliminate(&mut rows, &mut none)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearIndependence {
    pub independent: bool,
    /// Nonzero coefficients in the subfield annihilating the elements, when
    /// they are dependent.
    pub witness: Option<Vec<ResElement>>,
}

fn poly_lcm(a: &Poly, b: &Poly) -> Poly {
    let g = Poly::gcd(a, b);
    (a * b).div_exact(&g).expect("gcd divides").monic()
}

/// Clears denominators and common content so a witness reads as a primitive
/// polynomial vector with positive leading entry.
fn normalize_witness(w: Vec<ResElement>) -> Vec<ResElement> {
    let den = w.iter().fold(Poly::one(), |acc, e| poly_lcm(&acc, e.den()));
    let nums: Vec<Poly> = w
        .iter()
        .map(|e| &e.num().clone() * &den.div_exact(e.den()).expect("lcm divides"))
        .collect();
    let content = nums.iter().fold(Poly::zero(), |acc, p| Poly::gcd(&acc, p));
    let mut nums: Vec<Poly> = nums
        .iter()
        .map(|p| p.div_exact(&content).expect("content divides"))
        .collect();
    // Rational content: make integer coefficients with gcd 1.
    let mut denom_lcm = num_bigint::BigInt::from(1);
    let mut numer_gcd = num_bigint::BigInt::from(0);
    for p in &nums {
        for (_, c) in p.terms() {
            denom_lcm = num_integer::Integer::lcm(&denom_lcm, c.denom());
        }
    }
    for p in &nums {
        for (_, c) in p.terms() {
            let scaled = (c * crate::ordered_groups::Rational::from_integer(denom_lcm.clone())).to_integer();
            numer_gcd = num_integer::Integer::gcd(&numer_gcd, &scaled);
        }
    }
    if numer_gcd != num_bigint::BigInt::from(0) {
        let f = crate::ordered_groups::Rational::new(denom_lcm, numer_gcd);
        nums = nums.iter().map(|p| p.scale(&f)).collect();
    }
    let flip = nums
        .iter()
        .find(|p| !p.is_zero())
        .is_some_and(|p| p.leading_coeff() < num_traits::Zero::zero());
    nums.into_iter()
        .map(|p| ResElement::from_poly(if flip { -&p } else { p }))
        .collect()
}

/// Decides linear independence of `elems` over the subfield. Denominators are
/// cleared, each numerator is expanded in the variables outside the subfield
/// with coefficients in the subfield, and the coefficient matrix is reduced
/// exactly over the subfield.
pub fn linearly_independent_over(elems: &[ResElement], sub: &ResSubfield) -> LinearIndependence {
    let n = elems.len();
    if n == 0 {
        return LinearIndependence {
            independent: true,
            witness: None,
        };
    }
    let den = elems.iter().fold(Poly::one(), |acc, e| poly_lcm(&acc, e.den()));
    let mut columns: BTreeMap<Monomial, usize> = BTreeMap::new();
    let mut expanded: Vec<BTreeMap<Monomial, Poly>> = Vec::with_capacity(n);
    for e in elems {
        let cleared = e.num() * &den.div_exact(e.den()).expect("lcm divides");
        let mut by_outer: BTreeMap<Monomial, Poly> = BTreeMap::new();
        for (m, c) in cleared.terms() {
            let (inner, outer) = m.split(sub.vars());
            let entry = by_outer.entry(outer.clone()).or_default();
            *entry = &*entry + &Poly::term(inner, c.clone());
            let next = columns.len();
            columns.entry(outer).or_insert(next);
        }
        expanded.push(by_outer);
    }
    let ncols = columns.len();
    let mut rows: Vec<Vec<ResElement>> = expanded
        .iter()
        .map(|row| {
            let mut r = vec![ResElement::zero(); ncols];
            for (m, p) in row {
                r[columns[m]] = ResElement::from_poly(p.clone());
            }
            r
        })
        .collect();
    let mut ident: Vec<Vec<ResElement>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { ResElement::one() } else { ResElement::zero() })
                .collect()
        })
        .collect();
    let r = eliminate(&mut rows, &mut ident);
    if r == n {
        return LinearIndependence {
            independent: true,
            witness: None,
        };
    }
    LinearIndependence {
        independent: false,
        witness: Some(normalize_witness(ident[r].clone())),
    }
}

fn jacobian_rank(elems: &[ResElement], sub: &ResSubfield) -> usize {
    let mut outer: BTreeSet<usize> = BTreeSet::new();
    for e in elems {
        outer.extend(e.vars().difference(sub.vars()).copied());
    }
    // Rows of the subfield generators are unit vectors on their own variables,
    // so the full rank is |S| plus the rank of the remaining block.
    let matrix: Vec<Vec<ResElement>> = elems
        .iter()
        .map(|e| outer.iter().map(|&v| e.derivative(v)).collect())
        .collect();
    if outer.is_empty() {
        return 0;
    }
    rank(&matrix)
}

/// Jacobian criterion (characteristic 0): `elems` are algebraically
/// independent over `Q(x_S)` iff the Jacobian of `(x_S, elems)` has full rank.
pub fn algebraically_independent_over(elems: &[ResElement], sub: &ResSubfield) -> bool {
    jacobian_rank(elems, sub) == elems.len()
}

/// Transcendence degree of `Q(x_S)(elems)` over `Q(x_S)`.
pub fn transcendence_degree(elems: &[ResElement], sub: &ResSubfield) -> usize {
    jacobian_rank(elems, sub)
}
