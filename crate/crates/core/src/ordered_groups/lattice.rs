//! Integer lattice normal forms and exact rational elimination.
//!
//! Rows are generators. Every routine here is exact; sizes are small (rank
//! at most a handful of axes), so plain `BigInt` row operations suffice.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type IntMatrix = Vec<Vec<BigInt>>;

/// Row-style Hermite normal form together with the unimodular transform.
#[derive(Debug, Clone)]
pub struct Hermite {
    /// `transform * input = form`.
    pub form: IntMatrix,
    pub transform: IntMatrix,
    /// Number of nonzero rows of `form`; they come first.
    pub rank: usize,
    /// Pivot column of each nonzero row.
    pub pivots: Vec<usize>,
}

fn identity(n: usize) -> IntMatrix {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { BigInt::one() } else { BigInt::zero() })
                .collect()
        })
        .collect()
}

fn row_sub_scaled(target: &mut [BigInt], source: &[BigInt], q: &BigInt) {
    if q.is_zero() {
        return;
    }
    for (t, s) in target.iter_mut().zip(source) {
        *t -= q * s;
    }
}

pub fn hermite(rows: &[Vec<BigInt>], ncols: usize) -> Hermite {
    let nrows = rows.len();
    let mut h: IntMatrix = rows.to_vec();
    let mut u = identity(nrows);
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..ncols {
        if r == nrows {
            break;
        }
        loop {
            // Bring the smallest nonzero entry of this column (rows >= r) up.
            let best = (r..nrows)
                .filter(|&i| !h[i][col].is_zero())
                .min_by(|&a, &b| h[a][col].abs().cmp(&h[b][col].abs()));
            let Some(best) = best else { break };
            h.swap(r, best);
            u.swap(r, best);
            let mut done = true;
            for i in (r + 1)..nrows {
                if h[i][col].is_zero() {
                    continue;
                }
                let q = h[i][col].div_floor(&h[r][col]);
                let (hr, ur) = (h[r].clone(), u[r].clone());
                row_sub_scaled(&mut h[i], &hr, &q);
                row_sub_scaled(&mut u[i], &ur, &q);
                if !h[i][col].is_zero() {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if h.get(r).is_none_or(|row| row[col].is_zero()) {
            continue;
        }
        if h[r][col].is_negative() {
            for x in h[r].iter_mut() {
                *x = -x.clone();
            }
            for x in u[r].iter_mut() {
                *x = -x.clone();
            }
        }
        let (hr, ur) = (h[r].clone(), u[r].clone());
        for i in 0..r {
            let q = h[i][col].div_floor(&hr[col]);
            row_sub_scaled(&mut h[i], &hr, &q);
            row_sub_scaled(&mut u[i], &ur, &q);
        }
        pivots.push(col);
        r += 1;
    }
    Hermite {
        form: h,
        transform: u,
        rank: r,
        pivots,
    }
}

impl Hermite {
    /// Integer coordinates of `v` with respect to the original rows, if `v`
    /// lies in their integer span.
    pub fn solve(&self, v: &[BigInt]) -> Option<Vec<BigInt>> {
        let mut rest = v.to_vec();
        let mut coeffs = vec![BigInt::zero(); self.rank];
        let mut prev = 0usize;
        for (k, &p) in self.pivots.iter().enumerate() {
            if rest[prev..p].iter().any(|x| !x.is_zero()) {
                return None;
            }
            let (q, rem) = rest[p].div_rem(&self.form[k][p]);
            if !rem.is_zero() {
                return None;
            }
            row_sub_scaled(&mut rest, &self.form[k], &q);
            coeffs[k] = q;
            prev = p + 1;
        }
        if rest.iter().any(|x| !x.is_zero()) {
            return None;
        }
        let n = self.transform.len();
        let mut out = vec![BigInt::zero(); n];
        for (k, c) in coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for (o, t) in out.iter_mut().zip(&self.transform[k]) {
                *o += c * t;
            }
        }
        Some(out)
    }

    /// Basis of the integer left kernel `{ x : x * input = 0 }`.
    pub fn left_kernel(&self) -> IntMatrix {
        self.transform[self.rank..].to_vec()
    }

    pub fn basis(&self) -> IntMatrix {
        self.form[..self.rank].to_vec()
    }
}

/// Common positive denominator of a family of rational vectors.
pub fn common_denominator<'a>(vecs: impl IntoIterator<Item = &'a [BigRational]>) -> BigInt {
    let mut d = BigInt::one();
    for v in vecs {
        for x in v {
            d = d.lcm(x.denom());
        }
    }
    d
}

pub fn scale_to_integers(v: &[BigRational], denom: &BigInt) -> Vec<BigInt> {
    v.iter()
        .map(|x| {
            let y = x * BigRational::from_integer(denom.clone());
            debug_assert!(y.is_integer());
            y.to_integer()
        })
        .collect()
}

/// Reduced row echelon form over the rationals; returns the pivot columns.
pub fn rref(rows: &mut [Vec<BigRational>], ncols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..ncols {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][col].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let inv = rows[r][col].recip();
        for x in rows[r].iter_mut() {
            *x *= &inv;
        }
        let pivot_row = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i == r || row[col].is_zero() {
                continue;
            }
            let f = row[col].clone();
            for (x, y) in row.iter_mut().zip(&pivot_row) {
                *x -= &f * y;
            }
        }
        pivots.push(col);
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    pivots
}

pub fn rational_rank(rows: &[Vec<BigRational>], ncols: usize) -> usize {
    let mut m = rows.to_vec();
    rref(&mut m, ncols).len()
}

/// Basis of `{ w : row . w = 0 for every row }`.
pub fn right_nullspace(rows: &[Vec<BigRational>], ncols: usize) -> Vec<Vec<BigRational>> {
    let mut m = rows.to_vec();
    let pivots = rref(&mut m, ncols);
    let free: Vec<usize> = (0..ncols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut w = vec![BigRational::zero(); ncols];
            w[f] = BigRational::one();
            for (k, &p) in pivots.iter().enumerate() {
                w[p] = -m[k][f].clone();
            }
            w
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn hermite_transform_is_consistent() {
        let rows = vec![ints(&[4, 6, 2]), ints(&[6, 9, 3]), ints(&[2, 0, 8])];
        let h = hermite(&rows, 3);
        for (i, urow) in h.transform.iter().enumerate() {
            let mut acc = vec![BigInt::zero(); 3];
            for (c, row) in urow.iter().zip(&rows) {
                for (a, x) in acc.iter_mut().zip(row) {
                    *a += c * x;
                }
            }
            assert_eq!(acc, h.form[i]);
        }
        assert_eq!(h.rank, 2);
        for k in h.left_kernel() {
            let mut acc = vec![BigInt::zero(); 3];
            for (c, row) in k.iter().zip(&rows) {
                for (a, x) in acc.iter_mut().zip(row) {
                    *a += c * x;
                }
            }
            assert!(acc.iter().all(|x| x.is_zero()));
        }
    }

    #[test]
    fn solve_reports_membership() {
        let rows = vec![ints(&[1, 0]), ints(&[0, 2])];
        let h = hermite(&rows, 2);
        assert_eq!(h.solve(&ints(&[3, 4])), Some(ints(&[3, 2])));
        assert_eq!(h.solve(&ints(&[0, 1])), None);
    }

    #[test]
    fn nullspace_of_single_row() {
        let q = |n: i64| BigRational::from_integer(n.into());
        let ns = right_nullspace(&[vec![q(1), q(2)]], 2);
        assert_eq!(ns, vec![vec![q(-2), q(1)]]);
    }
}
