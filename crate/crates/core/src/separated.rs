//! Separated bases: the leading-term criterion with witnesses, the
//! constructions over trivially valued and general bases, lifting to a
//! larger coefficient field, and the compositum invariants.

use std::cmp::Ordering;

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hahn_series::{HahnSeries, Precision, Universe};
use crate::ordered_groups::GammaElement;
use crate::presentations::{
    check_hypotheses, small_rational, ValuedSubfieldPresentation, HYP_COMMON_BASE, HYP_DISJOINT, HYP_VALUE_GROUPS,
};
use crate::residue_algebra::{linearly_independent_over, ResElement};
use crate::rv_sort::RvElement;

/// Upper bound on cancellation steps for one vector in the reduction.
const MAX_CANCELLATIONS: usize = 500;

/// Coefficients from the base exhibiting a failure of separatedness:
/// `v(Σ c_i m_i) = achieved > bound = min v(c_i m_i)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeparationWitness {
    pub coefficients: Vec<HahnSeries>,
    pub achieved: GammaElement,
    pub bound: GammaElement,
    /// Set when the combination vanished below its cutoff, so `achieved`
    /// is the cutoff and only a lower bound for the true valuation.
    pub achieved_is_lower_bound: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    SeparatedGood,
    SeparatedNotGood,
    NotSeparated(SeparationWitness),
    NotIndependent,
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::SeparatedGood => "separated-good",
            Verdict::SeparatedNotGood => "separated-not-good",
            Verdict::NotSeparated(_) => "not-separated",
            Verdict::NotIndependent => "not-independent",
        }
    }

    pub fn is_separated(&self) -> bool {
        matches!(self, Verdict::SeparatedGood | Verdict::SeparatedNotGood)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasisReport {
    pub verdict: Verdict,
    /// Indices grouped by valuation modulo the base's value group, classes
    /// in order of first appearance.
    pub partition: Vec<Vec<usize>>,
    pub valuations: Vec<GammaElement>,
}

impl BasisReport {
    pub fn to_json(&self, u: &Universe) -> serde_json::Value {
        let mut v = serde_json::json!({
            "verdict": self.verdict.label(),
            "partition": self.partition,
            "valuations": self.valuations,
        });
        if let Verdict::NotSeparated(w) = &self.verdict {
            v["witness"] = serde_json::json!({
                "coefficients": w.coefficients.iter().map(|c| u.fmt_series(c)).collect::<Vec<_>>(),
                "achieved": w.achieved,
                "bound": w.bound,
                "achieved_is_lower_bound": w.achieved_is_lower_bound,
            });
        }
        v
    }
}

/// Groups indices by valuation modulo the value group of `c`.
fn partition_by_class(vals: &[GammaElement], c: &ValuedSubfieldPresentation) -> Result<Vec<Vec<usize>>> {
    let group = c.value_group();
    let mut classes: Vec<Vec<usize>> = Vec::new();
    'outer: for (i, v) in vals.iter().enumerate() {
        for class in classes.iter_mut() {
            if group.contains(&(v - &vals[class[0]]))? {
                class.push(i);
                continue 'outer;
            }
        }
        classes.push(vec![i]);
    }
    Ok(classes)
}

/// Leading coefficient of `mult · m` where `mult` is the base Laurent
/// monomial of valuation `target - v(m)`.
fn normalized_residue(
    c: &ValuedSubfieldPresentation,
    m: &HahnSeries,
    target: &GammaElement,
) -> Result<(Vec<BigInt>, ResElement)> {
    let shift = target - &m.valuation()?;
    let exps = c
        .multiplier_exponents(&shift)?
        .ok_or_else(|| Error::InternalInconsistency(format!("{shift} is not in the base value group")))?;
    let r = &c.laurent_residue(&exps)? * &m.leading_coeff()?;
    Ok((exps, r))
}

fn combination(vectors: &[HahnSeries], coefficients: &[HahnSeries]) -> Result<HahnSeries> {
    let rank = vectors[0].rank();
    let mut acc = HahnSeries::zero(rank);
    for (m, c) in vectors.iter().zip(coefficients) {
        if c.is_exact_zero() {
            continue;
        }
        acc = &acc + &c.mul(m)?;
    }
    Ok(acc)
}

/// Minimum of `v(c_i m_i)` over nonzero coefficients.
fn combination_bound(vectors: &[HahnSeries], coefficients: &[HahnSeries]) -> Result<Option<GammaElement>> {
    let mut best: Option<GammaElement> = None;
    for (m, c) in vectors.iter().zip(coefficients) {
        if c.is_exact_zero() {
            continue;
        }
        let v = &c.valuation()? + &m.valuation()?;
        if best.as_ref().is_none_or(|b| v < *b) {
            best = Some(v);
        }
    }
    Ok(best)
}

/// Decides separatedness over `c` by the leading-term criterion: within each
/// class of valuations modulo `Γ_C`, the leading coefficients normalized by
/// base multipliers must be linearly independent over `k_C`.
pub fn check_separated(vectors: &[HahnSeries], c: &ValuedSubfieldPresentation) -> Result<BasisReport> {
    let mut vals = Vec::with_capacity(vectors.len());
    for v in vectors {
        match v.valuation() {
            Ok(g) => vals.push(g),
            Err(Error::InfiniteValuation) => {
                return Ok(BasisReport {
                    verdict: Verdict::NotIndependent,
                    partition: Vec::new(),
                    valuations: Vec::new(),
                })
            }
            Err(e) => return Err(e),
        }
    }
    let partition = partition_by_class(&vals, c)?;
    let report = |verdict| BasisReport {
        verdict,
        partition: partition.clone(),
        valuations: vals.clone(),
    };
    for (i, a) in vectors.iter().enumerate() {
        if vectors[i + 1..].contains(a) {
            return Ok(report(Verdict::NotIndependent));
        }
    }
    let kc = c.residue_subfield();
    for class in &partition {
        let target = &vals[class[0]];
        let mut exps = Vec::with_capacity(class.len());
        let mut residues = Vec::with_capacity(class.len());
        for &j in class {
            let (e, r) = normalized_residue(c, &vectors[j], target)?;
            exps.push(e);
            residues.push(r);
        }
        let li = linearly_independent_over(&residues, &kc);
        if li.independent {
            continue;
        }
        // Independence of the vectors themselves is decided by the reduction.
        match reduce(&canonical_order(vectors)?, c, c.target(), false) {
            Err(Error::NotIndependent) => return Ok(report(Verdict::NotIndependent)),
            Ok(_) | Err(Error::PrecisionExhausted(_)) => {}
            Err(e) => return Err(e),
        }
        let w = li.witness.expect("dependent residues carry a witness");
        let rank = vectors[0].rank();
        let mut coefficients = vec![HahnSeries::zero(rank); vectors.len()];
        for ((&j, e), wj) in class.iter().zip(&exps).zip(&w) {
            if wj.is_zero() {
                continue;
            }
            coefficients[j] = c.lift_residue(wj)?.mul(&c.laurent_monomial(e)?)?;
        }
        let x = combination(vectors, &coefficients)?;
        let bound = combination_bound(vectors, &coefficients)?.expect("witness is nonzero");
        let (achieved, lower) = match x.valuation() {
            Ok(g) => (g, false),
            Err(Error::InfiniteValuation) => return Ok(report(Verdict::NotIndependent)),
            Err(Error::PrecisionExhausted(_)) => (x.precision().cutoff().expect("truncated").clone(), true),
            Err(e) => return Err(e),
        };
        return Ok(report(Verdict::NotSeparated(SeparationWitness {
            coefficients,
            achieved,
            bound,
            achieved_is_lower_bound: lower,
        })));
    }
    let good = partition
        .iter()
        .all(|class| class.iter().all(|&j| vals[j] == vals[class[0]]));
    Ok(report(if good {
        Verdict::SeparatedGood
    } else {
        Verdict::SeparatedNotGood
    }))
}

/// Output of the constructions: `basis[i] = Σ_j change[i][j] · input[j]`
/// and `input[i] = Σ_j inverse[i][j] · basis[j]`, with entries in the base.
#[derive(Clone, Debug)]
pub struct Construction {
    pub basis: Vec<HahnSeries>,
    pub change: Vec<Vec<HahnSeries>>,
    pub inverse: Vec<Vec<HahnSeries>>,
}

impl Construction {
    /// Both matrices are triangular; invertibility amounts to nonzero
    /// diagonal entries of `inverse` and zero entries above it.
    pub fn is_invertible(&self) -> bool {
        self.inverse
            .iter()
            .enumerate()
            .all(|(i, row)| !row[i].is_exact_zero() && row[i + 1..].iter().all(HahnSeries::is_exact_zero))
    }

    pub fn to_json(&self, u: &Universe) -> serde_json::Value {
        let fmt = |m: &Vec<Vec<HahnSeries>>| -> Vec<Vec<String>> {
            m.iter()
                .map(|row| row.iter().map(|x| u.fmt_series(x)).collect())
                .collect()
        };
        serde_json::json!({
            "basis": self.basis.iter().map(|b| u.fmt_series(b)).collect::<Vec<_>>(),
            "change_matrix": fmt(&self.change),
            "inverse_matrix": fmt(&self.inverse),
        })
    }
}

/// The vectors sorted by term count, ties broken by their monic forms. Greedy
/// reduction terminates more often with short pivots first, and the order
/// makes independence verdicts invariant under permutation and scaling.
fn canonical_order(vectors: &[HahnSeries]) -> Result<Vec<HahnSeries>> {
    let mut keyed = Vec::with_capacity(vectors.len());
    for v in vectors {
        let monic = v.scale(&v.leading_coeff()?.inverse()?);
        keyed.push(((v.num_terms(), format!("{monic:?}")), v.clone()));
    }
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(keyed.into_iter().map(|(_, v)| v).collect())
}

/// Ultrametric Gram–Schmidt. Each input is reduced against the basis built
/// so far by cancelling its leading term with a base combination of basis
/// vectors in the same class, until the leading term is uncancellable.
/// Returns the residuals and `expr` with `input_i = Σ_k expr[i][k] basis_k`.
fn reduce(
    vectors: &[HahnSeries],
    c: &ValuedSubfieldPresentation,
    target: &Precision,
    normalize_sign: bool,
) -> Result<(Vec<HahnSeries>, Vec<Vec<HahnSeries>>)> {
    let group = c.value_group();
    let kc = c.residue_subfield();
    let rank = vectors.first().map_or(c.rank(), HahnSeries::rank);
    let n = vectors.len();
    let mut basis: Vec<HahnSeries> = Vec::with_capacity(n);
    let mut expr: Vec<Vec<HahnSeries>> = Vec::with_capacity(n);
    for input in vectors {
        let mut r = input.clone();
        let mut row = vec![HahnSeries::zero(rank); n];
        let mut steps = 0;
        loop {
            let v = match r.valuation() {
                Ok(v) => v,
                Err(Error::InfiniteValuation) => return Err(Error::NotIndependent),
                Err(Error::PrecisionExhausted(_)) => {
                    return Err(Error::PrecisionExhausted(
                        "cancellation reached the cutoff; the residual is indistinguishable from zero".into(),
                    ))
                }
                Err(e) => return Err(e),
            };
            if let Some(cut) = target.cutoff() {
                if &v >= cut {
                    return Err(Error::PrecisionExhausted(format!(
                        "cancellation reached the target cutoff {cut}"
                    )));
                }
            }
            let mut members = Vec::new();
            let mut residues = Vec::new();
            let mut exps = Vec::new();
            for (k, b) in basis.iter().enumerate() {
                let vb = b.valuation()?;
                if group.contains(&(&v - &vb))? {
                    let (e, res) = normalized_residue(c, b, &v)?;
                    members.push(k);
                    residues.push(res);
                    exps.push(e);
                }
            }
            let lc = r.leading_coeff()?;
            let mut probe = residues.clone();
            probe.push(lc);
            let li = linearly_independent_over(&probe, &kc);
            if li.independent {
                break;
            }
            let w = li.witness.expect("witness");
            let last = w.last().expect("nonempty").clone();
            if last.is_zero() {
                return Err(Error::InternalInconsistency(
                    "basis leading coefficients became dependent".into(),
                ));
            }
            for ((&k, e), wk) in members.iter().zip(&exps).zip(&w) {
                if wk.is_zero() {
                    continue;
                }
                let beta = (-wk).checked_div(&last)?;
                let coef = c.lift_residue(&beta)?.mul(&c.laurent_monomial(e)?)?;
                r = &r - &coef.mul(&basis[k])?;
                row[k] = &row[k] + &coef;
            }
            steps += 1;
            if steps > MAX_CANCELLATIONS {
                return Err(Error::PrecisionExhausted("cancellation does not terminate".into()));
            }
        }
        let i = basis.len();
        let mut scale = HahnSeries::one(rank);
        if normalize_sign && steps > 0 && r.leading_coeff()?.leading_sign() == Ordering::Less {
            r = -&r;
            scale = -&scale;
        }
        row[i] = scale;
        basis.push(r);
        expr.push(row);
    }
    Ok((basis, expr))
}

/// Inverts the lower-triangular `expr` whose diagonal entries are units
/// `±` a base Laurent monomial, given their exact inverses.
fn invert_triangular(expr: &[Vec<HahnSeries>], diag_inv: &[HahnSeries]) -> Result<Vec<Vec<HahnSeries>>> {
    let n = expr.len();
    let rank = diag_inv.first().map_or((0, 0), HahnSeries::rank);
    let mut change: Vec<Vec<HahnSeries>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = vec![HahnSeries::zero(rank); n];
        row[i] = HahnSeries::one(rank);
        for k in 0..i {
            if expr[i][k].is_exact_zero() {
                continue;
            }
            for j in 0..=k {
                if change[k][j].is_exact_zero() {
                    continue;
                }
                row[j] = &row[j] - &expr[i][k].mul(&change[k][j])?;
            }
        }
        for x in row.iter_mut() {
            if !x.is_exact_zero() {
                *x = x.mul(&diag_inv[i])?;
            }
        }
        change.push(row);
    }
    Ok(change)
}

fn finish(basis: Vec<HahnSeries>, expr: Vec<Vec<HahnSeries>>, diag_inv: Vec<HahnSeries>) -> Result<Construction> {
    let change = invert_triangular(&expr, &diag_inv)?;
    Ok(Construction {
        basis,
        change,
        inverse: expr,
    })
}

/// Separated basis over a trivially valued base: each new vector is reduced
/// against the current basis vectors of the same valuation until its
/// valuation is fresh or its leading coefficient is independent.
pub fn make_separated_trivial(vectors: &[HahnSeries], c: &ValuedSubfieldPresentation) -> Result<Construction> {
    if !c.is_trivially_valued() {
        return Err(Error::HypothesisViolation(vec![format!(
            "{} is not trivially valued",
            c.name()
        )]));
    }
    let (basis, expr) = reduce(vectors, c, c.target(), true)?;
    let diag_inv = expr.iter().enumerate().map(|(i, row)| row[i].clone()).collect();
    finish(basis, expr, diag_inv)
}

/// Separated basis over an arbitrary presented base by ultrametric
/// Gram–Schmidt, then made good by rescaling each class member with a base
/// monomial onto the class's first valuation.
pub fn make_separated(
    vectors: &[HahnSeries],
    c: &ValuedSubfieldPresentation,
    target: &Precision,
) -> Result<Construction> {
    let (mut basis, mut expr) = reduce(vectors, c, target, true)?;
    let n = basis.len();
    let vals: Vec<GammaElement> = basis.iter().map(|b| b.valuation()).collect::<Result<_>>()?;
    let partition = partition_by_class(&vals, c)?;
    let mut diag_inv: Vec<HahnSeries> = (0..n).map(|i| expr[i][i].clone()).collect();
    for class in &partition {
        let first = &vals[class[0]];
        for &j in &class[1..] {
            if vals[j] == *first {
                continue;
            }
            let shift = first - &vals[j];
            let e = c
                .multiplier_exponents(&shift)?
                .ok_or_else(|| Error::InternalInconsistency("class multiplier missing".into()))?;
            let neg: Vec<BigInt> = e.iter().map(|x| -x).collect();
            let mu = c.laurent_monomial(&e)?;
            let mu_inv = c.laurent_monomial(&neg)?;
            basis[j] = mu.mul(&basis[j])?;
            for row in expr.iter_mut().skip(j) {
                if !row[j].is_exact_zero() {
                    row[j] = row[j].mul(&mu_inv)?;
                }
            }
            diag_inv[j] = diag_inv[j].mul(&mu)?;
        }
    }
    finish(basis, expr, diag_inv)
}

/// Greedily keeps the inputs that are independent over `c` of those kept
/// before them, and returns their indices with a separated-good basis of
/// their span.
pub fn separated_basis_from(
    vectors: &[HahnSeries],
    c: &ValuedSubfieldPresentation,
    target: &Precision,
) -> Result<(Vec<usize>, Construction)> {
    let mut kept: Vec<usize> = Vec::new();
    let mut best = make_separated(&[], c, target)?;
    for i in 0..vectors.len() {
        let mut trial: Vec<HahnSeries> = kept.iter().map(|&k| vectors[k].clone()).collect();
        trial.push(vectors[i].clone());
        match make_separated(&trial, c, target) {
            Ok(out) => {
                kept.push(i);
                best = out;
            }
            Err(Error::NotIndependent) => {}
            Err(e) => return Err(e),
        }
    }
    Ok((kept, best))
}

/// Runs [`check_separated`] over `m` for a basis that is separated-good over
/// `c`, after confirming the hypotheses under which separatedness lifts.
pub fn check_lift(
    basis: &[HahnSeries],
    l: &ValuedSubfieldPresentation,
    m: &ValuedSubfieldPresentation,
    c: &ValuedSubfieldPresentation,
) -> Result<BasisReport> {
    let hyp = check_hypotheses(l, m, c);
    let mut failed = Vec::new();
    for name in [HYP_COMMON_BASE, HYP_VALUE_GROUPS, HYP_DISJOINT] {
        if !hyp.passes(name) {
            failed.push(
                hyp.get(name)
                    .map_or(name.to_string(), |e| format!("{}: {}", e.name, e.detail)),
            );
        }
    }
    if !failed.is_empty() {
        return Err(Error::HypothesisViolation(failed));
    }
    let over_c = check_separated(basis, c)?;
    if over_c.verdict != Verdict::SeparatedGood {
        return Err(Error::HypothesisViolation(vec![format!(
            "basis is {} over {}",
            over_c.verdict.label(),
            c.name()
        )]));
    }
    check_separated(basis, m)
}

/// One failed compositum assertion.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CompositumMismatch {
    pub combination: Vec<String>,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CompositumReport {
    pub checked: usize,
    pub residue_checks: usize,
    pub mismatches: Vec<CompositumMismatch>,
}

/// Indices attaining `min v(ℓ_i m_i)` over nonzero `m_i`, with the minimum.
fn min_attaining(ell: &[HahnSeries], m: &[HahnSeries]) -> Result<Option<(GammaElement, Vec<usize>)>> {
    let mut best: Option<(GammaElement, Vec<usize>)> = None;
    for (i, (l, x)) in ell.iter().zip(m).enumerate() {
        if x.is_exact_zero() {
            continue;
        }
        let v = &l.valuation()? + &x.valuation()?;
        match &mut best {
            Some((b, idx)) if *b == v => idx.push(i),
            Some((b, _)) if *b < v => {}
            _ => best = Some((v, vec![i])),
        }
    }
    Ok(best)
}

/// Checks `v(Σ ℓ_i m_i) = min v(ℓ_i m_i)` and, at valuation 0, the residue
/// decomposition over the minimum-attaining set, against direct evaluation.
/// Adds to `report`.
pub fn compositum_check(
    ell: &[HahnSeries],
    m: &[HahnSeries],
    u: &Universe,
    report: &mut CompositumReport,
) -> Result<()> {
    let Some((min, set)) = min_attaining(ell, m)? else {
        return Ok(());
    };
    let x = combination(ell, m)?;
    report.checked += 1;
    let describe = || m.iter().map(|s| u.fmt_series(s)).collect::<Vec<_>>();
    let v = match x.valuation() {
        Ok(v) => v,
        Err(Error::InfiniteValuation) => {
            report.mismatches.push(CompositumMismatch {
                combination: describe(),
                detail: "combination vanishes".into(),
            });
            return Ok(());
        }
        Err(e) => return Err(e),
    };
    if v != min {
        report.mismatches.push(CompositumMismatch {
            combination: describe(),
            detail: format!("v(x) = {v} but min v(l_i m_i) = {min}"),
        });
        return Ok(());
    }
    if v.is_zero() {
        report.residue_checks += 1;
        let mut sum = ResElement::zero();
        for &i in &set {
            sum = &sum + &(&ell[i].leading_coeff()? * &m[i].leading_coeff()?);
        }
        let direct = x.residue()?;
        if sum != direct {
            report.mismatches.push(CompositumMismatch {
                combination: describe(),
                detail: format!("res(x) = {direct} but the decomposition gives {sum}"),
            });
        }
    }
    Ok(())
}

/// Calls `f` on every coefficient tuple whose entries are `None` or indices
/// into `monos`, such that the summed cost `deg ℓ_i + deg m_i` over chosen
/// entries is at most `d`.
pub fn for_each_combination(
    ell_degrees: &[u32],
    monos: &[(Vec<u32>, HahnSeries)],
    d: u32,
    f: &mut dyn FnMut(&[Option<usize>]) -> Result<()>,
) -> Result<()> {
    let mut choice = vec![None; ell_degrees.len()];
    sweep_rec(ell_degrees, monos, d, 0, 0, &mut choice, f)
}

fn sweep_rec(
    ell_degrees: &[u32],
    monos: &[(Vec<u32>, HahnSeries)],
    d: u32,
    pos: usize,
    used: u32,
    choice: &mut Vec<Option<usize>>,
    f: &mut dyn FnMut(&[Option<usize>]) -> Result<()>,
) -> Result<()> {
    if pos == ell_degrees.len() {
        return f(choice);
    }
    choice[pos] = None;
    sweep_rec(ell_degrees, monos, d, pos + 1, used, choice, f)?;
    for (k, (e, _)) in monos.iter().enumerate() {
        let cost = ell_degrees[pos] + e.iter().sum::<u32>();
        if used + cost > d {
            continue;
        }
        choice[pos] = Some(k);
        sweep_rec(ell_degrees, monos, d, pos + 1, used + cost, choice, f)?;
    }
    choice[pos] = None;
    Ok(())
}

/// Materializes a choice from [`for_each_combination`].
pub fn chosen_coefficients(
    choice: &[Option<usize>],
    monos: &[(Vec<u32>, HahnSeries)],
    rank: (usize, usize),
) -> Vec<HahnSeries> {
    choice
        .iter()
        .map(|c| c.map_or_else(|| HahnSeries::zero(rank), |k| monos[k].1.clone()))
        .collect()
}

/// Runs [`compositum_check`] on every combination of the separated vectors
/// `ell` (of degrees `ell_degrees`) with monomials of `m_field`, total
/// degree at most `d`.
pub fn compositum_sweep(
    ell: &[HahnSeries],
    ell_degrees: &[u32],
    m_field: &ValuedSubfieldPresentation,
    d: u32,
    u: &Universe,
) -> Result<CompositumReport> {
    let monos = m_field.monomials(d)?;
    let mut report = CompositumReport::default();
    let rank = m_field.rank();
    for_each_combination(ell_degrees, &monos, d, &mut |ch| {
        compositum_check(ell, &chosen_coefficients(ch, &monos, rank), u, &mut report)
    })?;
    Ok(report)
}

/// `rv(Σ ℓ_i m_i)` from the minimum-attaining set: `Σ_{i∈I} rv(m_i) rv(ℓ_i)`,
/// checked against direct evaluation.
pub fn rv_of_combination(ell: &[HahnSeries], m: &[HahnSeries]) -> Result<RvElement> {
    let (min, set) = min_attaining(ell, m)?.ok_or(Error::InfiniteValuation)?;
    let mut coeff = ResElement::zero();
    for &i in &set {
        coeff = &coeff + &(&ell[i].leading_coeff()? * &m[i].leading_coeff()?);
    }
    if coeff.is_zero() {
        return Err(Error::InternalInconsistency(
            "leading terms of a separated combination cancel".into(),
        ));
    }
    let formula = RvElement::new(min, coeff);
    let direct = combination(ell, m)?.rv()?;
    if direct != formula {
        return Err(Error::InternalInconsistency(format!(
            "rv formula gives {formula}, direct evaluation {direct}"
        )));
    }
    Ok(formula)
}

/// Outcome of the randomized soundness check of a separated verdict.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SamplingReport {
    pub samples: usize,
    pub violations: usize,
    pub first_violation: Option<String>,
}

/// Draws `samples` coefficient tuples from `c` and counts combinations with
/// `v(Σ c_i m_i) > min v(c_i m_i)`. Half of the tuples are aligned: their
/// members are scaled onto one common valuation so that leading terms
/// meet.
pub fn sample_separatedness(
    vectors: &[HahnSeries],
    c: &ValuedSubfieldPresentation,
    samples: usize,
    seed: u64,
) -> Result<SamplingReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rank = vectors[0].rank();
    let vals: Vec<GammaElement> = vectors.iter().map(|v| v.valuation()).collect::<Result<_>>()?;
    let partition = partition_by_class(&vals, c)?;
    let kc_vars: Vec<usize> = c.residue_subfield().vars().iter().copied().collect();
    let mut report = SamplingReport::default();
    for s in 0..samples {
        let mut coeffs = vec![HahnSeries::zero(rank); vectors.len()];
        if s % 2 == 0 {
            let class = &partition[rng.gen_range(0..partition.len())];
            let target = &vals[class[0]];
            for &j in class {
                if rng.gen_bool(0.2) {
                    continue;
                }
                let shift = target - &vals[j];
                let e = c.multiplier_exponents(&shift)?.expect("class multiplier");
                let mut r = ResElement::from_rational(small_rational(&mut rng));
                if !kc_vars.is_empty() && rng.gen_bool(0.5) {
                    let v = kc_vars[rng.gen_range(0..kc_vars.len())];
                    r = &r * &ResElement::var(v);
                }
                coeffs[j] = c.lift_residue(&r)?.mul(&c.laurent_monomial(&e)?)?;
            }
        } else {
            for x in coeffs.iter_mut() {
                if rng.gen_bool(0.2) {
                    continue;
                }
                *x = if c.all_generators().is_empty() {
                    HahnSeries::constant(rank, ResElement::from_rational(small_rational(&mut rng)))
                } else {
                    c.sample_laurent(&mut rng, 2)?
                };
            }
        }
        let Some(bound) = combination_bound(vectors, &coeffs)? else {
            continue;
        };
        report.samples += 1;
        let x = combination(vectors, &coeffs)?;
        let violated = match x.valuation() {
            Ok(v) => v > bound,
            Err(Error::InfiniteValuation) => true,
            Err(Error::PrecisionExhausted(_)) => x.precision().cutoff().is_some_and(|cut| cut > &bound),
            Err(e) => return Err(e),
        };
        if violated {
            report.violations += 1;
            if report.first_violation.is_none() {
                report.first_violation = Some(format!(
                    "coefficients [{}]",
                    coeffs.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ")
                ));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ordered_groups::int;
    use std::sync::Arc;

    fn series(u: &Universe, es: &[&str]) -> Vec<HahnSeries> {
        es.iter().map(|e| u.parse_series(e).unwrap()).collect()
    }

    fn prime(u: &Universe) -> Arc<ValuedSubfieldPresentation> {
        ValuedSubfieldPresentation::prime("Q", u.rank(), u.precision())
    }

    fn laurent(u: &Universe, gens: &[&str]) -> Arc<ValuedSubfieldPresentation> {
        ValuedSubfieldPresentation::new("C", None, series(u, gens), 3, u.precision()).unwrap()
    }

    fn assert_spans(c: &Construction, input: &[HahnSeries]) {
        for (i, b) in c.basis.iter().enumerate() {
            assert_eq!(&combination(input, &c.change[i]).unwrap(), b, "row {i}");
        }
        for (i, x) in input.iter().enumerate() {
            assert_eq!(&combination(&c.basis, &c.inverse[i]).unwrap(), x, "row {i}");
        }
        assert!(c.is_invertible());
    }

    #[test]
    fn check_examples() {
        let u = Universe::new(&["t"], &[]);
        let q = prime(&u);
        let r = check_separated(&series(&u, &["1", "t"]), &q).unwrap();
        assert_eq!(r.verdict, Verdict::SeparatedGood);
        let r = check_separated(&series(&u, &["1+t", "1-t"]), &q).unwrap();
        match r.verdict {
            Verdict::NotSeparated(w) => {
                assert_eq!(w.coefficients, series(&u, &["1", "-1"]));
                assert_eq!(w.achieved, GammaElement::from_ints(&[1], &[]));
                assert_eq!(w.bound, GammaElement::from_ints(&[0], &[]));
            }
            v => panic!("{v:?}"),
        }
        let c = laurent(&u, &["t"]);
        let r = check_separated(&series(&u, &["1", "t^(1/2)"]), &c).unwrap();
        assert_eq!(r.verdict, Verdict::SeparatedGood);
        assert_eq!(r.partition, vec![vec![0], vec![1]]);
    }

    /// Brute force over rational pairs with numerator and denominator at most
    /// 3: the pair (1, -1) and its multiples are the only violations.
    #[test]
    fn brute_force_pairs() {
        let u = Universe::new(&["t"], &[]);
        let v = series(&u, &["1+t", "1-t"]);
        let mut found = Vec::new();
        for a in -3i64..=3 {
            for b in -3i64..=3 {
                for da in 1..=3 {
                    for db in 1..=3 {
                        if a == 0 || b == 0 {
                            continue;
                        }
                        let ca =
                            HahnSeries::constant((1, 0), ResElement::from_rational(crate::ordered_groups::rat(a, da)));
                        let cb =
                            HahnSeries::constant((1, 0), ResElement::from_rational(crate::ordered_groups::rat(b, db)));
                        let x = combination(&v, &[ca, cb]).unwrap();
                        if x.valuation().unwrap() > GammaElement::from_ints(&[0], &[]) {
                            found.push(crate::ordered_groups::rat(a * db, da * b));
                        }
                    }
                }
            }
        }
        assert!(!found.is_empty());
        assert!(found.iter().all(|q| *q == int(-1)));
    }

    #[test]
    fn degenerate_inputs() {
        let u = Universe::new(&["t"], &[]);
        let q = prime(&u);
        assert_eq!(
            check_separated(&series(&u, &["1", "0"]), &q).unwrap().verdict,
            Verdict::NotIndependent
        );
        assert_eq!(
            check_separated(&series(&u, &["t", "t"]), &q).unwrap().verdict,
            Verdict::NotIndependent
        );
        assert_eq!(
            check_separated(&series(&u, &["1+t", "1-t", "1"]), &q).unwrap().verdict,
            Verdict::NotIndependent
        );
    }

    #[test]
    fn not_good_over_laurent_base() {
        let u = Universe::new(&["t"], &[]);
        let c = laurent(&u, &["t"]);
        let r = check_separated(&series(&u, &["1", "t^(1/2)", "t^(3/2)"]), &c).unwrap();
        assert_eq!(r.verdict, Verdict::NotIndependent);
        let r = check_separated(&series(&u, &["1", "t^(1/2)", "t^(3/2) + t^(5/3)"]), &c).unwrap();
        assert!(matches!(r.verdict, Verdict::NotSeparated(_)));
        let r = check_separated(&series(&u, &["1", "t^(3/2)"]), &c).unwrap();
        assert_eq!(r.verdict, Verdict::SeparatedGood);
        let r = check_separated(&series(&u, &["1 + t^(1/3)", "t"]), &c).unwrap();
        assert!(matches!(r.verdict, Verdict::NotSeparated(_)));
        let u2 = Universe::new(&["t"], &["x1"]);
        let c = laurent(&u2, &["t"]);
        let r = check_separated(&series(&u2, &["1", "x1*t"]), &c).unwrap();
        assert_eq!(r.verdict, Verdict::SeparatedNotGood);
    }

    #[test]
    fn residue_subfield_coefficients() {
        // Over Q(x1), x1 and 1 are dependent residues; over Q they are not.
        let u = Universe::new(&["t"], &["x1", "x2"]);
        let c = laurent(&u, &["x1"]);
        let r = check_separated(&series(&u, &["1 + t", "x1"]), &c).unwrap();
        match r.verdict {
            Verdict::NotSeparated(w) => assert!(w.achieved > w.bound),
            v => panic!("{v:?}"),
        }
        let r = check_separated(&series(&u, &["1 + t", "x2"]), &c).unwrap();
        assert_eq!(r.verdict, Verdict::SeparatedGood);
    }

    #[test]
    fn trivial_construction_examples() {
        let u = Universe::new(&["t"], &[]);
        let q = prime(&u);
        let input = series(&u, &["t"]);
        let c = make_separated_trivial(&input, &q).unwrap();
        assert_eq!(c.basis, input);
        assert_eq!(c.change, vec![series(&u, &["1"])]);

        let input = series(&u, &["1+t", "1-t"]);
        let c = make_separated_trivial(&input, &q).unwrap();
        assert_eq!(c.basis, series(&u, &["1+t", "2*t"]));
        assert_eq!(check_separated(&c.basis, &q).unwrap().verdict, Verdict::SeparatedGood);
        assert_spans(&c, &input);

        let input = series(&u, &["1", "1+t", "1+t+t^2"]);
        let c = make_separated_trivial(&input, &q).unwrap();
        assert_eq!(c.basis, series(&u, &["1", "t", "t^2"]));
        assert_spans(&c, &input);
    }

    #[test]
    fn trivial_construction_requires_trivial_base() {
        let u = Universe::new(&["t"], &[]);
        let c = laurent(&u, &["t"]);
        assert!(matches!(
            make_separated_trivial(&series(&u, &["1"]), &c),
            Err(Error::HypothesisViolation(_))
        ));
    }

    #[test]
    fn general_construction_examples() {
        let u = Universe::new(&["t1", "t2"], &[]);
        let c = laurent(&u, &["t1"]);
        let input = series(&u, &["1", "1+t2"]);
        let out = make_separated(&input, &c, &u.precision()).unwrap();
        assert_eq!(out.basis, series(&u, &["1", "t2"]));
        assert_eq!(check_separated(&out.basis, &c).unwrap().verdict, Verdict::SeparatedGood);
        assert_spans(&out, &input);

        let input = series(&u, &["1", "t2"]);
        let out = make_separated(&input, &c, &u.precision()).unwrap();
        assert_eq!(out.basis, input);
        assert_eq!(out.change, vec![series(&u, &["1", "0"]), series(&u, &["0", "1"])]);

        let v = Universe::new(&["t"], &[]);
        let c = laurent(&v, &["t"]);
        let input = series(&v, &["1", "1 + O(t^12)"]);
        assert!(matches!(
            make_separated(&input, &c, &v.precision()),
            Err(Error::PrecisionExhausted(_))
        ));
    }

    #[test]
    fn goodification_rescales_class_members() {
        let u = Universe::new(&["t"], &["x1"]);
        let c = laurent(&u, &["t"]);
        let input = series(&u, &["1 + t^(1/2)", "x1*t^3 + t^4"]);
        let out = make_separated(&input, &c, &u.precision()).unwrap();
        assert_eq!(check_separated(&out.basis, &c).unwrap().verdict, Verdict::SeparatedGood);
        assert_eq!(out.basis[1], u.parse_series("x1 + t").unwrap());
        assert_spans(&out, &input);
    }

    #[test]
    fn lift_examples() {
        let u = Universe::new(&["t1", "t2"], &["x1", "x2"]);
        let q = prime(&u);
        let l =
            ValuedSubfieldPresentation::new("L", Some(q.clone()), series(&u, &["x1", "t1"]), 3, u.precision()).unwrap();
        let m =
            ValuedSubfieldPresentation::new("M", Some(q.clone()), series(&u, &["x2", "t2"]), 3, u.precision()).unwrap();
        let basis = series(&u, &["1", "x1", "t1"]);
        let r = check_lift(&basis, &l, &m, &q).unwrap();
        assert_eq!(r.verdict, Verdict::SeparatedGood);
        let s = sample_separatedness(&basis, &m, 1000, 7).unwrap();
        assert_eq!(s.violations, 0);

        let bad = ValuedSubfieldPresentation::new("M", Some(q.clone()), series(&u, &["x1"]), 3, u.precision()).unwrap();
        assert!(matches!(
            check_lift(&basis, &l, &bad, &q),
            Err(Error::HypothesisViolation(_))
        ));

        let r = check_lift(&basis, &l, &q, &q).unwrap();
        assert_eq!(r.verdict, Verdict::SeparatedGood);
    }

    #[test]
    fn compositum_examples() {
        let u = Universe::new(&["t1", "t2"], &["x1", "x2"]);
        let ell = series(&u, &["1", "t1"]);
        let mut rep = CompositumReport::default();
        compositum_check(&ell, &series(&u, &["t2", "1"]), &u, &mut rep).unwrap();
        assert!(rep.mismatches.is_empty());
        let x = combination(&ell, &series(&u, &["t2", "1"])).unwrap();
        assert_eq!(x.valuation().unwrap(), GammaElement::from_ints(&[0, 1], &[]));

        let ell = series(&u, &["1", "x1"]);
        let mut rep = CompositumReport::default();
        compositum_check(&ell, &series(&u, &["1", "x2"]), &u, &mut rep).unwrap();
        assert!(rep.mismatches.is_empty());
        assert_eq!(rep.residue_checks, 1);
        let x = combination(&ell, &series(&u, &["1", "x2"])).unwrap();
        assert_eq!(x.residue().unwrap(), u.parse_res("1 + x1*x2").unwrap());

        // A non-separated pair produces a mismatch.
        let ell = series(&u, &["1", "1 + t1"]);
        let mut rep = CompositumReport::default();
        compositum_check(&ell, &series(&u, &["1", "-1"]), &u, &mut rep).unwrap();
        assert_eq!(rep.mismatches.len(), 1);
    }

    #[test]
    fn rv_formula() {
        let u = Universe::new(&["t1", "t2"], &["x1", "x2"]);
        let r = rv_of_combination(&series(&u, &["t2", "t1"]), &series(&u, &["1", "1"])).unwrap();
        assert_eq!(r, u.parse_series("t2").unwrap().rv().unwrap());
        let r = rv_of_combination(&series(&u, &["x1*t1", "x2*t1"]), &series(&u, &["1", "1"])).unwrap();
        assert_eq!(r.coeff(), &u.parse_res("x1 + x2").unwrap());
        assert!(matches!(
            rv_of_combination(&series(&u, &["t1", "t1 + t1^2"]), &series(&u, &["1", "-1"])),
            Err(Error::InternalInconsistency(_))
        ));
    }
}
