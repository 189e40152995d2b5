//! Finitely presented valued subfields of a universe and the checkers for the
//! standing hypotheses on a triple `C ⊆ L, M`.
//!
//! A presentation is a list of generators over a base presentation (or over
//! the trivially valued prime field) together with a degree bound. Every
//! global statement about the presented field is certified only on its
//! degree-bounded shadow.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, OnceLock};

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hahn_series::{HahnSeries, Precision};
use crate::ordered_groups::lattice;
use crate::ordered_groups::{torsion_free_quotient, GammaElement, GammaSubgroup, Rational};
use crate::residue_algebra::{algebraically_independent_over, linearly_independent_over, ResElement, ResSubfield};

/// Residue-field data of a presentation: the variables it involves, lifts of
/// those variables that are residues of explicit field elements, and whether
/// the field is exactly generated by such variables.
#[derive(Clone, Debug)]
pub struct ResidueData {
    pub subfield: ResSubfield,
    pub lifts: BTreeMap<usize, HahnSeries>,
    pub variable_generated: bool,
}

#[derive(Debug)]
pub struct ValuedSubfieldPresentation {
    name: String,
    base: Option<Arc<ValuedSubfieldPresentation>>,
    generators: Vec<HahnSeries>,
    degree_bound: u32,
    rank: (usize, usize),
    target: Precision,
    residue: OnceLock<Result<ResidueData>>,
}

impl ValuedSubfieldPresentation {
    /// The trivially valued prime field `Q`.
    pub fn prime(name: &str, rank: (usize, usize), target: Precision) -> Arc<Self> {
        Arc::new(ValuedSubfieldPresentation {
            name: name.to_string(),
            base: None,
            generators: Vec::new(),
            degree_bound: 1,
            rank,
            target,
            residue: OnceLock::new(),
        })
    }

    pub fn new(
        name: &str,
        base: Option<Arc<ValuedSubfieldPresentation>>,
        generators: Vec<HahnSeries>,
        degree_bound: u32,
        target: Precision,
    ) -> Result<Arc<Self>> {
        if degree_bound == 0 {
            return Err(Error::Invalid(format!("{name}: degree bound must be positive")));
        }
        let rank = match (&base, generators.first()) {
            (Some(b), _) => b.rank,
            (None, Some(g)) => g.rank(),
            (None, None) => match &target {
                Precision::Cutoff(c) => c.rank(),
                Precision::Exact => return Err(Error::Invalid(format!("{name}: rank cannot be inferred"))),
            },
        };
        for (i, g) in generators.iter().enumerate() {
            if g.rank() != rank {
                let got = g.rank();
                return Err(Error::RankMismatch {
                    expected_main: rank.0,
                    expected_inf: rank.1,
                    got_main: got.0,
                    got_inf: got.1,
                });
            }
            if !g.is_determinable() {
                return Err(Error::Invalid(format!(
                    "{name}: generator {i} has no determinable leading term"
                )));
            }
        }
        Ok(Arc::new(ValuedSubfieldPresentation {
            name: name.to_string(),
            base,
            generators,
            degree_bound,
            rank,
            target,
            residue: OnceLock::new(),
        }))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn base(&self) -> Option<&Arc<ValuedSubfieldPresentation>> {
        self.base.as_ref()
    }

    /// Generators over the base.
    pub fn generators(&self) -> &[HahnSeries] {
        &self.generators
    }

    pub fn degree_bound(&self) -> u32 {
        self.degree_bound
    }

    pub fn rank(&self) -> (usize, usize) {
        self.rank
    }

    pub fn target(&self) -> &Precision {
        &self.target
    }

    /// Generators of the whole chain over `Q`, deepest base first.
    pub fn all_generators(&self) -> Vec<HahnSeries> {
        let mut out = self.base.as_ref().map_or_else(Vec::new, |b| b.all_generators());
        out.extend(self.generators.iter().cloned());
        out
    }

    /// Number of generators contributed by the base chain.
    pub fn base_generator_count(&self) -> usize {
        self.base.as_ref().map_or(0, |b| b.all_generators().len())
    }

    /// Whether `other` is this presentation or one of its bases.
    pub fn extends(&self, other: &ValuedSubfieldPresentation) -> bool {
        if std::ptr::eq(self, other) {
            return true;
        }
        self.base.as_ref().is_some_and(|b| b.extends(other))
    }

    /// Valuations of the chain generators.
    pub fn generator_valuations(&self) -> Vec<GammaElement> {
        self.all_generators()
            .iter()
            .map(|g| g.valuation().expect("generators are determinable"))
            .collect()
    }

    /// The value-group shadow with the chain generators' valuations as its
    /// generators, so lattice coordinates translate into Laurent monomials.
    pub fn value_group(&self) -> GammaSubgroup {
        GammaSubgroup::new(self.rank, self.generator_valuations()).expect("ranks agree")
    }

    /// Whether the restricted valuation is trivial: every generator has
    /// valuation 0 and their residues are algebraically independent.
    pub fn is_trivially_valued(&self) -> bool {
        let gens = self.all_generators();
        if gens.iter().any(|g| !g.valuation().expect("determinable").is_zero()) {
            return false;
        }
        let res: Vec<ResElement> = gens.iter().map(|g| g.leading_coeff().expect("determinable")).collect();
        algebraically_independent_over(&res, &ResSubfield::prime())
    }

    /// Laurent monomial in the chain generators.
    pub fn laurent_monomial(&self, exps: &[BigInt]) -> Result<HahnSeries> {
        let gens = self.all_generators();
        let mut acc = HahnSeries::one(self.rank);
        for (g, e) in gens.iter().zip(exps) {
            if e.is_zero() {
                continue;
            }
            let k = e
                .to_i64()
                .ok_or_else(|| Error::Unsupported("exponent out of range".into()))?;
            acc = acc.mul(&g.pow(k, &self.target)?)?;
        }
        Ok(acc)
    }

    /// Leading coefficient of the Laurent monomial with exponents `exps`,
    /// computed without expanding the series.
    pub fn laurent_residue(&self, exps: &[BigInt]) -> Result<ResElement> {
        let gens = self.all_generators();
        let mut acc = ResElement::one();
        for (g, e) in gens.iter().zip(exps) {
            if e.is_zero() {
                continue;
            }
            let k = e
                .to_i64()
                .ok_or_else(|| Error::Unsupported("exponent out of range".into()))?;
            acc = &acc * &g.leading_coeff()?.pow(k)?;
        }
        Ok(acc)
    }

    /// Exponents of a Laurent monomial in the chain generators with valuation
    /// `gamma`, if `gamma` lies in the value-group shadow.
    pub fn multiplier_exponents(&self, gamma: &GammaElement) -> Result<Option<Vec<BigInt>>> {
        self.value_group().express(gamma)
    }

    /// An element of the field with valuation `gamma`.
    pub fn multiplier(&self, gamma: &GammaElement) -> Result<Option<HahnSeries>> {
        match self.multiplier_exponents(gamma)? {
            Some(e) => Ok(Some(self.laurent_monomial(&e)?)),
            None => Ok(None),
        }
    }

    /// Residue field data, computed once: residues of the valuation-zero
    /// Laurent monomials in the chain generators.
    pub fn residue_data(&self) -> Result<&ResidueData> {
        self.residue
            .get_or_init(|| self.compute_residue_data())
            .as_ref()
            .map_err(Clone::clone)
    }

    pub fn residue_subfield(&self) -> ResSubfield {
        self.residue_data().map(|d| d.subfield.clone()).unwrap_or_default()
    }

    fn compute_residue_data(&self) -> Result<ResidueData> {
        let vals = self.generator_valuations();
        let ngen = vals.len();
        let mut subfield_vars = BTreeSet::new();
        let mut lifts = BTreeMap::new();
        let mut variable_generated = true;
        if ngen == 0 {
            return Ok(ResidueData {
                subfield: ResSubfield::prime(),
                lifts,
                variable_generated,
            });
        }
        let width = self.rank.0 + self.rank.1;
        let rows: Vec<Vec<Rational>> = vals.iter().map(|g| g.coords()).collect();
        let d = lattice::common_denominator(rows.iter().map(|v| v.as_slice()));
        let int_rows: Vec<Vec<BigInt>> = rows.iter().map(|v| lattice::scale_to_integers(v, &d)).collect();
        let kernel = lattice::hermite(&int_rows, width).left_kernel();
        // Residues of kernel monomials; those that are constants times
        // Laurent monomials in the variables are combined by a second normal
        // form to isolate single variables.
        let mut monomial_rows: Vec<(Vec<BigInt>, BTreeMap<usize, i64>)> = Vec::new();
        for k in &kernel {
            let r = self.laurent_residue(k)?;
            subfield_vars.extend(r.vars());
            match laurent_exponents(&r) {
                Some(exps) => monomial_rows.push((k.clone(), exps)),
                None => variable_generated = false,
            }
        }
        let vars: Vec<usize> = monomial_rows
            .iter()
            .flat_map(|(_, e)| e.keys().copied())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if !vars.is_empty() {
            let mat: Vec<Vec<BigInt>> = monomial_rows
                .iter()
                .map(|(_, e)| vars.iter().map(|v| BigInt::from(*e.get(v).unwrap_or(&0))).collect())
                .collect();
            let h = lattice::hermite(&mat, vars.len());
            for (row, &p) in h.pivots.iter().enumerate() {
                let is_unit =
                    h.form[row][p].is_one() && h.form[row].iter().enumerate().all(|(j, x)| j == p || x.is_zero());
                if !is_unit {
                    variable_generated = false;
                    continue;
                }
                let mut exps = vec![BigInt::zero(); ngen];
                for (coef, (k, _)) in h.transform[row].iter().zip(&monomial_rows) {
                    for (acc, x) in exps.iter_mut().zip(k) {
                        *acc += coef * x;
                    }
                }
                let series = self.laurent_monomial(&exps)?;
                let lc = series.leading_coeff()?;
                let scale = lc.checked_div(&ResElement::var(vars[p]))?;
                let Some(q) = scale.as_rational() else {
                    variable_generated = false;
                    continue;
                };
                let lift = series.scale(&ResElement::from_rational(q.recip()));
                lifts.insert(vars[p], lift);
            }
        }
        if lifts.len() != subfield_vars.len() {
            variable_generated = false;
        }
        Ok(ResidueData {
            subfield: ResSubfield::new(subfield_vars),
            lifts,
            variable_generated,
        })
    }

    /// An element of the field whose residue is `r`, built from the variable
    /// lifts.
    pub fn lift_residue(&self, r: &ResElement) -> Result<HahnSeries> {
        if let Some(q) = r.as_rational() {
            return Ok(HahnSeries::constant(self.rank, ResElement::from_rational(q)));
        }
        let data = self.residue_data()?;
        let eval = |p: &crate::residue_algebra::Poly| -> Result<HahnSeries> {
            let mut acc = HahnSeries::zero(self.rank);
            for (m, c) in p.terms() {
                let mut term = HahnSeries::constant(self.rank, ResElement::from_rational(c.clone()));
                for (v, &e) in m.exps().iter().enumerate() {
                    if e == 0 {
                        continue;
                    }
                    let lift = data.lifts.get(&v).ok_or_else(|| {
                        Error::Unsupported(format!("residue variable x{} has no lift in {}", v + 1, self.name))
                    })?;
                    term = term.mul(&lift.pow(e as i64, &self.target)?)?;
                }
                acc = &acc + &term;
            }
            Ok(acc)
        };
        let num = eval(r.num())?;
        if r.den().is_one() {
            return Ok(num);
        }
        num.div(&eval(r.den())?, &self.target)
    }

    /// Exponent vectors of total degree `<= d` in `n` generators: graded,
    /// and lexicographically descending within each degree.
    pub fn exponent_vectors(n: usize, d: u32) -> Vec<Vec<u32>> {
        let mut out = Vec::new();
        for k in 0..=d {
            let mut cur = vec![0u32; n];
            fill_degree(&mut out, &mut cur, 0, k);
        }
        out
    }

    /// Monomials of degree `<= d` in the chain generators.
    pub fn monomials(&self, d: u32) -> Result<Vec<(Vec<u32>, HahnSeries)>> {
        monomial_table(&self.all_generators(), d, self.rank)
    }

    /// Monomials of degree `<= d` in the generators over the base.
    pub fn own_monomials(&self, d: u32) -> Result<Vec<(Vec<u32>, HahnSeries)>> {
        monomial_table(&self.generators, d, self.rank)
    }

    /// A seeded random element: a small rational combination of monomials of
    /// degree `<= d`.
    pub fn sample_element<R: Rng>(&self, rng: &mut R, d: u32) -> Result<HahnSeries> {
        let monos = self.monomials(d)?;
        let mut acc = HahnSeries::zero(self.rank);
        let k = rng.gen_range(1..=3.min(monos.len()));
        for _ in 0..k {
            let (_, m) = &monos[rng.gen_range(0..monos.len())];
            let q = small_rational(rng);
            acc = &acc + &m.scale(&ResElement::from_rational(q));
        }
        if acc.is_exact_zero() {
            acc = HahnSeries::one(self.rank);
        }
        Ok(acc)
    }

    /// A seeded random element of the field allowing Laurent monomials with
    /// exponents in `-span..=span`.
    pub fn sample_laurent<R: Rng>(&self, rng: &mut R, span: i64) -> Result<HahnSeries> {
        let n = self.all_generators().len();
        let mut acc = HahnSeries::zero(self.rank);
        for _ in 0..rng.gen_range(1..=2) {
            let exps: Vec<BigInt> = (0..n).map(|_| BigInt::from(rng.gen_range(-span..=span))).collect();
            let m = self.laurent_monomial(&exps)?;
            acc = &acc + &m.scale(&ResElement::from_rational(small_rational(rng)));
        }
        if acc.is_exact_zero() {
            acc = HahnSeries::one(self.rank);
        }
        Ok(acc)
    }
}

/// Products of `gens` over all exponent vectors of total degree `<= d`, in
/// the order of [`ValuedSubfieldPresentation::exponent_vectors`].
pub fn monomial_table(gens: &[HahnSeries], d: u32, rank: (usize, usize)) -> Result<Vec<(Vec<u32>, HahnSeries)>> {
    let exps = ValuedSubfieldPresentation::exponent_vectors(gens.len(), d);
    let mut cache: HashMap<Vec<u32>, HahnSeries> = HashMap::new();
    let mut out = Vec::with_capacity(exps.len());
    for e in exps {
        let value = match e.iter().rposition(|&x| x > 0) {
            None => HahnSeries::one(rank),
            Some(i) => {
                let mut prev = e.clone();
                prev[i] -= 1;
                cache[&prev].mul(&gens[i])?
            }
        };
        cache.insert(e.clone(), value.clone());
        out.push((e, value));
    }
    Ok(out)
}

fn fill_degree(out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>, pos: usize, left: u32) {
    if pos + 1 >= cur.len() {
        if cur.is_empty() {
            if left == 0 {
                out.push(Vec::new());
            }
            return;
        }
        cur[pos] = left;
        out.push(cur.clone());
        cur[pos] = 0;
        return;
    }
    for k in (0..=left).rev() {
        cur[pos] = k;
        fill_degree(out, cur, pos + 1, left - k);
    }
    cur[pos] = 0;
}

/// Nonzero rational with numerator in `-3..=3` and denominator in `1..=3`.
pub fn small_rational<R: Rng>(rng: &mut R) -> Rational {
    let mut n = 0;
    while n == 0 {
        n = rng.gen_range(-3i64..=3);
    }
    Rational::new(n.into(), rng.gen_range(1i64..=3).into())
}

/// Exponents of `r` as `q · Π x_v^{e_v}`, if it has that shape.
fn laurent_exponents(r: &ResElement) -> Option<BTreeMap<usize, i64>> {
    let single = |p: &crate::residue_algebra::Poly| -> Option<Vec<u32>> {
        if p.num_terms() != 1 {
            return None;
        }
        p.leading().map(|(m, _)| m.exps().to_vec())
    };
    let num = single(r.num())?;
    let den = single(r.den())?;
    let mut out = BTreeMap::new();
    for (v, &e) in num.iter().enumerate() {
        if e > 0 {
            *out.entry(v).or_insert(0) += e as i64;
        }
    }
    for (v, &e) in den.iter().enumerate() {
        if e > 0 {
            *out.entry(v).or_insert(0) -= e as i64;
        }
    }
    out.retain(|_, e| *e != 0);
    Some(out)
}

/// All elements of `P`'s degree-`d` shadow: the monomials in the chain
/// generators in the order of [`ValuedSubfieldPresentation::exponent_vectors`].
pub fn enumerate_elements(p: &ValuedSubfieldPresentation, d: u32) -> Result<Vec<HahnSeries>> {
    Ok(p.monomials(d)?.into_iter().map(|(_, m)| m).collect())
}

/// Integer span of the valuations of all degree-`<= d` monomials, in
/// Hermite normal form. A lower bound for the value group of the field.
pub fn value_group_shadow(p: &ValuedSubfieldPresentation, d: u32) -> GammaSubgroup {
    let vals = p.generator_valuations();
    let mut gens = Vec::new();
    for e in ValuedSubfieldPresentation::exponent_vectors(vals.len(), d) {
        let mut g = GammaElement::zero(p.rank());
        for (v, &k) in vals.iter().zip(&e) {
            if k > 0 {
                g = &g + &v.scale_int(k as i64);
            }
        }
        if !g.is_zero() {
            gens.push(g);
        }
    }
    GammaSubgroup::new(p.rank(), gens).expect("ranks agree").reduced()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HypothesisStatus {
    Pass,
    /// Holds on the degree-bounded shadow; not certified globally.
    BoundedPass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HypothesisEntry {
    pub name: String,
    pub status: HypothesisStatus,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct HypothesisReport {
    pub entries: Vec<HypothesisEntry>,
}

pub const HYP_COMMON_BASE: &str = "common-base";
pub const HYP_VALUE_GROUPS: &str = "value-group-intersection";
pub const HYP_DISJOINT: &str = "residue-linear-disjointness";
pub const HYP_TORSION: &str = "torsion-free-quotient";

impl HypothesisReport {
    fn push(&mut self, name: &str, status: HypothesisStatus, detail: String) {
        self.entries.push(HypothesisEntry {
            name: name.to_string(),
            status,
            detail,
        });
    }

    pub fn get(&self, name: &str) -> Option<&HypothesisEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn passes(&self, name: &str) -> bool {
        self.get(name).is_some_and(|e| e.status != HypothesisStatus::Fail)
    }

    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.status != HypothesisStatus::Fail)
    }

    pub fn failures(&self) -> Vec<String> {
        self.entries
            .iter()
            .filter(|e| e.status == HypothesisStatus::Fail)
            .map(|e| format!("{}: {}", e.name, e.detail))
            .collect()
    }
}

/// Residue monomials of degree `<= 2` in `vars`, starting with 1.
fn residue_probe(vars: &[usize]) -> Vec<ResElement> {
    let mut out = vec![ResElement::one()];
    for (i, &a) in vars.iter().enumerate() {
        out.push(ResElement::var(a));
        for &b in &vars[i..] {
            out.push(&ResElement::var(a) * &ResElement::var(b));
        }
    }
    out
}

/// Checks the standing hypotheses on `C ⊆ L, M`. Failures are entries in the
/// report, never errors.
pub fn check_hypotheses(
    l: &ValuedSubfieldPresentation,
    m: &ValuedSubfieldPresentation,
    c: &ValuedSubfieldPresentation,
) -> HypothesisReport {
    use HypothesisStatus::*;
    let mut report = HypothesisReport::default();

    if l.extends(c) && m.extends(c) {
        report.push(
            HYP_COMMON_BASE,
            Pass,
            format!("{} and {} extend {}", l.name, m.name, c.name),
        );
    } else {
        report.push(
            HYP_COMMON_BASE,
            Fail,
            format!("{} is not a common base of {} and {}", c.name, l.name, m.name),
        );
    }

    let gl = value_group_shadow(l, l.degree_bound);
    let gm = value_group_shadow(m, m.degree_bound);
    let gc = value_group_shadow(c, c.degree_bound);
    match gl.intersection(&gm).and_then(|i| i.same_group(&gc).map(|s| (i, s))) {
        Ok((_, true)) => report.push(
            HYP_VALUE_GROUPS,
            BoundedPass,
            format!("shadow intersection equals {gc}"),
        ),
        Ok((i, false)) => report.push(
            HYP_VALUE_GROUPS,
            Fail,
            format!("shadow intersection {i} differs from {gc}"),
        ),
        Err(e) => report.push(HYP_VALUE_GROUPS, Fail, e.to_string()),
    }

    match (l.residue_data(), m.residue_data(), c.residue_data()) {
        (Ok(rl), Ok(rm), Ok(rc)) => {
            let kc = rc.subfield.vars();
            let only_l: Vec<usize> = rl.subfield.vars().difference(kc).copied().collect();
            let only_m: BTreeSet<usize> = rm.subfield.vars().difference(kc).copied().collect();
            let shared: Vec<usize> = only_l.iter().filter(|v| only_m.contains(v)).copied().collect();
            if !shared.is_empty() {
                let names: Vec<String> = shared.iter().map(|v| format!("x{}", v + 1)).collect();
                report.push(
                    HYP_DISJOINT,
                    Fail,
                    format!("residue variables {} occur in both fields", names.join(", ")),
                );
            } else {
                // Spot check: C-independent residue monomials of L stay
                // independent over k_M (and symmetrically).
                let probe_ok = |a: &[usize], over_c: &ResSubfield, over_m: &ResSubfield| {
                    let probe = residue_probe(a);
                    !linearly_independent_over(&probe, over_c).independent
                        || linearly_independent_over(&probe, over_m).independent
                };
                let only_m_vec: Vec<usize> = only_m.iter().copied().collect();
                let ok =
                    probe_ok(&only_l, &rc.subfield, &rm.subfield) && probe_ok(&only_m_vec, &rc.subfield, &rl.subfield);
                let exact = rl.variable_generated && rm.variable_generated && rc.variable_generated;
                let status = match (ok, exact) {
                    (false, _) => Fail,
                    (true, true) => Pass,
                    (true, false) => BoundedPass,
                };
                report.push(
                    HYP_DISJOINT,
                    status,
                    if ok {
                        "residue transcendentals outside the base are disjoint".to_string()
                    } else {
                        "residue spot check found a dependence".to_string()
                    },
                );
            }
        }
        (a, b, c) => {
            let err = [a.err(), b.err(), c.err()].into_iter().flatten().next();
            report.push(HYP_DISJOINT, Fail, err.map_or_else(String::new, |e| e.to_string()));
        }
    }

    match torsion_free_quotient(gl.generators(), &gc) {
        Ok(true) => report.push(HYP_TORSION, BoundedPass, format!("{gl} / {gc} is torsion-free")),
        Ok(false) => report.push(HYP_TORSION, Fail, format!("{gl} / {gc} has torsion")),
        Err(e) => report.push(HYP_TORSION, Fail, e.to_string()),
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hahn_series::Universe;
    use crate::ordered_groups::rat;

    fn pres(
        u: &Universe,
        name: &str,
        base: Option<Arc<ValuedSubfieldPresentation>>,
        gens: &[&str],
        d: u32,
    ) -> Arc<ValuedSubfieldPresentation> {
        let gens = gens.iter().map(|g| u.parse_series(g).unwrap()).collect();
        ValuedSubfieldPresentation::new(name, base, gens, d, u.precision()).unwrap()
    }

    fn binomial(n: u64, k: u64) -> u64 {
        (1..=k).fold(1, |acc, i| acc * (n + 1 - i) / i)
    }

    #[test]
    fn enumeration_examples() {
        let u = Universe::new(&["t"], &[]);
        let p = pres(&u, "L", None, &["t"], 2);
        let e = enumerate_elements(&p, 2).unwrap();
        let expect: Vec<HahnSeries> = ["1", "t", "t^2"].iter().map(|s| u.parse_series(s).unwrap()).collect();
        assert_eq!(e, expect);
        let p = pres(&u, "L", None, &["t", "1+t"], 1);
        let e = enumerate_elements(&p, 1).unwrap();
        let expect: Vec<HahnSeries> = ["1", "t", "1+t"].iter().map(|s| u.parse_series(s).unwrap()).collect();
        assert_eq!(e, expect);
    }

    #[test]
    fn enumeration_count_is_stars_and_bars() {
        for g in 0..4usize {
            for d in 0..5u32 {
                let n = ValuedSubfieldPresentation::exponent_vectors(g, d).len() as u64;
                assert_eq!(n, binomial(g as u64 + d as u64, d as u64), "g={g} d={d}");
            }
        }
    }

    #[test]
    fn shadow_examples() {
        let u = Universe::new(&["t"], &[]);
        let c = pres(&u, "C", None, &["t"], 3);
        let one = GammaElement::from_ints(&[1], &[]);
        assert!(value_group_shadow(&c, 3)
            .same_group(&GammaSubgroup::new((1, 0), vec![one]).unwrap())
            .unwrap());
        let l = pres(&u, "L", None, &["t^(1/2)"], 1);
        let half = GammaElement::new(vec![rat(1, 2)], vec![]);
        assert!(value_group_shadow(&l, 1)
            .same_group(&GammaSubgroup::new((1, 0), vec![half]).unwrap())
            .unwrap());
        let u2 = Universe::new(&["t1", "t2"], &[]);
        let p = pres(&u2, "L", None, &["t1*t2", "t2"], 2);
        let s = value_group_shadow(&p, 2);
        let std = GammaSubgroup::new(
            (2, 0),
            vec![
                GammaElement::from_ints(&[1, 0], &[]),
                GammaElement::from_ints(&[0, 1], &[]),
            ],
        )
        .unwrap();
        assert!(s.same_group(&std).unwrap());
    }

    #[test]
    fn residue_fields() {
        let u = Universe::new(&["t1", "t2"], &["x1", "x2"]);
        let l = pres(&u, "L", None, &["x1*t1"], 2);
        let r = l.residue_data().unwrap();
        assert!(r.subfield.is_empty());
        assert!(r.variable_generated);
        let m = pres(&u, "M", None, &["x1*t1", "t1"], 2);
        let r = m.residue_data().unwrap();
        assert_eq!(r.subfield, ResSubfield::new([0]));
        assert_eq!(r.lifts[&0], u.parse_series("x1").unwrap());
        let k = pres(&u, "K", None, &["x1*x2 + t1", "x2"], 2);
        let r = k.residue_data().unwrap();
        assert_eq!(r.subfield, ResSubfield::new([0, 1]));
        assert!(r.variable_generated);
        let w = k.lift_residue(&u.parse_res("x1/(1+x2)").unwrap()).unwrap();
        assert_eq!(w.residue().unwrap(), u.parse_res("x1/(1+x2)").unwrap());
    }

    #[test]
    fn trivially_valued_detection() {
        let u = Universe::new(&["t"], &["x1"]);
        assert!(pres(&u, "C", None, &["x1"], 2).is_trivially_valued());
        assert!(pres(&u, "C", None, &["x1 + t"], 2).is_trivially_valued());
        assert!(!pres(&u, "C", None, &["1 + t"], 2).is_trivially_valued());
        assert!(!pres(&u, "C", None, &["t"], 2).is_trivially_valued());
        assert!(ValuedSubfieldPresentation::prime("Q", (1, 0), u.precision()).is_trivially_valued());
    }

    #[test]
    fn hypotheses_disjoint_axes() {
        let u = Universe::new(&["t1", "t2"], &["x1", "x2"]);
        let c = ValuedSubfieldPresentation::prime("Q", u.rank(), u.precision());
        let l = pres(&u, "L", Some(c.clone()), &["x1", "t1"], 3);
        let m = pres(&u, "M", Some(c.clone()), &["x2", "t2"], 3);
        let r = check_hypotheses(&l, &m, &c);
        assert!(r.all_pass(), "{r:?}");
        let swapped = check_hypotheses(&m, &l, &c);
        for name in [HYP_COMMON_BASE, HYP_VALUE_GROUPS, HYP_DISJOINT] {
            assert_eq!(r.get(name).unwrap().status, swapped.get(name).unwrap().status);
        }
    }

    #[test]
    fn hypotheses_ramified() {
        let u = Universe::new(&["t"], &[]);
        let c = pres(&u, "C", None, &["t"], 3);
        let l = pres(&u, "L", Some(c.clone()), &["t^(1/2)"], 2);
        let r = check_hypotheses(&l, &c, &c);
        assert_eq!(r.get(HYP_TORSION).unwrap().status, HypothesisStatus::Fail);
    }

    #[test]
    fn hypotheses_equal_fields() {
        let u = Universe::new(&["t1", "t2"], &[]);
        let c = ValuedSubfieldPresentation::prime("Q", u.rank(), u.precision());
        let l = pres(&u, "L", Some(c.clone()), &["t1"], 2);
        let r = check_hypotheses(&l, &l, &c);
        assert_eq!(r.get(HYP_VALUE_GROUPS).unwrap().status, HypothesisStatus::Fail);
        let c2 = pres(&u, "C", None, &["t1"], 2);
        let l2 = pres(&u, "L", Some(c2.clone()), &[], 2);
        let r = check_hypotheses(&l2, &l2, &c2);
        assert_ne!(r.get(HYP_VALUE_GROUPS).unwrap().status, HypothesisStatus::Fail);
    }

    #[test]
    fn shared_residue_variable_fails_disjointness() {
        let u = Universe::new(&["t1", "t2"], &["x1", "x2"]);
        let c = ValuedSubfieldPresentation::prime("Q", u.rank(), u.precision());
        let l = pres(&u, "L", Some(c.clone()), &["x1", "t1"], 2);
        let m = pres(&u, "M", Some(c.clone()), &["x1"], 2);
        let r = check_hypotheses(&l, &m, &c);
        assert_eq!(r.get(HYP_DISJOINT).unwrap().status, HypothesisStatus::Fail);
    }
}
