//! Valued-field isomorphisms on presented fields, their extension to a
//! compositum by the identity on the other factor, and valuation refinement
//! by demoting residue variables to infinitesimal axes.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hahn_series::{HahnSeries, Precision, Universe};
use crate::ordered_groups::lattice::{common_denominator, hermite, scale_to_integers};
use crate::ordered_groups::{GammaElement, Rational};
use crate::presentations::{
    check_hypotheses, monomial_table, small_rational, value_group_shadow, ValuedSubfieldPresentation, HYP_COMMON_BASE,
    HYP_DISJOINT, HYP_VALUE_GROUPS,
};
use crate::residue_algebra::{linearly_independent_over, Monomial, Poly, ResElement, ResSubfield};
use crate::rv_sort::{power_coset_of, rv_independent, verify_lambda_table, LambdaReport, PowerModel, RvElement};
use crate::separated::{
    check_separated, chosen_coefficients, for_each_combination, rv_of_combination, separated_basis_from, Verdict,
};

/// Properties an isomorphism declares about itself.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Fixes {
    pub base: bool,
    pub value_group: bool,
    pub residue_field: bool,
    pub rv: bool,
}

impl Fixes {
    pub fn parse(names: &[String]) -> Result<Self> {
        let mut f = Fixes::default();
        for n in names {
            match n.as_str() {
                "C" | "base" => f.base = true,
                "gamma" | "value_group" => f.value_group = true,
                "k" | "residue_field" => f.residue_field = true,
                "rv" | "RV" => f.rv = true,
                other => return Err(Error::Invalid(format!("unknown fixes flag {other:?}"))),
            }
        }
        Ok(f)
    }
}

/// A map on `source` given by images of its own generators; base generators
/// are fixed.
#[derive(Clone, Debug)]
pub struct FieldIso {
    pub source: Arc<ValuedSubfieldPresentation>,
    pub images: Vec<HahnSeries>,
    pub fixes: Fixes,
}

/// Whether each declared property holds on generators.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct FlagCheck {
    pub value_group: bool,
    pub residue_field: bool,
    pub rv: bool,
    pub details: Vec<String>,
}

impl FieldIso {
    pub fn new(source: Arc<ValuedSubfieldPresentation>, images: Vec<HahnSeries>, fixes: Fixes) -> Result<Self> {
        if images.len() != source.generators().len() {
            return Err(Error::Invalid(format!(
                "{} has {} generators but {} images were given",
                source.name(),
                source.generators().len(),
                images.len()
            )));
        }
        for (i, s) in images.iter().enumerate() {
            if s.rank() != source.rank() || !s.is_determinable() {
                return Err(Error::Invalid(format!("image {i} is zero or not determinable")));
            }
        }
        Ok(FieldIso { source, images, fixes })
    }

    pub fn identity(source: Arc<ValuedSubfieldPresentation>) -> Self {
        let images = source.generators().to_vec();
        FieldIso {
            source,
            images,
            fixes: Fixes {
                base: true,
                value_group: true,
                residue_field: true,
                rv: true,
            },
        }
    }

    /// Images of the chain generators of the source, base generators first.
    pub fn chain_images(&self) -> Vec<HahnSeries> {
        let mut out = self.source.base().map_or_else(Vec::new, |b| b.all_generators());
        out.extend(self.images.iter().cloned());
        out
    }

    /// Evaluates the three properties on generators. The residue field is
    /// fixed iff every valuation-zero Laurent monomial in the generators has
    /// the same residue as its image.
    pub fn check_flags(&self) -> Result<FlagCheck> {
        let gens = self.source.all_generators();
        let imgs = self.chain_images();
        let mut out = FlagCheck {
            value_group: true,
            residue_field: true,
            rv: true,
            details: Vec::new(),
        };
        let mut ratios = Vec::with_capacity(gens.len());
        for (i, (g, s)) in gens.iter().zip(&imgs).enumerate() {
            let (vg, vs) = (g.valuation()?, s.valuation()?);
            if vg != vs {
                out.value_group = false;
                out.details.push(format!("generator {i}: v = {vg}, v(image) = {vs}"));
            }
            let ratio = s.leading_coeff()?.checked_div(&g.leading_coeff()?)?;
            if vg != vs || !ratio.is_one() {
                out.rv = false;
            }
            ratios.push(ratio);
        }
        if out.value_group {
            let vals: Vec<Vec<Rational>> = gens
                .iter()
                .map(|g| g.valuation().map(|v| v.coords()))
                .collect::<Result<_>>()?;
            let den = common_denominator(vals.iter().map(Vec::as_slice));
            let rows: Vec<Vec<BigInt>> = vals.iter().map(|v| scale_to_integers(v, &den)).collect();
            let width = rows.first().map_or(0, Vec::len);
            for e in hermite(&rows, width).left_kernel() {
                let mut prod = ResElement::one();
                for (r, k) in ratios.iter().zip(&e) {
                    let k = k
                        .to_i64()
                        .ok_or_else(|| Error::Unsupported("exponent out of range".into()))?;
                    prod = &prod * &r.pow(k)?;
                }
                if !prod.is_one() {
                    out.residue_field = false;
                    out.details
                        .push(format!("a valuation-zero monomial has residue ratio {prod}"));
                    break;
                }
            }
        } else {
            out.residue_field = false;
        }
        Ok(out)
    }
}

/// A polynomial in a list of generators with rational coefficients.
type Formal = BTreeMap<Vec<u32>, Rational>;

fn formal_add(a: &Formal, b: &Formal) -> Formal {
    let mut out = a.clone();
    for (e, c) in b {
        let v = out.entry(e.clone()).or_insert_with(Rational::zero);
        *v += c;
        if v.is_zero() {
            out.remove(e);
        }
    }
    out
}

fn formal_mul(a: &Formal, b: &Formal) -> Formal {
    let mut out = Formal::new();
    for (ea, ca) in a {
        for (eb, cb) in b {
            let e: Vec<u32> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
            let v = out.entry(e.clone()).or_insert_with(Rational::zero);
            *v += ca * cb;
            if v.is_zero() {
                out.remove(&e);
            }
        }
    }
    out
}

fn formal_eval(f: &Formal, gens: &[HahnSeries], rank: (usize, usize)) -> Result<HahnSeries> {
    let mut acc = HahnSeries::zero(rank);
    for (e, c) in f {
        let mut m = HahnSeries::one(rank);
        for (g, &k) in gens.iter().zip(e) {
            if k > 0 {
                m = m.mul(&g.pow(i64::from(k), &Precision::Exact)?)?;
            }
        }
        acc = &acc + &m.scale(&ResElement::from_rational(c.clone()));
    }
    Ok(acc)
}

fn formal_fmt(f: &Formal) -> String {
    if f.is_empty() {
        return "0".into();
    }
    f.iter()
        .map(|(e, c)| {
            let mono: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(i, &k)| {
                    if k == 1 {
                        format!("g{}", i + 1)
                    } else {
                        format!("g{}^{k}", i + 1)
                    }
                })
                .collect();
            if mono.is_empty() {
                c.to_string()
            } else {
                format!("{c}*{}", mono.join("*"))
            }
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

/// One failed verification.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub check: String,
    pub element: String,
    pub expected: String,
    pub got: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ExtensionReport {
    pub generators: usize,
    pub separated_basis: usize,
    pub image_basis_verdict: String,
    pub elements: usize,
    pub valuation_checks: usize,
    pub residue_checks: usize,
    pub rv_checks: usize,
    /// rv differences when RV is not declared fixed: reported, not failures.
    pub rv_flagged: usize,
    pub coset_checks: usize,
    pub coset_flagged: usize,
    pub hom_checks: usize,
    pub relations: usize,
    pub lambda: Vec<LambdaReport>,
    pub counterexamples: Vec<Counterexample>,
    pub flagged: Vec<Counterexample>,
}

impl ExtensionReport {
    pub fn passed(&self) -> bool {
        self.counterexamples.is_empty()
            && self.image_basis_verdict == Verdict::SeparatedGood.label()
            && self
                .lambda
                .iter()
                .all(|l| l.failures.is_empty() && l.multiplicativity_failures == 0)
    }
}

fn required_hypotheses(
    l: &ValuedSubfieldPresentation,
    m: &ValuedSubfieldPresentation,
    c: &ValuedSubfieldPresentation,
) -> Result<()> {
    let hyp = check_hypotheses(l, m, c);
    let failed: Vec<String> = [HYP_COMMON_BASE, HYP_VALUE_GROUPS, HYP_DISJOINT]
        .iter()
        .filter(|n| !hyp.passes(n))
        .map(|n| {
            hyp.get(n)
                .map_or(n.to_string(), |e| format!("{}: {}", e.name, e.detail))
        })
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::HypothesisViolation(failed))
    }
}

/// Extends `sigma` by the identity on `m` and verifies the extension on the
/// degree-`d` shadow of the compositum: valuations, residues, rv values,
/// `P_n` cosets under `model`, the ring operations on seeded random
/// polynomials, and preservation of polynomial relations among generators.
pub fn extend_iso(
    sigma: &FieldIso,
    m: &ValuedSubfieldPresentation,
    c: &ValuedSubfieldPresentation,
    d: u32,
    model: Option<&PowerModel>,
    seed: u64,
) -> Result<ExtensionReport> {
    let l = sigma.source.as_ref();
    required_hypotheses(l, m, c)?;
    let flags = sigma.check_flags()?;
    let mut violations = Vec::new();
    if !flags.value_group {
        violations.push("sigma does not fix the value group of L".to_string());
    }
    if !flags.residue_field {
        violations.push("sigma does not fix the residue field of L".to_string());
    }
    if sigma.fixes.rv && !flags.rv {
        violations.push("sigma is declared to fix RV_L but does not".to_string());
    }
    if !violations.is_empty() {
        violations.extend(flags.details);
        return Err(Error::HypothesisViolation(violations));
    }
    let rank = l.rank();
    let u = Universe::anonymous(rank);

    // Generators of the compositum: the chain of L, then M's own generators.
    let mut gens = l.all_generators();
    let mut imgs = sigma.chain_images();
    let m_own_start = m.base_generator_count();
    gens.extend(m.all_generators()[m_own_start..].iter().cloned());
    imgs.extend(m.all_generators()[m_own_start..].iter().cloned());

    let mut report = ExtensionReport {
        generators: gens.len(),
        ..Default::default()
    };

    // The separated basis of L over C and its image, which must stay
    // separated over M.
    let l_monos = l.own_monomials(d)?;
    let l_vectors: Vec<HahnSeries> = l_monos.iter().map(|(_, x)| x.clone()).collect();
    let (kept, construction) = separated_basis_from(&l_vectors, c, l.target())?;
    report.separated_basis = kept.len();
    let own_imgs = &sigma.images;
    let mut image_basis = Vec::with_capacity(kept.len());
    for row in &construction.change {
        let mut acc = HahnSeries::zero(rank);
        for (coef, &k) in row.iter().zip(&kept) {
            if coef.is_exact_zero() {
                continue;
            }
            let img = formal_eval(
                &BTreeMap::from([(l_monos[k].0.clone(), Rational::one())]),
                own_imgs,
                rank,
            )?;
            acc = &acc + &coef.mul(&img)?;
        }
        image_basis.push(acc);
    }
    report.image_basis_verdict = if image_basis.is_empty() {
        Verdict::SeparatedGood.label().to_string()
    } else {
        check_separated(&image_basis, m)?.verdict.label().to_string()
    };
    for (i, (b, s)) in construction.basis.iter().zip(&image_basis).enumerate() {
        if b.valuation()? != s.valuation()? {
            report.counterexamples.push(Counterexample {
                check: "basis-valuation".into(),
                element: format!("basis vector {i}"),
                expected: b.valuation()?.to_string(),
                got: s.valuation()?.to_string(),
            });
        }
    }

    // Elements: all monomials, then seeded random rational combinations.
    let exps = ValuedSubfieldPresentation::exponent_vectors(gens.len(), d);
    let src = monomial_table(&gens, d, rank)?;
    let dst = monomial_table(&imgs, d, rank)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut elements: Vec<(String, HahnSeries, HahnSeries)> = Vec::new();
    for ((e, x), (_, y)) in src.iter().zip(&dst) {
        elements.push((
            formal_fmt(&BTreeMap::from([(e.clone(), Rational::one())])),
            x.clone(),
            y.clone(),
        ));
    }
    let random_count = 4 * exps.len();
    for _ in 0..random_count {
        let k = rng.gen_range(2..=3);
        let mut f = Formal::new();
        for _ in 0..k {
            f = formal_add(
                &f,
                &BTreeMap::from([(exps[rng.gen_range(0..exps.len())].clone(), small_rational(&mut rng))]),
            );
        }
        if f.is_empty() {
            continue;
        }
        let mut x = HahnSeries::zero(rank);
        let mut y = HahnSeries::zero(rank);
        for (e, q) in &f {
            let idx = exps.iter().position(|v| v == e).expect("enumerated");
            let q = ResElement::from_rational(q.clone());
            x = &x + &src[idx].1.scale(&q);
            y = &y + &dst[idx].1.scale(&q);
        }
        elements.push((formal_fmt(&f), x, y));
    }
    report.elements = elements.len();

    let ns = model.map(PowerModel::supported_n).unwrap_or_default();
    let mut rv_pool: Vec<RvElement> = Vec::new();
    for (name, x, y) in &elements {
        let vx = x.valuation()?;
        let vy = y.valuation()?;
        report.valuation_checks += 1;
        if vx != vy {
            report.counterexamples.push(Counterexample {
                check: "valuation".into(),
                element: name.clone(),
                expected: vx.to_string(),
                got: vy.to_string(),
            });
            continue;
        }
        if vx.is_zero() {
            report.residue_checks += 1;
            let (rx, ry) = (x.residue()?, y.residue()?);
            if rx != ry {
                report.counterexamples.push(Counterexample {
                    check: "residue".into(),
                    element: name.clone(),
                    expected: u.fmt_res(&rx),
                    got: u.fmt_res(&ry),
                });
            }
        }
        let (rx, ry) = (x.rv()?, y.rv()?);
        report.rv_checks += 1;
        if rx != ry {
            let ce = Counterexample {
                check: "rv".into(),
                element: name.clone(),
                expected: rx.to_string(),
                got: ry.to_string(),
            };
            if sigma.fixes.rv {
                report.counterexamples.push(ce);
            } else {
                report.rv_flagged += 1;
                report.flagged.push(ce);
            }
        }
        if let Some(model) = model {
            for &n in &ns {
                report.coset_checks += 1;
                let (cx, cy) = (power_coset_of(&rx, n, model)?, power_coset_of(&ry, n, model)?);
                if cx != cy {
                    let ce = Counterexample {
                        check: format!("P_{n} coset"),
                        element: name.clone(),
                        expected: format!("{:?}", cx.key),
                        got: format!("{:?}", cy.key),
                    };
                    if sigma.fixes.rv {
                        report.counterexamples.push(ce);
                    } else {
                        report.coset_flagged += 1;
                        report.flagged.push(ce);
                    }
                }
            }
        }
        if !rv_pool.contains(&rx) {
            rv_pool.push(rx);
        }
    }
    if let Some(model) = model {
        for &n in &ns {
            // The identity depends on cosets only; two samples per coset
            // exercise it on actual rv values.
            let mut per_coset: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
            let mut samples = Vec::new();
            for x in &rv_pool {
                let seen = per_coset.entry(power_coset_of(x, n, model)?.key).or_insert(0);
                if *seen < 2 {
                    *seen += 1;
                    samples.push(x.clone());
                }
            }
            report.lambda.push(verify_lambda_table(model, n, rank, &samples)?);
        }
    }

    // Ring operations on pairs of random polynomials of degree <= d / 2.
    let half: Vec<Vec<u32>> = exps
        .iter()
        .filter(|e| 2 * e.iter().sum::<u32>() <= d.max(2))
        .cloned()
        .collect();
    let random_formal = |rng: &mut ChaCha8Rng| -> Formal {
        let mut f = Formal::new();
        for _ in 0..rng.gen_range(1..=3) {
            f = formal_add(
                &f,
                &BTreeMap::from([(half[rng.gen_range(0..half.len())].clone(), small_rational(rng))]),
            );
        }
        f
    };
    for _ in 0..24 {
        let f = random_formal(&mut rng);
        let g = random_formal(&mut rng);
        let sf = formal_eval(&f, &imgs, rank)?;
        let sg = formal_eval(&g, &imgs, rank)?;
        report.hom_checks += 2;
        if formal_eval(&formal_add(&f, &g), &imgs, rank)? != &sf + &sg {
            report.counterexamples.push(Counterexample {
                check: "additive".into(),
                element: format!("({}) + ({})", formal_fmt(&f), formal_fmt(&g)),
                expected: "sigma(x) + sigma(y)".into(),
                got: "different".into(),
            });
        }
        if formal_eval(&formal_mul(&f, &g), &imgs, rank)? != sf.mul(&sg)? {
            report.counterexamples.push(Counterexample {
                check: "multiplicative".into(),
                element: format!("({}) * ({})", formal_fmt(&f), formal_fmt(&g)),
                expected: "sigma(x) sigma(y)".into(),
                got: "different".into(),
            });
        }
    }

    // Linear relations among the monomials must map to relations.
    for rel in monomial_relations(&src)? {
        report.relations += 1;
        let image = formal_eval(&rel, &imgs, rank)?;
        if !image.is_exact_zero() {
            report.counterexamples.push(Counterexample {
                check: "relation".into(),
                element: formal_fmt(&rel),
                expected: "0".into(),
                got: u.fmt_series(&image),
            });
        }
    }
    Ok(report)
}

/// Packs a series into one residue element, `Σ_γ c_γ z^{i(γ)}` with a fresh
/// variable `z`, so that rational linear relations among series become
/// rational linear relations among residue elements.
fn pack(series: &[HahnSeries]) -> Result<Vec<ResElement>> {
    let mut support: BTreeSet<GammaElement> = BTreeSet::new();
    let mut fresh = 0;
    for s in series {
        if !s.is_exact() {
            return Err(Error::PrecisionExhausted("relations need exact series".into()));
        }
        for (g, c) in s.terms() {
            support.insert(g.clone());
            fresh = fresh.max(c.vars().last().map_or(0, |v| v + 1));
        }
    }
    let index: BTreeMap<&GammaElement, u32> = support.iter().zip(0..).collect();
    series
        .iter()
        .map(|s| {
            let mut acc = ResElement::zero();
            for (g, c) in s.terms() {
                let z = ResElement::from_poly(Poly::term(Monomial::var_pow(fresh, index[g]), Rational::one()));
                acc = &acc + &(c * &z);
            }
            Ok(acc)
        })
        .collect()
}

/// A basis of the rational linear relations among the monomial values, one
/// per monomial that depends on the earlier ones.
fn monomial_relations(monos: &[(Vec<u32>, HahnSeries)]) -> Result<Vec<Formal>> {
    let values: Vec<HahnSeries> = monos.iter().map(|(_, x)| x.clone()).collect();
    let packed = pack(&values)?;
    let mut kept: Vec<usize> = Vec::new();
    let mut out = Vec::new();
    for i in 0..packed.len() {
        let mut trial: Vec<ResElement> = kept.iter().map(|&k| packed[k].clone()).collect();
        trial.push(packed[i].clone());
        let li = linearly_independent_over(&trial, &ResSubfield::prime());
        if li.independent {
            kept.push(i);
            continue;
        }
        let w = li.witness.expect("witness");
        let mut rel = Formal::new();
        for (r, &k) in w.iter().zip(kept.iter().chain(std::iter::once(&i))) {
            let q = r
                .as_rational()
                .ok_or_else(|| Error::InternalInconsistency("non-rational relation".into()))?;
            if !q.is_zero() {
                rel.insert(monos[k].0.clone(), q);
            }
        }
        out.push(rel);
    }
    Ok(out)
}

/// Where the new infinitesimal axes sit in the refined order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// Below every existing axis: the correct refinement.
    BelowMain,
    /// Above the main axes; breaks convexity and serves as a negative control.
    AboveMain,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Demotion {
    /// Residue variable index in the base universe.
    pub variable: usize,
    /// `res(a_i / e_i) = scalar · x_variable`.
    pub scalar: String,
}

/// The base universe together with residue variables reassigned to fresh
/// infinitesimal axes `δ_1 ≪ ... ≪ δ_r`.
#[derive(Clone, Debug)]
pub struct RefinedUniverse {
    pub base: Universe,
    pub refined: Universe,
    pub placement: Placement,
    pub demoted: Vec<Demotion>,
    pub pairs: Vec<(HahnSeries, HahnSeries)>,
    pub l: Arc<ValuedSubfieldPresentation>,
    pub m: Arc<ValuedSubfieldPresentation>,
    pub c: Arc<ValuedSubfieldPresentation>,
}

impl RefinedUniverse {
    pub fn r(&self) -> usize {
        self.demoted.len()
    }

    /// Coordinate position of `δ_{i+1}` in the refined coordinate vector.
    fn delta_position(&self, i: usize) -> usize {
        let (main, inf) = self.base.rank();
        let r = self.r();
        match self.placement {
            Placement::BelowMain => main + inf + (r - 1 - i),
            Placement::AboveMain => r - 1 - i,
        }
    }

    fn base_positions(&self) -> Vec<usize> {
        let (main, inf) = self.base.rank();
        let r = self.r();
        match self.placement {
            Placement::BelowMain => (0..main + inf).collect(),
            Placement::AboveMain => (r..r + main + inf).collect(),
        }
    }

    /// The refined element with base part `g` and δ-coordinates `delta`.
    pub fn lift_gamma(&self, g: &GammaElement, delta: &[Rational]) -> GammaElement {
        let rank = self.refined.rank();
        let mut coords = vec![Rational::zero(); rank.0 + rank.1];
        for (p, q) in self.base_positions().into_iter().zip(g.coords()) {
            coords[p] = q;
        }
        for (i, q) in delta.iter().enumerate() {
            coords[self.delta_position(i)] = q.clone();
        }
        GammaElement::from_coords(rank, &coords)
    }

    /// The quotient map dropping δ-coordinates.
    pub fn drop_delta(&self, g: &GammaElement) -> GammaElement {
        let coords = g.coords();
        let base: Vec<Rational> = self.base_positions().into_iter().map(|p| coords[p].clone()).collect();
        GammaElement::from_coords(self.base.rank(), &base)
    }

    pub fn delta_part(&self, g: &GammaElement) -> Vec<Rational> {
        let coords = g.coords();
        (0..self.r()).map(|i| coords[self.delta_position(i)].clone()).collect()
    }

    pub fn in_delta(&self, g: &GammaElement) -> bool {
        self.drop_delta(g).is_zero()
    }

    fn delta_index(&self, var: usize) -> Option<usize> {
        self.demoted.iter().position(|d| d.variable == var)
    }

    /// Splits `p` into `(δ-exponents, remaining poly)` pieces.
    fn split_poly(&self, p: &Poly) -> BTreeMap<Vec<i64>, Poly> {
        let mut out: BTreeMap<Vec<i64>, Poly> = BTreeMap::new();
        for (mono, q) in p.terms() {
            let mut delta = vec![0i64; self.r()];
            let mut rest = Vec::new();
            for (v, &e) in mono.exps().iter().enumerate() {
                match self.delta_index(v) {
                    Some(i) => delta[i] = i64::from(e),
                    None => {
                        if rest.len() <= v {
                            rest.resize(v + 1, 0);
                        }
                        rest[v] = e;
                    }
                }
            }
            let piece = Poly::term(Monomial::from_exps(rest), q.clone());
            let entry = out.entry(delta).or_insert_with(Poly::zero);
            *entry = &*entry + &piece;
        }
        out
    }

    /// Rewrites a base series in the refined universe: every demoted
    /// variable becomes the unit monomial of its δ-axis.
    pub fn expand(&self, s: &HahnSeries) -> Result<HahnSeries> {
        let mut terms = Vec::new();
        for (g, c) in s.terms() {
            let den = self.split_poly(c.den());
            if den.len() != 1 {
                return Err(Error::PrecisionExhausted(format!(
                    "coefficient {c} needs a series expansion in demoted variables"
                )));
            }
            let (dshift, drest) = den.into_iter().next().expect("one piece");
            for (delta, prest) in self.split_poly(c.num()) {
                let exps: Vec<Rational> = delta
                    .iter()
                    .zip(&dshift)
                    .map(|(a, b)| Rational::from_integer(BigInt::from(a - b)))
                    .collect();
                let coeff = ResElement::new(prest, drest.clone())?;
                terms.push((self.lift_gamma(g, &exps), coeff));
            }
        }
        let precision = match s.precision() {
            Precision::Exact => Precision::Exact,
            Precision::Cutoff(c) => Precision::Cutoff(self.lift_cutoff(c)),
        };
        HahnSeries::from_terms(self.refined.rank(), terms, precision)
    }

    fn lift_cutoff(&self, c: &GammaElement) -> GammaElement {
        let fill = match self.placement {
            Placement::BelowMain => Rational::zero(),
            Placement::AboveMain => c.coords().into_iter().max().unwrap_or_else(Rational::zero),
        };
        self.lift_gamma(c, &vec![fill; self.r()])
    }

    /// `v'(x)`: the valuation of the re-expansion.
    pub fn refined_valuation(&self, s: &HahnSeries) -> Result<GammaElement> {
        self.expand(s)?.valuation()
    }

    /// The presentations `L`, `M`, `C` rewritten in the refined universe,
    /// sharing the rewritten base chain.
    pub fn refined_presentations(
        &self,
    ) -> Result<(
        Arc<ValuedSubfieldPresentation>,
        Arc<ValuedSubfieldPresentation>,
        Arc<ValuedSubfieldPresentation>,
    )> {
        let mut done: Vec<(*const ValuedSubfieldPresentation, Arc<ValuedSubfieldPresentation>)> = Vec::new();
        let c = self.refine_presentation(&self.c, &mut done)?;
        let l = self.refine_presentation(&self.l, &mut done)?;
        let m = self.refine_presentation(&self.m, &mut done)?;
        Ok((l, m, c))
    }

    fn refine_presentation(
        &self,
        p: &Arc<ValuedSubfieldPresentation>,
        done: &mut Vec<(*const ValuedSubfieldPresentation, Arc<ValuedSubfieldPresentation>)>,
    ) -> Result<Arc<ValuedSubfieldPresentation>> {
        let key = Arc::as_ptr(p);
        if let Some((_, r)) = done.iter().find(|(k, _)| *k == key) {
            return Ok(r.clone());
        }
        let base = match p.base() {
            Some(b) => Some(self.refine_presentation(b, done)?),
            None => None,
        };
        let gens = p
            .generators()
            .iter()
            .map(|g| self.expand(g))
            .collect::<Result<Vec<_>>>()?;
        let target = match p.target() {
            Precision::Exact => Precision::Exact,
            Precision::Cutoff(c) => Precision::Cutoff(self.lift_cutoff(c)),
        };
        let out = match (base, gens.is_empty()) {
            (None, true) => ValuedSubfieldPresentation::prime(p.name(), self.refined.rank(), target),
            (base, _) => ValuedSubfieldPresentation::new(p.name(), base, gens, p.degree_bound(), target)?,
        };
        done.push((key, out.clone()));
        Ok(out)
    }
}

/// Builds the refinement induced by the pairs `(a_i, e_i)`: each residue
/// `res(a_i / e_i) = s_i x_{j_i}` with `s_i` in `k_C` demotes `x_{j_i}` to a
/// new axis `δ_i`, where `δ_1 ≪ ... ≪ δ_r` lie below the existing axes.
#[allow(clippy::too_many_arguments)]
pub fn refine_valuation(
    universe: &Universe,
    l: &Arc<ValuedSubfieldPresentation>,
    m: &Arc<ValuedSubfieldPresentation>,
    c: &Arc<ValuedSubfieldPresentation>,
    a: &[HahnSeries],
    e: &[HahnSeries],
    b: &[HahnSeries],
    placement: Placement,
) -> Result<RefinedUniverse> {
    let indep = rv_independent(a, b, e, l, m, c)?;
    if !indep.preconditions_met || !indep.independent {
        return Err(Error::HypothesisViolation(vec![indep.diagnostic]));
    }
    let kc = c.residue_subfield();
    let mut demoted = Vec::new();
    for (i, (x, y)) in a.iter().zip(e).enumerate() {
        let res = x.leading_coeff()?.checked_div(&y.leading_coeff()?)?;
        let free: Vec<usize> = res.vars().into_iter().filter(|v| !kc.vars().contains(v)).collect();
        let distinguished = match free.as_slice() {
            [v] => {
                let s = res.checked_div(&ResElement::var(*v))?;
                kc.contains(&s).then_some((*v, s))
            }
            _ => None,
        };
        let Some((var, scalar)) = distinguished else {
            return Err(Error::Unsupported(format!(
                "res(a_{} / e_{}) = {} is not a k_C multiple of one residue variable",
                i + 1,
                i + 1,
                universe.fmt_res(&res)
            )));
        };
        if demoted.iter().any(|d: &Demotion| d.variable == var) {
            return Err(Error::Unsupported(format!(
                "variable {} is demoted twice",
                universe.var_name(var)
            )));
        }
        demoted.push(Demotion {
            variable: var,
            scalar: universe.fmt_res(&scalar),
        });
    }
    let r = demoted.len();
    let mut names: BTreeSet<String> = universe
        .axes()
        .iter()
        .chain(universe.inf_axes())
        .chain(universe.variables())
        .cloned()
        .collect();
    let mut delta_names = Vec::with_capacity(r);
    for i in 1..=r {
        let mut name = format!("d{i}");
        while names.contains(&name) {
            name.push('_');
        }
        names.insert(name.clone());
        delta_names.push(name);
    }
    // Axis names in coordinate order, most significant δ first.
    let deltas_desc: Vec<String> = delta_names.iter().rev().cloned().collect();
    let (axes, inf_axes) = match placement {
        Placement::BelowMain => {
            let mut inf = universe.inf_axes().to_vec();
            inf.extend(deltas_desc);
            (universe.axes().to_vec(), inf)
        }
        Placement::AboveMain => {
            let mut main = deltas_desc;
            main.extend(universe.axes().iter().cloned());
            (main, universe.inf_axes().to_vec())
        }
    };
    let placeholder = Universe::from_parts(
        axes.clone(),
        inf_axes.clone(),
        universe.variables().to_vec(),
        GammaElement::zero((axes.len(), inf_axes.len())),
    )?;
    let mut out = RefinedUniverse {
        base: universe.clone(),
        refined: placeholder,
        placement,
        demoted,
        pairs: a.iter().cloned().zip(e.iter().cloned()).collect(),
        l: l.clone(),
        m: m.clone(),
        c: c.clone(),
    };
    let cutoff = out.lift_cutoff(universe.cutoff());
    out.refined = Universe::from_parts(axes, inf_axes, universe.variables().to_vec(), cutoff)?;
    Ok(out)
}

/// Result of one refinement assertion.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub checked: usize,
    pub witness: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RefinementReport {
    pub r: usize,
    pub degree: u32,
    pub assertions: Vec<Assertion>,
}

impl RefinementReport {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Assertion> {
        self.assertions.iter().find(|a| a.name == name)
    }
}

pub const ASSERT_QUOTIENT: &str = "quotient";
pub const ASSERT_CONVEX: &str = "convexity";
pub const ASSERT_INTERSECTION: &str = "value-group-intersection";
pub const ASSERT_RV: &str = "rv-formula";

/// Checks the refinement on the degree-`d` monomials of `L` and `M`:
/// dropping δ recovers `v`; the δ-span is convex and the quotient monotone;
/// `Γ_L ∩ Γ_M = Γ_C` under `v'`; and the rv formula for separated
/// combinations holds in the refined universe.
pub fn verify_refinement(ru: &RefinedUniverse, d: u32) -> Result<RefinementReport> {
    let mut elems: Vec<HahnSeries> = Vec::new();
    for p in [&ru.l, &ru.m] {
        for (_, x) in p.monomials(d)? {
            if !elems.contains(&x) {
                elems.push(x);
            }
        }
    }
    let refined_vals: Vec<GammaElement> = elems.iter().map(|x| ru.refined_valuation(x)).collect::<Result<_>>()?;
    let base_vals: Vec<GammaElement> = elems.iter().map(|x| x.valuation()).collect::<Result<_>>()?;
    let fmt = |x: &HahnSeries| ru.base.fmt_series(x);
    let mut assertions = Vec::new();

    let mut quotient = Assertion {
        name: ASSERT_QUOTIENT.into(),
        passed: true,
        checked: 0,
        witness: None,
    };
    for (i, x) in elems.iter().enumerate() {
        quotient.checked += 1;
        let dropped = ru.drop_delta(&refined_vals[i]);
        if dropped != base_vals[i] {
            quotient.passed = false;
            quotient.witness = Some(format!("{}: v = {}, dropped v' = {dropped}", fmt(x), base_vals[i]));
            break;
        }
    }
    assertions.push(quotient);

    let mut convex = Assertion {
        name: ASSERT_CONVEX.into(),
        passed: true,
        checked: 0,
        witness: None,
    };
    let refined_rank = ru.refined.rank();
    let mut probes: Vec<GammaElement> = Vec::new();
    for v in &refined_vals {
        for w in &refined_vals {
            let diff = v - w;
            if diff.is_positive() && !probes.contains(&diff) {
                probes.push(diff);
            }
        }
    }
    for k in 0..refined_rank.0 + refined_rank.1 {
        let mut coords = vec![Rational::zero(); refined_rank.0 + refined_rank.1];
        coords[k] = Rational::one();
        probes.push(GammaElement::from_coords(refined_rank, &coords));
    }
    let mut bounds = Vec::new();
    for i in 0..ru.r() {
        for k in 1..=i64::from(d.max(1)) {
            let mut delta = vec![Rational::zero(); ru.r()];
            delta[i] = Rational::from_integer(BigInt::from(k));
            bounds.push(ru.lift_gamma(&GammaElement::zero(ru.base.rank()), &delta));
        }
    }
    'convex: for h in &bounds {
        for g in &probes {
            convex.checked += 1;
            if g < h && !ru.in_delta(g) {
                convex.passed = false;
                convex.witness = Some(format!("0 < {g} < {h} with {h} in the δ-span but {g} outside it"));
                break 'convex;
            }
        }
    }
    if convex.passed {
        'mono: for i in 0..elems.len() {
            for j in 0..elems.len() {
                convex.checked += 1;
                if refined_vals[i] <= refined_vals[j] && base_vals[i] > base_vals[j] {
                    convex.passed = false;
                    convex.witness = Some(format!(
                        "v'({}) <= v'({}) but v reverses the order",
                        fmt(&elems[i]),
                        fmt(&elems[j])
                    ));
                    break 'mono;
                }
            }
        }
    }
    assertions.push(convex);

    let (rl, rm, rc) = ru.refined_presentations()?;
    let mut inter = Assertion {
        name: ASSERT_INTERSECTION.into(),
        passed: true,
        checked: 1,
        witness: None,
    };
    let gl = value_group_shadow(&rl, d);
    let gm = value_group_shadow(&rm, d);
    let gc = value_group_shadow(&rc, d);
    let meet = gl.intersection(&gm)?;
    if !meet.same_group(&gc)? {
        inter.passed = false;
        let extra = meet
            .generators()
            .iter()
            .find(|g| !gc.contains(g).unwrap_or(false))
            .cloned();
        inter.witness = Some(match extra {
            Some(g) => format!("{g} lies in both value groups but not in that of {}", rc.name()),
            None => format!("{meet} differs from {gc}"),
        });
    }
    assertions.push(inter);

    let mut rv = Assertion {
        name: ASSERT_RV.into(),
        passed: true,
        checked: 0,
        witness: None,
    };
    let l_monos = rl.own_monomials(d)?;
    let l_vectors: Vec<HahnSeries> = l_monos.iter().map(|(_, x)| x.clone()).collect();
    let (kept, construction) = separated_basis_from(&l_vectors, &rc, rl.target())?;
    let degrees: Vec<u32> = kept.iter().map(|&k| l_monos[k].0.iter().sum()).collect();
    let m_monos = rm.monomials(d)?;
    let basis = construction.basis;
    let mut first_failure: Option<String> = None;
    for_each_combination(&degrees, &m_monos, d, &mut |choice| {
        if choice.iter().all(Option::is_none) {
            return Ok(());
        }
        let coeffs = chosen_coefficients(choice, &m_monos, refined_rank);
        rv.checked += 1;
        match rv_of_combination(&basis, &coeffs) {
            Ok(_) => Ok(()),
            Err(Error::InternalInconsistency(msg)) => {
                if first_failure.is_none() {
                    first_failure = Some(msg);
                }
                Ok(())
            }
            Err(e) => Err(e),
        }
    })?;
    if let Some(w) = first_failure {
        rv.passed = false;
        rv.witness = Some(w);
    }
    assertions.push(rv);

    Ok(RefinementReport {
        r: ru.r(),
        degree: d,
        assertions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rv_sort::SignRule;

    fn series(u: &Universe, es: &[&str]) -> Vec<HahnSeries> {
        es.iter().map(|e| u.parse_series(e).unwrap()).collect()
    }

    struct Instance {
        u: Universe,
        q: Arc<ValuedSubfieldPresentation>,
        l: Arc<ValuedSubfieldPresentation>,
        m: Arc<ValuedSubfieldPresentation>,
    }

    fn instance(axes: &[&str], vars: &[&str], l: &[&str], m: &[&str], d: u32) -> Instance {
        let u = Universe::new(axes, vars);
        let q = ValuedSubfieldPresentation::prime("C", u.rank(), u.precision());
        let lp = ValuedSubfieldPresentation::new("L", Some(q.clone()), series(&u, l), d, u.precision()).unwrap();
        let mp = ValuedSubfieldPresentation::new("M", Some(q.clone()), series(&u, m), d, u.precision()).unwrap();
        Instance { u, q, l: lp, m: mp }
    }

    #[test]
    fn identity_extension() {
        let i = instance(&["t1", "t2"], &["x1", "x2"], &["x1*t1"], &["x2", "t2"], 3);
        let sigma = FieldIso::identity(i.l.clone());
        let rep = extend_iso(&sigma, &i.m, &i.q, 3, Some(&PowerModel::Acf), 1).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert_eq!(rep.rv_flagged, 0);
    }

    #[test]
    fn twisted_generator_extension() {
        let i = instance(&["t1", "t2"], &["x1", "x2"], &["x1*t1"], &["x2", "t2"], 3);
        let fixes = Fixes::parse(&["C".into(), "gamma".into(), "k".into(), "rv".into()]).unwrap();
        let sigma = FieldIso::new(i.l.clone(), series(&i.u, &["x1*t1*(1+t1)"]), fixes).unwrap();
        for model in [PowerModel::Acf, PowerModel::Rcf(SignRule::Leading)] {
            let rep = extend_iso(&sigma, &i.m, &i.q, 3, Some(&model), 5).unwrap();
            assert!(rep.passed(), "{rep:?}");
            assert_eq!(rep.elements, 20 + 80);
            assert!(rep.lambda.iter().all(|l| l.checked > 0));
        }
    }

    #[test]
    fn scaling_is_flagged_not_failed() {
        let i = instance(&["t1", "t2"], &["x2"], &["t1"], &["x2", "t2"], 3);
        let fixes = Fixes::parse(&["C".into(), "gamma".into(), "k".into()]).unwrap();
        let sigma = FieldIso::new(i.l.clone(), series(&i.u, &["2*t1"]), fixes).unwrap();
        let rep = extend_iso(&sigma, &i.m, &i.q, 3, Some(&PowerModel::Acf), 5).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert!(rep.rv_flagged > 0);
        let f = &rep.flagged[0];
        assert_eq!(f.check, "rv");

        let declared = Fixes { rv: true, ..fixes };
        let sigma = FieldIso::new(i.l.clone(), series(&i.u, &["2*t1"]), declared).unwrap();
        assert!(matches!(
            extend_iso(&sigma, &i.m, &i.q, 3, None, 5),
            Err(Error::HypothesisViolation(_))
        ));
    }

    #[test]
    fn flags_detect_residue_change() {
        let i = instance(&["t1", "t2"], &["x1", "x2"], &["x1"], &["x2", "t2"], 3);
        let sigma = FieldIso::new(i.l.clone(), series(&i.u, &["2*x1"]), Fixes::default()).unwrap();
        let f = sigma.check_flags().unwrap();
        assert!(f.value_group && !f.residue_field);
        let sigma = FieldIso::new(i.l.clone(), series(&i.u, &["x1*t1"]), Fixes::default()).unwrap();
        assert!(!sigma.check_flags().unwrap().value_group);
    }

    #[test]
    fn relations_are_found() {
        let u = Universe::new(&["t"], &[]);
        let gens = series(&u, &["t", "t^2"]);
        let monos = monomial_table(&gens, 2, u.rank()).unwrap();
        let rels = monomial_relations(&monos).unwrap();
        // g1^2 = g2, g1 g2 and g2^2 are beyond degree 2
        assert_eq!(rels.len(), 1);
        let r = &rels[0];
        assert_eq!(formal_eval(r, &gens, u.rank()).unwrap(), HahnSeries::zero(u.rank()));
    }

    fn r1() -> (Instance, RefinedUniverse) {
        let i = instance(&["t1"], &["x1", "x2"], &["x1*t1"], &["x2", "t1"], 4);
        let a = series(&i.u, &["x1*t1"]);
        let e = series(&i.u, &["t1"]);
        let ru = refine_valuation(&i.u, &i.l, &i.m, &i.q, &a, &e, &[], Placement::BelowMain).unwrap();
        (i, ru)
    }

    #[test]
    fn demotion_example() {
        let (i, ru) = r1();
        assert_eq!(ru.r(), 1);
        assert_eq!(ru.refined.rank(), (1, 1));
        let v = ru.refined_valuation(&i.u.parse_series("x1*t1").unwrap()).unwrap();
        assert_eq!(v, GammaElement::from_ints(&[1], &[1]));
        let v = ru.refined_valuation(&i.u.parse_series("t1").unwrap()).unwrap();
        assert_eq!(v, GammaElement::from_ints(&[1], &[0]));
        let v = ru
            .refined_valuation(&i.u.parse_series("(1 + x1) / x1").unwrap())
            .unwrap();
        assert_eq!(v, GammaElement::from_ints(&[0], &[-1]));
        assert!(matches!(
            ru.expand(&i.u.parse_series("1 / (1 + x1)").unwrap()),
            Err(Error::PrecisionExhausted(_))
        ));
        let rep = verify_refinement(&ru, 4).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn trivial_refinement() {
        let i = instance(&["t1"], &["x1", "x2"], &["x1*t1"], &["x2", "t1"], 4);
        let ru = refine_valuation(&i.u, &i.l, &i.m, &i.q, &[], &[], &[], Placement::BelowMain);
        // With r = 0 the rank condition on v(a) fails: Γ_L has rank 1.
        assert!(matches!(ru, Err(Error::HypothesisViolation(_))));
        let j = instance(&["t1"], &["x1", "x2"], &["x1"], &["x2", "t1"], 4);
        let b = series(&j.u, &["x1"]);
        let ru = refine_valuation(&j.u, &j.l, &j.m, &j.q, &[], &[], &b, Placement::BelowMain).unwrap();
        assert_eq!(ru.r(), 0);
        let x = j.u.parse_series("x1 + t1").unwrap();
        assert_eq!(ru.refined_valuation(&x).unwrap(), x.valuation().unwrap());
        assert!(verify_refinement(&ru, 4).unwrap().passed());
    }

    #[test]
    fn refinement_r2() {
        let i = instance(
            &["t1", "t2"],
            &["x1", "x2", "x3"],
            &["x1*t1", "x3*t2"],
            &["x2", "t1", "t2"],
            4,
        );
        let a = series(&i.u, &["x1*t1", "x3*t2"]);
        let e = series(&i.u, &["t1", "t2"]);
        let ru = refine_valuation(&i.u, &i.l, &i.m, &i.q, &a, &e, &[], Placement::BelowMain).unwrap();
        assert_eq!(ru.refined.rank(), (2, 2));
        // δ1 is infinitesimal with respect to δ2.
        let v1 = ru.refined_valuation(&i.u.parse_series("x1").unwrap()).unwrap();
        let v3 = ru.refined_valuation(&i.u.parse_series("x3").unwrap()).unwrap();
        assert!(v1 < v3 && v1.is_positive());
        let rep = verify_refinement(&ru, 4).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn negative_control_breaks_convexity() {
        let (i, _) = r1();
        let a = series(&i.u, &["x1*t1"]);
        let e = series(&i.u, &["t1"]);
        let ru = refine_valuation(&i.u, &i.l, &i.m, &i.q, &a, &e, &[], Placement::AboveMain).unwrap();
        let rep = verify_refinement(&ru, 4).unwrap();
        let c = rep.get(ASSERT_CONVEX).unwrap();
        assert!(!c.passed);
        assert!(c.witness.is_some());
        assert!(rep.get(ASSERT_QUOTIENT).unwrap().passed);
    }

    #[test]
    fn unsupported_refinement() {
        let i = instance(&["t1"], &["x1", "x2"], &["(x1 + x1^2)*t1"], &["x2", "t1"], 4);
        let a = series(&i.u, &["(x1 + x1^2)*t1"]);
        let e = series(&i.u, &["t1"]);
        assert!(matches!(
            refine_valuation(&i.u, &i.l, &i.m, &i.q, &a, &e, &[], Placement::BelowMain),
            Err(Error::Unsupported(_))
        ));
    }
}
