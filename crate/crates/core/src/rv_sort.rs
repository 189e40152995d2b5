//! The RV sort as leading data `(γ, c)`: multiplication, partial addition,
//! n-th power coset predicates with coset tables, and RV-independence.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hahn_series::{HahnSeries, Universe};
use crate::ordered_groups::{q_basis_mod, GammaElement, Rational};
use crate::presentations::{value_group_shadow, ValuedSubfieldPresentation};
use crate::residue_algebra::{algebraically_independent_over, transcendence_degree, ResElement};

/// Leading datum of a nonzero series: valuation and leading coefficient.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RvElement {
    gamma: GammaElement,
    coeff: ResElement,
}

impl RvElement {
    /// Panics on a zero coefficient; use [`RvElement::try_new`] for
    /// unchecked input.
    pub fn new(gamma: GammaElement, coeff: ResElement) -> Self {
        assert!(!coeff.is_zero(), "RV coefficient must be nonzero");
        RvElement { gamma, coeff }
    }

    pub fn try_new(gamma: GammaElement, coeff: ResElement) -> Result<Self> {
        if coeff.is_zero() {
            return Err(Error::Invalid("RV coefficient must be nonzero".into()));
        }
        Ok(RvElement { gamma, coeff })
    }

    pub fn one(rank: (usize, usize)) -> Self {
        RvElement::new(GammaElement::zero(rank), ResElement::one())
    }

    pub fn gamma(&self) -> &GammaElement {
        &self.gamma
    }

    pub fn coeff(&self) -> &ResElement {
        &self.coeff
    }

    /// Whether the element lies in the residue fiber `RV_0 = k^×`.
    pub fn in_residue_fiber(&self) -> bool {
        self.gamma.is_zero()
    }

    pub fn mul(&self, other: &RvElement) -> RvElement {
        RvElement {
            gamma: &self.gamma + &other.gamma,
            coeff: &self.coeff * &other.coeff,
        }
    }

    pub fn inverse(&self) -> RvElement {
        RvElement {
            gamma: -&self.gamma,
            coeff: self.coeff.inverse().expect("nonzero"),
        }
    }

    pub fn pow(&self, k: i64) -> RvElement {
        RvElement {
            gamma: self.gamma.scale_int(k),
            coeff: self.coeff.pow(k).expect("nonzero"),
        }
    }

    pub fn to_json(&self, u: &Universe) -> serde_json::Value {
        serde_json::json!({"gamma": self.gamma, "coeff": u.fmt_res(&self.coeff)})
    }

    pub fn from_json(u: &Universe, v: &serde_json::Value) -> Result<Self> {
        let gamma: GammaElement = serde_json::from_value(v.get("gamma").cloned().unwrap_or_default())
            .map_err(|e| Error::Invalid(format!("RV element: {e}")))?;
        gamma.check_rank(u.rank())?;
        let coeff = v
            .get("coeff")
            .and_then(|c| c.as_str())
            .ok_or_else(|| Error::Invalid("RV element: missing coeff".into()))?;
        RvElement::try_new(gamma, u.parse_res(coeff)?)
    }
}

impl fmt::Display for RvElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.gamma, self.coeff)
    }
}

/// Result of adding leading data.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RvSum {
    Value(RvElement),
    /// Equal valuations with cancelling coefficients: the sum's leading
    /// datum is not determined by the summands' leading data.
    Collision,
}

pub fn rv_try_add(a: &RvElement, b: &RvElement) -> RvSum {
    match a.gamma.cmp(&b.gamma) {
        Ordering::Less => RvSum::Value(a.clone()),
        Ordering::Greater => RvSum::Value(b.clone()),
        Ordering::Equal => {
            let c = &a.coeff + &b.coeff;
            if c.is_zero() {
                RvSum::Collision
            } else {
                RvSum::Value(RvElement::new(a.gamma.clone(), c))
            }
        }
    }
}

/// Sign convention for the real-closed residue model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SignRule {
    /// Sign of the lexicographically leading coefficient: the ordering of
    /// `Q(x)` with every variable positive and infinitely large,
    /// `x1 ≫ x2 ≫ ...`.
    Leading,
    /// Sign of the value at a rational sample point.
    Sample(Vec<Rational>),
}

/// Explicit coset data for one `n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PowerTable {
    pub representatives: Vec<RvElement>,
    /// Indices of representatives declared to lie in the residue fiber.
    pub k_representatives: Vec<usize>,
    /// `lambda[ρ]` lists index pairs `(λ, μ)`.
    pub lambda: Vec<Vec<(usize, usize)>>,
}

/// How the n-th power predicates `P_n` on RV are decided.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PowerModel {
    /// Algebraically closed residue field: `P_n(γ, c)` iff `n | γ`.
    Acf,
    /// Real closed residue field, `n = 2` only: `P_2(γ, c)` iff `2 | γ` and
    /// `c > 0`.
    Rcf(SignRule),
    /// Explicit coset representatives over a built-in membership rule.
    Table {
        base: Box<PowerModel>,
        tables: BTreeMap<u32, PowerTable>,
    },
}

/// The coset of `x` in `RV / P_n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct PowerCoset {
    pub n: u32,
    /// Canonical key: value-group coordinates mod n, followed by a sign bit
    /// for the real-closed model, or the representative index for tables.
    pub key: Vec<i64>,
    pub in_pn: bool,
}

fn integral_coords_mod(g: &GammaElement, n: u32) -> Result<Vec<i64>> {
    let n = BigInt::from(n);
    g.coords()
        .iter()
        .map(|q| {
            if !q.is_integer() {
                return Err(Error::Unsupported(format!(
                    "built-in power models need integral valuations, got {g}"
                )));
            }
            let r = q.to_integer().mod_floor(&n);
            Ok(i64::try_from(r).expect("small residue"))
        })
        .collect()
}

fn sign_of(c: &ResElement, rule: &SignRule) -> Result<Ordering> {
    match rule {
        SignRule::Leading => Ok(c.leading_sign()),
        SignRule::Sample(point) => match c.eval(point) {
            Some(v) if !v.is_zero() => Ok(if v.is_positive() {
                Ordering::Greater
            } else {
                Ordering::Less
            }),
            _ => Err(Error::Unsupported(format!(
                "sign of {c} is undefined at the sample point"
            ))),
        },
    }
}

impl PowerModel {
    pub fn name(&self) -> &'static str {
        match self {
            PowerModel::Acf => "acf",
            PowerModel::Rcf(_) => "rcf",
            PowerModel::Table { .. } => "table",
        }
    }

    /// The exponents `n` for which the model has coset data.
    pub fn supported_n(&self) -> Vec<u32> {
        match self {
            PowerModel::Acf => vec![2, 3],
            PowerModel::Rcf(_) => vec![2],
            PowerModel::Table { tables, .. } => tables.keys().copied().collect(),
        }
    }

    /// Canonical coset key in a built-in model.
    fn builtin_key(&self, x: &RvElement, n: u32) -> Result<Vec<i64>> {
        match self {
            PowerModel::Acf => integral_coords_mod(&x.gamma, n),
            PowerModel::Rcf(rule) => {
                if n != 2 {
                    return Err(Error::Unsupported(format!(
                        "the real-closed residue model only provides P_2, not P_{n}"
                    )));
                }
                let mut key = integral_coords_mod(&x.gamma, 2)?;
                key.push(i64::from(sign_of(&x.coeff, rule)? == Ordering::Less));
                Ok(key)
            }
            PowerModel::Table { base, .. } => base.builtin_key(x, n),
        }
    }

    pub fn in_pn(&self, x: &RvElement, n: u32) -> Result<bool> {
        Ok(self.builtin_key(x, n)?.iter().all(|k| *k == 0))
    }
}

pub fn power_coset_of(x: &RvElement, n: u32, model: &PowerModel) -> Result<PowerCoset> {
    if n < 2 {
        return Err(Error::Invalid("power predicates need n >= 2".into()));
    }
    match model {
        PowerModel::Table { base, tables } => {
            let table = tables
                .get(&n)
                .ok_or_else(|| Error::Unsupported(format!("no coset table for n = {n}")))?;
            for (i, rep) in table.representatives.iter().enumerate() {
                if base.in_pn(&x.mul(&rep.inverse()), n)? {
                    return Ok(PowerCoset {
                        n,
                        key: vec![i as i64],
                        in_pn: base.in_pn(x, n)?,
                    });
                }
            }
            Err(Error::Invalid(format!("{x} lies in no listed coset of P_{n}")))
        }
        _ => {
            let key = model.builtin_key(x, n)?;
            let in_pn = key.iter().all(|k| *k == 0);
            Ok(PowerCoset { n, key, in_pn })
        }
    }
}

/// Representatives of all cosets of `P_n` for a built-in model over a value
/// group `Z^rank`, one per canonical key.
pub fn coset_representatives(model: &PowerModel, n: u32, rank: (usize, usize)) -> Result<Vec<RvElement>> {
    if let PowerModel::Table { tables, .. } = model {
        return tables
            .get(&n)
            .map(|t| t.representatives.clone())
            .ok_or_else(|| Error::Unsupported(format!("no coset table for n = {n}")));
    }
    let width = rank.0 + rank.1;
    let signs: Vec<i64> = match model {
        PowerModel::Rcf(SignRule::Leading) => vec![1, -1],
        PowerModel::Rcf(SignRule::Sample(_)) => vec![1, -1],
        _ => vec![1],
    };
    if let PowerModel::Rcf(_) = model {
        if n != 2 {
            return Err(Error::Unsupported(
                "the real-closed residue model only provides P_2".into(),
            ));
        }
    }
    let mut out = Vec::new();
    let total = (n as usize).pow(width as u32);
    for idx in 0..total {
        let mut coords = Vec::with_capacity(width);
        let mut rest = idx;
        for _ in 0..width {
            coords.push(Rational::from_integer(BigInt::from(rest % n as usize)));
            rest /= n as usize;
        }
        coords.reverse();
        let gamma = GammaElement::from_coords(rank, &coords);
        for &s in &signs {
            out.push(RvElement::new(gamma.clone(), ResElement::from_int(s)));
        }
    }
    Ok(out)
}

/// `Λ_{ρ,n}` over the representatives `reps`: all index pairs `(λ, μ)` with
/// `P_n(ρ⁻¹ λ⁻¹ μ⁻¹)`. For `x, y` with `P_n(λx)` and `P_n(μy)` this makes
/// `P_n(ρ⁻¹xy)` equivalent to membership of `(λ, μ)`.
pub fn lambda_table(model: &PowerModel, n: u32, reps: &[RvElement], rho: &RvElement) -> Result<Vec<(usize, usize)>> {
    let base = match model {
        PowerModel::Table { base, .. } => base.as_ref(),
        m => m,
    };
    let rho_inv = rho.inverse();
    let mut out = Vec::new();
    for (i, l) in reps.iter().enumerate() {
        for (j, m) in reps.iter().enumerate() {
            let z = rho_inv.mul(&l.inverse()).mul(&m.inverse());
            if base.in_pn(&z, n)? {
                out.push((i, j));
            }
        }
    }
    Ok(out)
}

/// Outcome of checking the `Λ`-table identity exhaustively over cosets.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LambdaReport {
    pub n: u32,
    pub cosets: usize,
    pub checked: usize,
    pub failures: Vec<String>,
    pub multiplicativity_failures: usize,
}

/// For every representative `ρ` and every pair of elements `x, y` drawn
/// from the representatives and `samples`, checks
/// `P_n(ρ⁻¹xy) ⟺ ∃ (λ, μ) ∈ Λ_{ρ,n}: P_n(λx) ∧ P_n(μy)`, and that `P_n` is
/// multiplicative.
pub fn verify_lambda_table(
    model: &PowerModel,
    n: u32,
    rank: (usize, usize),
    samples: &[RvElement],
) -> Result<LambdaReport> {
    let reps = coset_representatives(model, n, rank)?;
    let base = match model {
        PowerModel::Table { base, .. } => base.as_ref(),
        m => m,
    };
    let mut report = LambdaReport {
        n,
        cosets: reps.len(),
        ..Default::default()
    };
    if let PowerModel::Table { tables, .. } = model {
        let t = &tables[&n];
        for (i, r) in t.representatives.iter().enumerate() {
            for s in &t.representatives[i + 1..] {
                if base.in_pn(&r.mul(&s.inverse()), n)? {
                    report
                        .failures
                        .push(format!("representatives {r} and {s} share a coset"));
                }
            }
        }
        for &k in &t.k_representatives {
            if !t.representatives.get(k).is_some_and(|r| r.in_residue_fiber()) {
                report
                    .failures
                    .push(format!("k-representative {k} is not in the residue fiber"));
            }
        }
    }
    let pool: Vec<RvElement> = reps.iter().chain(samples).cloned().collect();
    let pn = |x: &RvElement| base.in_pn(x, n);
    for (ri, rho) in reps.iter().enumerate() {
        let lam = match model {
            PowerModel::Table { tables, .. } if !tables[&n].lambda.is_empty() => tables[&n].lambda[ri].clone(),
            _ => lambda_table(model, n, &reps, rho)?,
        };
        let rho_inv = rho.inverse();
        for x in &pool {
            for y in &pool {
                let lhs = pn(&rho_inv.mul(x).mul(y))?;
                let mut rhs = false;
                for &(l, m) in &lam {
                    if pn(&reps[l].mul(x))? && pn(&reps[m].mul(y))? {
                        rhs = true;
                        break;
                    }
                }
                report.checked += 1;
                if lhs != rhs {
                    report.failures.push(format!(
                        "ρ = {rho}, x = {x}, y = {y}: P_n(ρ⁻¹xy) = {lhs}, table says {rhs}"
                    ));
                }
            }
        }
    }
    for x in &pool {
        for y in &pool {
            if pn(x)? && pn(y)? && !pn(&x.mul(y))? {
                report.multiplicativity_failures += 1;
            }
        }
    }
    Ok(report)
}

#[derive(Serialize, Deserialize)]
struct TableJson {
    representatives: Vec<serde_json::Value>,
    #[serde(default)]
    k_representatives: Vec<usize>,
    #[serde(default)]
    lambda: BTreeMap<String, Vec<(usize, usize)>>,
}

impl PowerModel {
    /// `{"kind": "acf" | "rcf" | "table", ...}`. The real-closed model takes
    /// an optional `"sample_point"` (rational strings, one per residue
    /// variable); tables take `"base"` and `"tables": {"n": {...}}`.
    pub fn from_json(u: &Universe, v: &serde_json::Value) -> Result<Self> {
        let bad = |m: String| Error::Invalid(format!("power model: {m}"));
        let kind = v
            .get("kind")
            .and_then(|k| k.as_str())
            .ok_or_else(|| bad("missing kind".into()))?;
        match kind {
            "acf" => Ok(PowerModel::Acf),
            "rcf" => match v.get("sample_point") {
                None | Some(serde_json::Value::Null) => Ok(PowerModel::Rcf(SignRule::Leading)),
                Some(p) => {
                    let strs: Vec<String> = serde_json::from_value(p.clone()).map_err(|e| bad(e.to_string()))?;
                    let point = strs
                        .iter()
                        .map(|s| crate::ordered_groups::parse_rational(s))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(PowerModel::Rcf(SignRule::Sample(point)))
                }
            },
            "table" => {
                let base = match v.get("base") {
                    Some(b) if b.is_string() => PowerModel::from_json(u, &serde_json::json!({"kind": b}))?,
                    Some(b) => PowerModel::from_json(u, b)?,
                    None => PowerModel::Acf,
                };
                let raw: BTreeMap<String, TableJson> =
                    serde_json::from_value(v.get("tables").cloned().unwrap_or_default())
                        .map_err(|e| bad(e.to_string()))?;
                let mut tables = BTreeMap::new();
                for (n, t) in raw {
                    let n: u32 = n.parse().map_err(|_| bad(format!("bad n {n:?}")))?;
                    let representatives = t
                        .representatives
                        .iter()
                        .map(|r| RvElement::from_json(u, r))
                        .collect::<Result<Vec<_>>>()?;
                    let mut lambda = Vec::new();
                    if !t.lambda.is_empty() {
                        for i in 0..representatives.len() {
                            lambda.push(t.lambda.get(&i.to_string()).cloned().unwrap_or_default());
                        }
                    }
                    tables.insert(
                        n,
                        PowerTable {
                            representatives,
                            k_representatives: t.k_representatives,
                            lambda,
                        },
                    );
                }
                Ok(PowerModel::Table {
                    base: Box::new(base),
                    tables,
                })
            }
            other => Err(bad(format!("unknown kind {other:?}"))),
        }
    }
}

/// Verdict of the RV-independence test with the reason.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RvIndependence {
    pub independent: bool,
    /// Whether the three preconditions on `(a, b, e)` held.
    pub preconditions_met: bool,
    pub diagnostic: String,
}

impl RvIndependence {
    fn precondition(msg: String) -> Self {
        RvIndependence {
            independent: false,
            preconditions_met: false,
            diagnostic: msg,
        }
    }
}

/// Tests whether `(res(a_i/e_i), res(b_j))` is algebraically independent
/// over `k_M`, after checking that `v(a)` is a `Q`-basis of the `Γ_L`
/// shadow modulo `Γ_C`, that `res(b)` is a transcendence basis of `k_L`
/// over `k_C`, and that `v(a_i) = v(e_i)`.
pub fn rv_independent(
    a: &[HahnSeries],
    b: &[HahnSeries],
    e: &[HahnSeries],
    l: &ValuedSubfieldPresentation,
    m: &ValuedSubfieldPresentation,
    c: &ValuedSubfieldPresentation,
) -> Result<RvIndependence> {
    if a.len() != e.len() {
        return Ok(RvIndependence::precondition(format!(
            "a has {} entries but e has {}",
            a.len(),
            e.len()
        )));
    }
    let va: Vec<GammaElement> = a.iter().map(|x| x.valuation()).collect::<Result<_>>()?;
    let gc = value_group_shadow(c, c.degree_bound());
    let gl = value_group_shadow(l, l.degree_bound());
    let chosen = q_basis_mod(&va, &gc)?;
    let rank_l = q_basis_mod(gl.generators(), &gc)?.len();
    if chosen.len() != va.len() || rank_l != va.len() {
        return Ok(RvIndependence::precondition(format!(
            "v(a) is not a Q-basis of {gl} modulo {gc}"
        )));
    }
    let kc = c.residue_subfield();
    let kl = l.residue_subfield();
    let kl_degree = kl.vars().difference(kc.vars()).count();
    let mut rb = Vec::with_capacity(b.len());
    for x in b {
        if !x.valuation()?.is_zero() {
            return Ok(RvIndependence::precondition("some b_j has nonzero valuation".into()));
        }
        rb.push(x.residue()?);
    }
    if rb.len() != kl_degree || transcendence_degree(&rb, &kc) != kl_degree {
        return Ok(RvIndependence::precondition(format!(
            "res(b) is not a transcendence basis of k_L over k_C (degree {kl_degree})"
        )));
    }
    for (i, (x, y)) in a.iter().zip(e).enumerate() {
        if x.valuation()? != y.valuation()? {
            return Ok(RvIndependence::precondition(format!(
                "v(a_{}) != v(e_{})",
                i + 1,
                i + 1
            )));
        }
    }
    let mut elems = Vec::with_capacity(a.len() + b.len());
    for (x, y) in a.iter().zip(e) {
        elems.push(x.leading_coeff()?.checked_div(&y.leading_coeff()?)?);
    }
    elems.extend(rb);
    let km = m.residue_subfield();
    let independent = algebraically_independent_over(&elems, &km);
    let names: Vec<String> = elems.iter().map(|r| r.to_string()).collect();
    Ok(RvIndependence {
        independent,
        preconditions_met: true,
        diagnostic: if independent {
            format!("({}) algebraically independent over k_M", names.join(", "))
        } else {
            format!("({}) algebraically dependent over k_M", names.join(", "))
        },
    })
}
