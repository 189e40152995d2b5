//! Seeded property suites runnable from task files.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hahn_series::{HahnSeries, Universe};
use crate::ordered_groups::GammaElement;
use crate::presentations::ValuedSubfieldPresentation;
use crate::residue_algebra::ResElement;
use crate::sampling::{random_basis, random_series, random_triple, triple_universe};
use crate::separated::{
    check_lift, check_separated, make_separated, make_separated_trivial, sample_separatedness, separated_basis_from,
    Verdict,
};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub cases: usize,
    pub checks: usize,
    pub skipped: usize,
    pub failures: Vec<String>,
}

impl SuiteReport {
    fn new(suite: &str) -> Self {
        SuiteReport {
            suite: suite.to_string(),
            ..Default::default()
        }
    }

    fn fail(&mut self, msg: String) {
        if self.failures.len() < 10 {
            self.failures.push(msg);
        }
    }
}

pub fn run_suite(name: &str, cases: usize, seed: u64) -> Result<SuiteReport> {
    match name {
        "valuation-axioms" => valuation_axioms(cases, seed),
        "separated-sampling" => separated_sampling(cases, seed, 100),
        "constructions" => constructions(cases, seed),
        "lift-family" => lift_family(cases, seed),
        other => Err(Error::Invalid(format!("unknown suite {other:?}"))),
    }
}

/// `v(ab) = v(a) + v(b)`, the ultrametric inequality with equality for
/// distinct valuations, and the residue map as a ring homomorphism.
pub fn valuation_axioms(cases: usize, seed: u64) -> Result<SuiteReport> {
    let u = Universe::new(&["t1", "t2"], &["x1", "x2"]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SuiteReport::new("valuation-axioms");
    for _ in 0..cases {
        rep.cases += 1;
        let a = random_series(&mut rng, &u);
        let b = random_series(&mut rng, &u);
        let (va, vb) = (a.valuation()?, b.valuation()?);
        let ab = a.mul(&b)?;
        rep.checks += 1;
        if ab.valuation()? != &va + &vb {
            rep.fail(format!("v(ab) for a = {}, b = {}", u.fmt_series(&a), u.fmt_series(&b)));
        }
        let s = &a + &b;
        let min = GammaElement::min(&va, &vb).clone();
        match s.valuation() {
            Ok(vs) => {
                rep.checks += 1;
                if vs < min || (va != vb && vs != min) {
                    rep.fail(format!("v(a+b) for a = {}, b = {}", u.fmt_series(&a), u.fmt_series(&b)));
                }
            }
            Err(Error::InfiniteValuation) => {}
            Err(e) => return Err(e),
        }
        // Residues of the valuation-zero normalizations.
        let one = ResElement::one();
        let na = a.mul_monomial(&one, &(-&va));
        let nb = b.mul_monomial(&one, &(-&vb));
        let (ra, rb) = (na.residue()?, nb.residue()?);
        rep.checks += 1;
        if na.mul(&nb)?.residue()? != &ra * &rb {
            rep.fail(format!(
                "res(ab) for a = {}, b = {}",
                u.fmt_series(&a),
                u.fmt_series(&b)
            ));
        }
        let sum = &na + &nb;
        if let Ok(vs) = sum.valuation() {
            if vs.is_zero() {
                rep.checks += 1;
                if sum.residue()? != &ra + &rb {
                    rep.fail(format!(
                        "res(a+b) for a = {}, b = {}",
                        u.fmt_series(&a),
                        u.fmt_series(&b)
                    ));
                }
            }
        }
    }
    Ok(rep)
}

/// Candidate bases over trivially valued `Q` and over `Q((t))`: separated
/// verdicts survive `samples` coefficient draws, and every witness
/// re-evaluates to a strict violation.
pub fn separated_sampling(cases: usize, seed: u64, samples: usize) -> Result<SuiteReport> {
    let u = Universe::new(&["t"], &["x1"]);
    let t = u.parse_series("t")?;
    let fields = [
        ValuedSubfieldPresentation::prime("Q", u.rank(), u.precision()),
        ValuedSubfieldPresentation::new("Q((t))", None, vec![t], 3, u.precision())?,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SuiteReport::new("separated-sampling");
    for c in &fields {
        for _ in 0..cases {
            rep.cases += 1;
            let basis = random_basis(&mut rng, &u, 4);
            let report = check_separated(&basis, c)?;
            match &report.verdict {
                Verdict::SeparatedGood | Verdict::SeparatedNotGood => {
                    let s = sample_separatedness(&basis, c, samples, rng.gen())?;
                    rep.checks += s.samples;
                    if s.violations > 0 {
                        rep.fail(format!(
                            "{} refuted over {}: {}",
                            fmt_list(&u, &basis),
                            c.name(),
                            s.first_violation.unwrap_or_default()
                        ));
                    }
                }
                Verdict::NotSeparated(w) => {
                    rep.checks += 1;
                    let mut x = HahnSeries::zero(u.rank());
                    for (m, k) in basis.iter().zip(&w.coefficients) {
                        x = &x + &k.mul(m)?;
                    }
                    let strict = match x.valuation() {
                        Ok(v) => v > w.bound,
                        Err(Error::PrecisionExhausted(_)) => x.precision().cutoff().is_some_and(|cut| *cut > w.bound),
                        Err(_) => false,
                    };
                    if !strict {
                        rep.fail(format!(
                            "witness for {} over {} is not strict",
                            fmt_list(&u, &basis),
                            c.name()
                        ));
                    }
                }
                Verdict::NotIndependent => rep.skipped += 1,
            }
        }
    }
    Ok(rep)
}

/// Random four-dimensional inputs: the constructions return separated-good
/// bases with invertible change matrices.
pub fn constructions(cases: usize, seed: u64) -> Result<SuiteReport> {
    let u = Universe::new(&["t"], &["x1"]);
    let q = ValuedSubfieldPresentation::prime("Q", u.rank(), u.precision());
    let c = ValuedSubfieldPresentation::new("Q((t))", None, vec![u.parse_series("t")?], 3, u.precision())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SuiteReport::new("constructions");
    while rep.cases < cases {
        let trivial = rep.cases.is_multiple_of(2);
        let field = if trivial { &q } else { &c };
        let mut input = Vec::new();
        while input.len() < 4 {
            let v = random_basis(&mut rng, &u, 1).remove(0);
            if !input.contains(&v) {
                input.push(v);
            }
        }
        let out = if trivial {
            make_separated_trivial(&input, field)
        } else {
            make_separated(&input, field, &u.precision())
        };
        let out = match out {
            Ok(o) => o,
            Err(Error::NotIndependent) | Err(Error::PrecisionExhausted(_)) => {
                rep.skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        rep.cases += 1;
        rep.checks += 1;
        let verdict = check_separated(&out.basis, field)?.verdict;
        if verdict != Verdict::SeparatedGood || !out.is_invertible() {
            rep.fail(format!(
                "{} over {} gave {} ({})",
                fmt_list(&u, &input),
                field.name(),
                fmt_list(&u, &out.basis),
                verdict.label()
            ));
        }
    }
    Ok(rep)
}

/// Random triples passing the hypotheses: separated-good bases of `L` over
/// `C` stay separated-good over `M`.
pub fn lift_family(cases: usize, seed: u64) -> Result<SuiteReport> {
    let u = triple_universe();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SuiteReport::new("lift-family");
    for _ in 0..cases {
        let t = random_triple(&mut rng, &u, 2)?;
        let vectors: Vec<HahnSeries> = t.l.own_monomials(2)?.into_iter().map(|(_, x)| x).collect();
        let (_, construction) = separated_basis_from(&vectors, &t.c, &u.precision())?;
        rep.cases += 1;
        rep.checks += 1;
        let verdict = check_lift(&construction.basis, &t.l, &t.m, &t.c)?.verdict;
        if verdict != Verdict::SeparatedGood {
            rep.fail(format!(
                "L = {}, M = {}, C = {}: {}",
                fmt_list(&u, t.l.generators()),
                fmt_list(&u, t.m.generators()),
                fmt_list(&u, t.c.generators()),
                verdict.label()
            ));
        }
    }
    Ok(rep)
}

fn fmt_list(u: &Universe, xs: &[HahnSeries]) -> String {
    format!(
        "[{}]",
        xs.iter().map(|x| u.fmt_series(x)).collect::<Vec<_>>().join(", ")
    )
}
