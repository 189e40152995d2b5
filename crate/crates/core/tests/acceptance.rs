//! End-to-end acceptance criteria, each with its tolerance and time limit.
//! Prints one pass/fail line per criterion.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use valkit::cli::suites::{constructions, lift_family, separated_sampling, valuation_axioms, SuiteReport};
use valkit::cli::task::{parse_task_file, Overrides};
use valkit::cli::{run_tasks, TaskRecord};
use valkit::hahn_series::Universe;
use valkit::ordered_groups::{torsion_free_quotient, GammaElement, GammaSubgroup};
use valkit::presentations::{value_group_shadow, ValuedSubfieldPresentation};
use valkit::residue_algebra::{algebraically_independent_over, ResElement, ResSubfield};
use valkit::separated::{check_separated, Verdict};

type Criterion = (&'static str, Option<Duration>, fn() -> Outcome);

struct Outcome {
    ok: bool,
    detail: String,
}

fn suite_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tasks/suite")
}

fn run_file(name: &str) -> Vec<TaskRecord> {
    let text = std::fs::read_to_string(suite_dir().join(name)).expect("shipped task file");
    let file = parse_task_file(&text, &Overrides::default()).expect("shipped task file parses");
    run_tasks(&file, None)
}

fn suite_outcome(rep: SuiteReport) -> Outcome {
    Outcome {
        ok: rep.failures.is_empty(),
        detail: format!(
            "{} cases, {} checks, {} skipped, failures {:?}",
            rep.cases, rep.checks, rep.skipped, rep.failures
        ),
    }
}

fn valuation_axiom_check() -> Outcome {
    suite_outcome(valuation_axioms(10_000, 1).expect("suite runs"))
}

fn sampling_check() -> Outcome {
    let rep = separated_sampling(200, 2, 1000).expect("suite runs");
    let mut out = suite_outcome(rep.clone());
    out.ok &= rep.cases == 400;
    out
}

fn construction_check() -> Outcome {
    let rep = constructions(100, 3).expect("suite runs");
    let mut out = suite_outcome(rep.clone());
    out.ok &= rep.cases == 100;
    out
}

fn lift_check() -> Outcome {
    let rep = lift_family(50, 4).expect("suite runs");
    let mut out = suite_outcome(rep.clone());
    out.ok &= rep.cases == 50;
    out
}

fn compositum_check() -> Outcome {
    let records = run_file("compositum.json");
    let mut combos = 0;
    let mut ok = records.len() == 5;
    for r in &records {
        ok &= r.kind == "comp-verify" && r.outcome == "pass";
        ok &= r.report["mismatch_count"] == 0;
        ok &= r.report["rv_failures"].as_array().is_some_and(Vec::is_empty);
        combos += r.report["combinations"].as_u64().unwrap_or(0);
    }
    Outcome {
        ok,
        detail: format!("{} instances, {combos} combinations", records.len()),
    }
}

fn ramified_check() -> Outcome {
    let u = Universe::new(&["t"], &[]);
    let s = |e: &str| u.parse_series(e).expect("parses");
    let c = ValuedSubfieldPresentation::new("C", None, vec![s("t")], 3, u.precision()).expect("presentation");
    let l = ValuedSubfieldPresentation::new("L", Some(c.clone()), vec![s("t^(1/2)")], 3, u.precision())
        .expect("presentation");
    let half = GammaElement::from_coords(u.rank(), &[BigRational::new(1.into(), 2.into())]);
    let expected = GammaSubgroup::new(u.rank(), vec![half]).expect("subgroup");
    let shadow = value_group_shadow(&l, 3);
    let same = shadow.is_subgroup_of(&expected).unwrap() && expected.is_subgroup_of(&shadow).unwrap();
    let torsion_free = torsion_free_quotient(&l.generator_valuations(), &c.value_group()).expect("rank agrees");
    let verdict = check_separated(&[s("1"), s("t^(1/2)")], &c).expect("checks").verdict;
    Outcome {
        ok: same && !torsion_free && verdict == Verdict::SeparatedGood,
        detail: format!(
            "shadow = span{{1/2}}: {same}, torsion-free: {torsion_free}, {}",
            verdict.label()
        ),
    }
}

fn assertions_of(r: &TaskRecord) -> Vec<Value> {
    r.report["assertions"].as_array().cloned().unwrap_or_default()
}

fn refinement_check() -> Outcome {
    let records = run_file("refinement.json");
    let by_id = |id: &str| {
        records
            .iter()
            .find(|r| r.id.as_deref() == Some(id))
            .expect("shipped instance")
    };
    let mut ok = true;
    let mut detail = Vec::new();
    for id in ["r1", "r2"] {
        let r = by_id(id);
        let asserts = assertions_of(r);
        let good = r.outcome == "pass" && asserts.len() == 4 && asserts.iter().all(|a| a["passed"] == true);
        ok &= good;
        detail.push(format!("{id}: {}", r.outcome));
    }
    let neg = by_id("broken-convexity");
    let witnessed = assertions_of(neg)
        .iter()
        .any(|a| a["passed"] == false && !a["witness"].is_null());
    ok &= neg.outcome == "fail" && witnessed;
    detail.push(format!("negative control: {} (witness {witnessed})", neg.outcome));
    Outcome {
        ok,
        detail: detail.join(", "),
    }
}

fn morphism_check() -> Outcome {
    let records = run_file("morphisms.json");
    let mut ok = !records.is_empty();
    let mut verified = 0;
    for r in &records {
        ok &= r.expected == Some(true);
        if r.outcome != "pass" {
            continue;
        }
        verified += 1;
        let models = r.report["models"].as_array().cloned().unwrap_or_default();
        let names: Vec<&str> = models.iter().filter_map(|m| m["model"].as_str()).collect();
        ok &= names.len() == 2
            && names.iter().any(|n| n.starts_with("acf"))
            && names.iter().any(|n| n.starts_with("rcf"));
        for m in &models {
            ok &= m["counterexamples"].as_array().is_some_and(Vec::is_empty);
            let lambda = m["lambda"].as_array().cloned().unwrap_or_default();
            ok &= !lambda.is_empty();
        }
    }
    Outcome {
        ok,
        detail: format!("{} examples, {verified} verified under both models", records.len()),
    }
}

/// Polynomials in three variables with rational coefficients.
type Poly = BTreeMap<Vec<u32>, BigRational>;

fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = Poly::new();
    for (ea, ca) in a {
        for (eb, cb) in b {
            let e: Vec<u32> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
            let c = out.entry(e).or_insert_with(BigRational::zero);
            *c += ca * cb;
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

fn poly_one() -> Poly {
    Poly::from([(vec![0, 0, 0], BigRational::one())])
}

fn to_res(p: &Poly) -> ResElement {
    let mut out = ResElement::zero();
    for (e, c) in p {
        let mut term = ResElement::from_rational(c.clone());
        for (v, &k) in e.iter().enumerate() {
            term = &term * &ResElement::var(v).pow(k as i64).expect("nonzero");
        }
        out = &out + &term;
    }
    out
}

fn rank_of(mut rows: Vec<Vec<BigRational>>) -> usize {
    let ncols = rows.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..ncols {
        let Some(p) = (rank..rows.len()).find(|&i| !rows[i][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, p);
        for i in rank + 1..rows.len() {
            if rows[i][col].is_zero() {
                continue;
            }
            let f = &rows[i][col] / &rows[rank][col];
            let (top, bottom) = rows.split_at_mut(i);
            for (x, p) in bottom[0][col..].iter_mut().zip(&top[rank][col..]) {
                *x -= &f * p;
            }
        }
        rank += 1;
    }
    rank
}

/// Exponent vectors in `k` variables of total degree at most `d`.
fn exponents(k: usize, d: u32) -> Vec<Vec<u32>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for first in 0..=d {
        for mut rest in exponents(k - 1, d - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Searches for a nonzero polynomial of total degree at most `d` vanishing on
/// `fs`; true when none exists.
fn no_relation_up_to(fs: &[Poly], d: u32) -> bool {
    let powers: Vec<Vec<Poly>> = fs
        .iter()
        .map(|f| {
            let mut p = vec![poly_one()];
            for _ in 0..d {
                let next = poly_mul(p.last().unwrap(), f);
                p.push(next);
            }
            p
        })
        .collect();
    let cols: Vec<Poly> = exponents(fs.len(), d)
        .iter()
        .map(|alpha| {
            alpha
                .iter()
                .enumerate()
                .fold(poly_one(), |acc, (i, &a)| poly_mul(&acc, &powers[i][a as usize]))
        })
        .collect();
    let mut row_keys: Vec<Vec<u32>> = cols.iter().flat_map(|c| c.keys().cloned()).collect();
    row_keys.sort();
    row_keys.dedup();
    let rows: Vec<Vec<BigRational>> = row_keys
        .iter()
        .map(|k| {
            cols.iter()
                .map(|c| c.get(k).cloned().unwrap_or_else(BigRational::zero))
                .collect()
        })
        .collect();
    rank_of(rows) == cols.len()
}

fn small<R: Rng>(rng: &mut R) -> BigRational {
    let n = loop {
        let n = rng.gen_range(-4i64..=4);
        if n != 0 {
            break n;
        }
    };
    BigRational::new(BigInt::from(n), BigInt::from(rng.gen_range(1i64..=3)))
}

fn add_term(p: &mut Poly, e: Vec<u32>, c: BigRational) {
    let entry = p.entry(e).or_insert_with(BigRational::zero);
    *entry += c;
    p.retain(|_, c| !c.is_zero());
}

/// A random polynomial of degree at most `deg` in the variables `vars`.
fn random_poly<R: Rng>(rng: &mut R, vars: &[usize], deg: u32, terms: usize) -> Poly {
    let mut p = Poly::new();
    for _ in 0..terms {
        let mut e = vec![0u32; 3];
        let total = rng.gen_range(0..=deg);
        for _ in 0..total {
            if let Some(&v) = vars.get(rng.gen_range(0..vars.len().max(1))) {
                e[v] += 1;
            }
        }
        add_term(&mut p, e, small(rng));
    }
    p
}

/// One instance of at most three polynomials of degree at most three, with a
/// mix of independent and dependent families.
fn independence_instance<R: Rng>(rng: &mut R, kind: usize) -> Vec<Poly> {
    let mut vars = vec![0usize, 1, 2];
    for i in (1..3).rev() {
        vars.swap(i, rng.gen_range(0..=i));
    }
    let k = rng.gen_range(1..=3);
    match kind % 4 {
        // Triangular in a variable order.
        0 => (0..k)
            .map(|i| {
                let mut f = random_poly(rng, &vars[..i], 3, 2);
                let mut e = vec![0u32; 3];
                e[vars[i]] = rng.gen_range(1..=3);
                add_term(&mut f, e, small(rng));
                f
            })
            .collect(),
        // The last element is a polynomial in linear forms.
        1 => {
            let k = k.max(2);
            let mut fs: Vec<Poly> = (0..k - 1)
                .map(|_| {
                    let mut f = random_poly(rng, &vars, 1, 3);
                    let mut e = vec![0u32; 3];
                    e[vars[rng.gen_range(0..3)]] = 1;
                    add_term(&mut f, e, small(rng));
                    f
                })
                .collect();
            let mut g = Poly::new();
            for _ in 0..3 {
                let mut term = Poly::from([(vec![0, 0, 0], small(rng))]);
                for _ in 0..rng.gen_range(0..=3) {
                    term = poly_mul(&term, &fs[rng.gen_range(0..fs.len())]);
                }
                for (e, c) in term {
                    add_term(&mut g, e, c);
                }
            }
            fs.push(g);
            fs
        }
        // Two polynomials in a single variable.
        2 => (0..2).map(|_| random_poly(rng, &vars[..1], 3, 3)).collect(),
        // Unrestricted sparse polynomials.
        _ => (0..k)
            .map(|_| {
                let terms = rng.gen_range(1..=3);
                random_poly(rng, &vars, 3, terms)
            })
            .collect(),
    }
}

fn jacobian_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut agree = 0;
    let mut counts = (0, 0);
    let mut first_disagreement = None;
    for i in 0..30 {
        let fs = independence_instance(&mut rng, i);
        let elems: Vec<ResElement> = fs.iter().map(to_res).collect();
        let jacobian = algebraically_independent_over(&elems, &ResSubfield::prime());
        let bound = if fs.len() <= 2 { 6 } else { 4 };
        let oracle = no_relation_up_to(&fs, bound);
        if jacobian == oracle {
            agree += 1;
            if oracle {
                counts.0 += 1;
            } else {
                counts.1 += 1;
            }
        } else if first_disagreement.is_none() {
            first_disagreement = Some(elems.iter().map(|e| e.to_string()).collect::<Vec<_>>());
        }
    }
    Outcome {
        ok: agree == 30,
        detail: format!(
            "{agree}/30 agree ({} independent, {} dependent){}",
            counts.0,
            counts.1,
            first_disagreement
                .map(|d| format!(", first disagreement {d:?}"))
                .unwrap_or_default()
        ),
    }
}

fn run_suite_files() -> (Vec<u8>, Vec<i32>) {
    let mut files: Vec<PathBuf> = std::fs::read_dir(suite_dir())
        .expect("suite dir")
        .map(|e| e.expect("entry").path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let mut bytes = Vec::new();
    let mut codes = Vec::new();
    for f in files {
        let out = Command::new(env!("CARGO_BIN_EXE_valkit"))
            .arg("run")
            .arg(&f)
            .output()
            .expect("binary runs");
        bytes.extend_from_slice(&out.stdout);
        codes.push(out.status.code().unwrap_or(-1));
    }
    (bytes, codes)
}

fn determinism_check() -> Outcome {
    let (a, codes_a) = run_suite_files();
    let (b, codes_b) = run_suite_files();
    let identical = a == b;
    let zero = codes_a.iter().chain(&codes_b).all(|&c| c == 0);
    Outcome {
        ok: identical && zero && !a.is_empty(),
        detail: format!(
            "{} files, {} bytes, identical {identical}, exit codes {codes_a:?}",
            codes_a.len(),
            a.len()
        ),
    }
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("valuation axioms", Some(Duration::from_secs(10)), valuation_axiom_check),
        (
            "separatedness vs sampling",
            Some(Duration::from_secs(30)),
            sampling_check,
        ),
        ("constructions", Some(Duration::from_secs(30)), construction_check),
        ("separated bases lift", Some(Duration::from_secs(30)), lift_check),
        ("compositum invariants", Some(Duration::from_secs(20)), compositum_check),
        ("ramified example", Some(Duration::from_secs(1)), ramified_check),
        ("refinement", Some(Duration::from_secs(10)), refinement_check),
        ("isomorphism extension", Some(Duration::from_secs(20)), morphism_check),
        (
            "jacobian vs relation search",
            Some(Duration::from_secs(60)),
            jacobian_check,
        ),
        ("cli determinism", None, determinism_check),
    ];
    let mut failed = Vec::new();
    for (i, (name, limit, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let out = check();
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|l| elapsed <= l);
        let pass = out.ok && in_time;
        let limit_text = limit.map(|l| format!(" / {:?}", l)).unwrap_or_default();
        println!(
            "[{}] {:>2} {name}: {:.2?}{limit_text}; {}",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            elapsed,
            out.detail
        );
        if !pass {
            failed.push(name);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
