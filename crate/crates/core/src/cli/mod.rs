//! Batch front end: runs task files and writes JSON-lines or text reports.
//!
//! Exit codes, by increasing severity: 0 everything verified, 1 a
//! counterexample or negative verdict, 2 a hypothesis or precondition
//! violation, 3 precision exhausted, 64 a usage or parse error. A run exits
//! with the maximum severity over its tasks. A task with an `expect` field
//! has severity 0 when its outcome equals the expectation.
//!
//! Randomized tasks draw from ChaCha8 seeded with the file's `seed` (or
//! `--seed`) plus the task index.

pub mod suites;
pub mod task;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::error::Error;
use crate::hahn_series::{HahnSeries, Universe};
use crate::morphisms::{extend_iso, refine_valuation, verify_refinement, FieldIso, Fixes, Placement};
use crate::rv_sort::rv_independent;
use crate::separated::{
    check_lift, check_separated, chosen_coefficients, compositum_sweep, for_each_combination, make_separated,
    make_separated_trivial, rv_of_combination, separated_basis_from, Verdict,
};
use task::{parse_task_file, Method, Overrides, Task, TaskFile, TaskKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_HYPOTHESIS: i32 = 2;
pub const EXIT_PRECISION: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Text,
}

#[derive(Parser, Debug)]
#[command(
    name = "valkit",
    version,
    about = "Exact valued-field computations on presented Hahn-series universes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Override every degree bound in the task file.
    #[arg(long, global = true)]
    pub degree_bound: Option<u32>,
    /// Override the task file's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run every task in the file.
    Run { taskfile: PathBuf },
    /// Separated bases.
    Sep {
        #[command(subcommand)]
        action: SepAction,
    },
    /// Compositum invariants.
    Comp {
        #[command(subcommand)]
        action: CompAction,
    },
    /// RV independence.
    Rv {
        #[command(subcommand)]
        action: RvAction,
    },
    /// Isomorphism extension.
    Iso {
        #[command(subcommand)]
        action: IsoAction,
    },
    /// Valuation refinement.
    Val {
        #[command(subcommand)]
        action: ValAction,
    },
}

#[derive(Subcommand, Debug)]
pub enum SepAction {
    /// Run the file's sep-check tasks.
    Check { taskfile: PathBuf },
    /// Run the file's sep-make tasks.
    Make { taskfile: PathBuf },
    /// Run the file's sep-lift tasks.
    Lift { taskfile: PathBuf },
}

#[derive(Subcommand, Debug)]
pub enum CompAction {
    /// Run the file's comp-verify tasks.
    Verify { taskfile: PathBuf },
}

#[derive(Subcommand, Debug)]
pub enum RvAction {
    /// Run the file's rv-indep tasks.
    Indep { taskfile: PathBuf },
}

#[derive(Subcommand, Debug)]
pub enum IsoAction {
    /// Run the file's iso-extend tasks.
    Extend { taskfile: PathBuf },
}

#[derive(Subcommand, Debug)]
pub enum ValAction {
    /// Run the file's val-refine tasks.
    Refine { taskfile: PathBuf },
}

impl Command {
    fn target(&self) -> (&PathBuf, Option<&'static str>) {
        match self {
            Command::Run { taskfile } => (taskfile, None),
            Command::Sep { action } => match action {
                SepAction::Check { taskfile } => (taskfile, Some("sep-check")),
                SepAction::Make { taskfile } => (taskfile, Some("sep-make")),
                SepAction::Lift { taskfile } => (taskfile, Some("sep-lift")),
            },
            Command::Comp {
                action: CompAction::Verify { taskfile },
            } => (taskfile, Some("comp-verify")),
            Command::Rv {
                action: RvAction::Indep { taskfile },
            } => (taskfile, Some("rv-indep")),
            Command::Iso {
                action: IsoAction::Extend { taskfile },
            } => (taskfile, Some("iso-extend")),
            Command::Val {
                action: ValAction::Refine { taskfile },
            } => (taskfile, Some("val-refine")),
        }
    }
}

/// Outcome of one task.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskRecord {
    pub index: usize,
    pub id: Option<String>,
    pub kind: &'static str,
    pub outcome: String,
    pub severity: i32,
    pub expected: Option<bool>,
    pub report: Value,
}

impl TaskRecord {
    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "task": self.index,
            "kind": self.kind,
            "outcome": self.outcome,
            "exit": self.severity,
            "report": self.report,
        });
        if let Some(id) = &self.id {
            v["id"] = json!(id);
        }
        if let Some(e) = self.expected {
            v["expected"] = json!(e);
        }
        v
    }

    fn to_text(&self) -> String {
        let name = self.id.as_deref().map_or(String::new(), |i| format!(" {i}"));
        let exp = match self.expected {
            Some(true) => " (as expected)",
            Some(false) => " (unexpected)",
            None => "",
        };
        format!(
            "[{}] {}{name}: {}{exp} -> exit {}",
            self.index, self.kind, self.outcome, self.severity
        )
    }
}

fn error_outcome(e: &Error) -> (&'static str, i32) {
    match e {
        Error::HypothesisViolation(_) => ("hypothesis-violation", EXIT_HYPOTHESIS),
        Error::Unsupported(_) => ("unsupported", EXIT_HYPOTHESIS),
        Error::NotInValuationRing => ("not-in-valuation-ring", EXIT_HYPOTHESIS),
        Error::RankMismatch { .. } => ("rank-mismatch", EXIT_HYPOTHESIS),
        Error::DivisionByZero => ("division-by-zero", EXIT_HYPOTHESIS),
        Error::InfiniteValuation => ("infinite-valuation", EXIT_HYPOTHESIS),
        Error::PrecisionExhausted(_) => ("precision-exhausted", EXIT_PRECISION),
        Error::NotIndependent => ("not-independent", EXIT_NEGATIVE),
        Error::InternalInconsistency(_) => ("internal-inconsistency", EXIT_NEGATIVE),
        Error::Parse { .. } | Error::Invalid(_) => ("invalid", EXIT_USAGE),
    }
}

fn error_report(e: &Error) -> Value {
    match e {
        Error::HypothesisViolation(items) => json!({"error": e.to_string(), "violations": items}),
        _ => json!({"error": e.to_string()}),
    }
}

fn fmt_all(u: &Universe, xs: &[HahnSeries]) -> Vec<String> {
    xs.iter().map(|x| u.fmt_series(x)).collect()
}

fn pass_fail(ok: bool) -> (String, i32) {
    if ok {
        ("pass".into(), EXIT_OK)
    } else {
        ("fail".into(), EXIT_NEGATIVE)
    }
}

/// Runs one task, returning `(outcome, severity, report)`.
fn execute(file: &TaskFile, index: usize, task: &Task) -> crate::Result<(String, i32, Value)> {
    let u = &file.universe;
    let seed = file.seed.unwrap_or(0).wrapping_add(index as u64);
    match &task.kind {
        TaskKind::SepCheck { basis, over } => {
            let rep = check_separated(basis, over)?;
            let sev = if rep.verdict.is_separated() {
                EXIT_OK
            } else {
                EXIT_NEGATIVE
            };
            let mut v = rep.to_json(u);
            v["over"] = json!(over.name());
            Ok((rep.verdict.label().to_string(), sev, v))
        }
        TaskKind::SepMake { basis, over, method } => {
            let trivial = match method {
                Method::Auto => over.is_trivially_valued(),
                Method::Trivial => true,
                Method::General => false,
            };
            let out = if trivial {
                make_separated_trivial(basis, over)?
            } else {
                make_separated(basis, over, &u.precision())?
            };
            let verdict = check_separated(&out.basis, over)?.verdict;
            let mut v = out.to_json(u);
            v["method"] = json!(if trivial { "trivial" } else { "general" });
            v["verdict"] = json!(verdict.label());
            v["invertible"] = json!(out.is_invertible());
            let ok = verdict == Verdict::SeparatedGood && out.is_invertible();
            let (o, s) = pass_fail(ok);
            Ok((o, s, v))
        }
        TaskKind::SepLift { basis, l, m, c } => {
            let rep = check_lift(basis, l, m, c)?;
            let sev = if rep.verdict == Verdict::SeparatedGood {
                EXIT_OK
            } else {
                EXIT_NEGATIVE
            };
            let mut v = rep.to_json(u);
            v["over"] = json!(m.name());
            Ok((rep.verdict.label().to_string(), sev, v))
        }
        TaskKind::CompVerify { l, m, c, degree } => {
            let hyp = crate::presentations::check_hypotheses(l, m, c);
            if !hyp.all_pass() {
                return Err(Error::HypothesisViolation(hyp.failures()));
            }
            let monos = l.own_monomials(*degree)?;
            let vectors: Vec<HahnSeries> = monos.iter().map(|(_, x)| x.clone()).collect();
            let (kept, construction) = separated_basis_from(&vectors, c, &u.precision())?;
            let degrees: Vec<u32> = kept.iter().map(|&k| monos[k].0.iter().sum()).collect();
            let rep = compositum_sweep(&construction.basis, &degrees, m, *degree, u)?;
            let m_monos = m.monomials(*degree)?;
            let mut rv_checks = 0usize;
            let mut rv_failures: Vec<String> = Vec::new();
            for_each_combination(&degrees, &m_monos, *degree, &mut |choice| {
                if choice.iter().all(Option::is_none) {
                    return Ok(());
                }
                rv_checks += 1;
                let coeffs = chosen_coefficients(choice, &m_monos, u.rank());
                match rv_of_combination(&construction.basis, &coeffs) {
                    Ok(_) => Ok(()),
                    Err(Error::InternalInconsistency(msg)) => {
                        if rv_failures.len() < 5 {
                            rv_failures.push(msg);
                        }
                        Ok(())
                    }
                    Err(e) => Err(e),
                }
            })?;
            let ok = rep.mismatches.is_empty() && rv_failures.is_empty();
            let v = json!({
                "basis": fmt_all(u, &construction.basis),
                "combinations": rep.checked,
                "residue_checks": rep.residue_checks,
                "mismatches": rep.mismatches.iter().take(5).collect::<Vec<_>>(),
                "mismatch_count": rep.mismatches.len(),
                "rv_checks": rv_checks,
                "rv_failures": rv_failures,
            });
            let (o, s) = pass_fail(ok);
            Ok((o, s, v))
        }
        TaskKind::RvIndep { l, m, c, a, b, e } => {
            let rep = rv_independent(a, b, e, l, m, c)?;
            let (o, s) = match (rep.preconditions_met, rep.independent) {
                (false, _) => ("precondition-failed", EXIT_HYPOTHESIS),
                (true, true) => ("independent", EXIT_OK),
                (true, false) => ("dependent", EXIT_NEGATIVE),
            };
            Ok((o.into(), s, serde_json::to_value(&rep).expect("serializable")))
        }
        TaskKind::IsoExtend {
            l,
            m,
            c,
            images,
            fixes,
            degree,
            models,
        } => {
            let sigma = FieldIso::new(l.clone(), images.clone(), Fixes::parse(fixes)?)?;
            let mut per_model = Vec::new();
            let mut ok = true;
            for model in models {
                let rep = extend_iso(&sigma, m, c, *degree, Some(model), seed)?;
                ok &= rep.passed();
                per_model.push(json!({
                    "model": model.name(),
                    "elements": rep.elements,
                    "separated_basis": rep.separated_basis,
                    "image_basis_verdict": rep.image_basis_verdict,
                    "valuation_checks": rep.valuation_checks,
                    "residue_checks": rep.residue_checks,
                    "rv_checks": rep.rv_checks,
                    "rv_flagged": rep.rv_flagged,
                    "coset_checks": rep.coset_checks,
                    "coset_flagged": rep.coset_flagged,
                    "hom_checks": rep.hom_checks,
                    "relations": rep.relations,
                    "lambda": rep.lambda,
                    "counterexamples": rep.counterexamples,
                    "flagged": rep.flagged.iter().take(3).collect::<Vec<_>>(),
                }));
            }
            let v = json!({
                "images": fmt_all(u, images),
                "fixes": fixes,
                "degree": degree,
                "models": per_model,
            });
            let (o, s) = pass_fail(ok);
            Ok((o, s, v))
        }
        TaskKind::ValRefine {
            l,
            m,
            c,
            a,
            b,
            e,
            degree,
            above_main,
        } => {
            let placement = if *above_main {
                Placement::AboveMain
            } else {
                Placement::BelowMain
            };
            let ru = refine_valuation(u, l, m, c, a, e, b, placement)?;
            let rep = verify_refinement(&ru, *degree)?;
            let gens: Vec<Value> = l
                .all_generators()
                .iter()
                .chain(&m.all_generators())
                .map(|g| -> crate::Result<Value> {
                    Ok(json!({"element": u.fmt_series(g), "v_refined": ru.refined_valuation(g)?}))
                })
                .collect::<crate::Result<_>>()?;
            let v = json!({
                "placement": placement,
                "refined_axes": ru.refined.axes(),
                "refined_inf_axes": ru.refined.inf_axes(),
                "demoted": ru.demoted.iter().map(|d| json!({"variable": u.var_name(d.variable), "scalar": d.scalar})).collect::<Vec<_>>(),
                "valuations": gens,
                "assertions": rep.assertions,
            });
            let (o, s) = pass_fail(rep.passed());
            Ok((o, s, v))
        }
        TaskKind::SuiteRun { suite, cases } => {
            let rep = suites::run_suite(suite, *cases, seed)?;
            let (o, s) = pass_fail(rep.failures.is_empty());
            Ok((o, s, serde_json::to_value(&rep).expect("serializable")))
        }
    }
}

/// Runs the tasks of `file` (restricted to `only` when given) in order.
pub fn run_tasks(file: &TaskFile, only: Option<&str>) -> Vec<TaskRecord> {
    let mut out = Vec::new();
    for (index, task) in file.tasks.iter().enumerate() {
        if only.is_some_and(|k| k != task.kind.name()) {
            continue;
        }
        let (outcome, severity, report) = match execute(file, index, task) {
            Ok(r) => r,
            Err(e) => {
                let (o, s) = error_outcome(&e);
                (o.to_string(), s, error_report(&e))
            }
        };
        let (severity, expected) = match &task.expect {
            Some(exp) if *exp == outcome => (EXIT_OK, Some(true)),
            Some(_) => (severity.max(EXIT_NEGATIVE), Some(false)),
            None => (severity, None),
        };
        out.push(TaskRecord {
            index,
            id: task.id.clone(),
            kind: task.kind.name(),
            outcome,
            severity,
            expected,
            report,
        });
    }
    out
}

fn summary(records: &[TaskRecord]) -> (i32, Value) {
    let exit = records.iter().map(|r| r.severity).max().unwrap_or(EXIT_OK);
    let mut counts = serde_json::Map::new();
    for r in records {
        let e = counts.entry(r.outcome.clone()).or_insert(json!(0));
        *e = json!(e.as_u64().unwrap_or(0) + 1);
    }
    (
        exit,
        json!({"summary": {"tasks": records.len(), "outcomes": counts, "exit": exit}}),
    )
}

/// Parses arguments, runs, writes the report to `out` and returns the exit
/// code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if code == EXIT_OK {
                write!(out, "{e}")
            } else {
                write!(err, "{e}")
            };
            return code;
        }
    };
    let (path, only) = cli.command.target();
    let ov = Overrides {
        degree_bound: cli.degree_bound,
        seed: cli.seed,
    };
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "cannot read {}: {e}", path.display());
            return EXIT_USAGE;
        }
    };
    let file = match parse_task_file(&text, &ov) {
        Ok(f) => f,
        Err(e) => {
            match cli.format {
                Format::Json => {
                    let _ = writeln!(out, "{}", e.to_json());
                }
                Format::Text => {
                    let _ = writeln!(out, "parse error at {e}");
                }
            }
            let _ = writeln!(err, "{}: {e}", path.display());
            return EXIT_USAGE;
        }
    };
    let records = run_tasks(&file, only);
    let (exit, sum) = summary(&records);
    for r in &records {
        let line = match cli.format {
            Format::Json => r.to_json().to_string(),
            Format::Text => r.to_text(),
        };
        let _ = writeln!(out, "{line}");
    }
    let _ = match cli.format {
        Format::Json => writeln!(out, "{sum}"),
        Format::Text => writeln!(out, "{} tasks, exit {exit}", records.len()),
    };
    exit
}
