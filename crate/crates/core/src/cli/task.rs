//! Task files: a universe, named presentations, an optional power model,
//! a seed and a list of tasks.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Deserialize;

use crate::error::Error;
use crate::hahn_series::{HahnSeries, Universe};
use crate::presentations::ValuedSubfieldPresentation;
use crate::rv_sort::PowerModel;

/// Where and why loading failed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoadError {
    pub location: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl LoadError {
    fn at(location: impl Into<String>, e: Error) -> Self {
        let (column, message) = match e {
            Error::Parse { column, message } => (Some(column), message),
            other => (None, other.to_string()),
        };
        LoadError {
            location: location.into(),
            line: None,
            column,
            message,
        }
    }

    fn msg(location: impl Into<String>, message: impl Into<String>) -> Self {
        LoadError {
            location: location.into(),
            line: None,
            column: None,
            message: message.into(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "error": "parse",
            "location": self.location,
            "line": self.line,
            "column": self.column,
            "message": self.message,
        })
    }
}

impl std::fmt::Display for LoadError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.location)?;
        if let Some(l) = self.line {
            write!(f, ":{l}")?;
        }
        if let Some(c) = self.column {
            write!(f, ":{c}")?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    universe: serde_json::Value,
    #[serde(default)]
    presentations: Vec<RawPresentation>,
    #[serde(default)]
    power_model: Option<serde_json::Value>,
    #[serde(default)]
    seed: Option<u64>,
    tasks: Vec<serde_json::Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPresentation {
    name: String,
    #[serde(default)]
    base: Option<String>,
    #[serde(default)]
    generators: Vec<String>,
    #[serde(default = "default_degree")]
    degree_bound: u32,
}

fn default_degree() -> u32 {
    3
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Auto,
    Trivial,
    General,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum RawTask {
    SepCheck {
        #[serde(default)]
        id: Option<String>,
        #[serde(default)]
        expect: Option<String>,
        basis: Vec<String>,
        over: String,
    },
    SepMake {
        #[serde(default)]
        id: Option<String>,
        #[serde(default)]
        expect: Option<String>,
        basis: Vec<String>,
        over: String,
        #[serde(default)]
        method: Method,
    },
    SepLift {
        #[serde(default)]
        id: Option<String>,
        #[serde(default)]
        expect: Option<String>,
        basis: Vec<String>,
        #[serde(rename = "L")]
        l: String,
        #[serde(rename = "M")]
        m: String,
        #[serde(rename = "C")]
        c: String,
    },
    CompVerify {
        #[serde(default)]
        id: Option<String>,
        #[serde(default)]
        expect: Option<String>,
        #[serde(rename = "L")]
        l: String,
        #[serde(rename = "M")]
        m: String,
        #[serde(rename = "C")]
        c: String,
        #[serde(default)]
        degree: Option<u32>,
    },
    RvIndep {
        #[serde(default)]
        id: Option<String>,
        #[serde(default)]
        expect: Option<String>,
        #[serde(rename = "L")]
        l: String,
        #[serde(rename = "M")]
        m: String,
        #[serde(rename = "C")]
        c: String,
        #[serde(default)]
        a: Vec<String>,
        #[serde(default)]
        b: Vec<String>,
        #[serde(default)]
        e: Vec<String>,
    },
    IsoExtend {
        #[serde(default)]
        id: Option<String>,
        #[serde(default)]
        expect: Option<String>,
        #[serde(rename = "L")]
        l: String,
        #[serde(rename = "M")]
        m: String,
        #[serde(rename = "C")]
        c: String,
        #[serde(default)]
        sigma: BTreeMap<String, String>,
        #[serde(default)]
        fixes: Vec<String>,
        #[serde(default)]
        degree: Option<u32>,
        #[serde(default)]
        power_models: Option<Vec<serde_json::Value>>,
    },
    ValRefine {
        #[serde(default)]
        id: Option<String>,
        #[serde(default)]
        expect: Option<String>,
        #[serde(rename = "L")]
        l: String,
        #[serde(rename = "M")]
        m: String,
        #[serde(rename = "C")]
        c: String,
        #[serde(default)]
        a: Vec<String>,
        #[serde(default)]
        b: Vec<String>,
        #[serde(default)]
        e: Vec<String>,
        #[serde(default)]
        degree: Option<u32>,
        #[serde(default)]
        placement: Option<String>,
    },
    SuiteRun {
        #[serde(default)]
        id: Option<String>,
        #[serde(default)]
        expect: Option<String>,
        suite: String,
        #[serde(default)]
        cases: Option<usize>,
    },
}

pub type Pres = Arc<ValuedSubfieldPresentation>;

/// A resolved task: names bound to presentations and expressions parsed.
#[derive(Clone, Debug)]
pub enum TaskKind {
    SepCheck {
        basis: Vec<HahnSeries>,
        over: Pres,
    },
    SepMake {
        basis: Vec<HahnSeries>,
        over: Pres,
        method: Method,
    },
    SepLift {
        basis: Vec<HahnSeries>,
        l: Pres,
        m: Pres,
        c: Pres,
    },
    CompVerify {
        l: Pres,
        m: Pres,
        c: Pres,
        degree: u32,
    },
    RvIndep {
        l: Pres,
        m: Pres,
        c: Pres,
        a: Vec<HahnSeries>,
        b: Vec<HahnSeries>,
        e: Vec<HahnSeries>,
    },
    IsoExtend {
        l: Pres,
        m: Pres,
        c: Pres,
        images: Vec<HahnSeries>,
        fixes: Vec<String>,
        degree: u32,
        models: Vec<PowerModel>,
    },
    ValRefine {
        l: Pres,
        m: Pres,
        c: Pres,
        a: Vec<HahnSeries>,
        b: Vec<HahnSeries>,
        e: Vec<HahnSeries>,
        degree: u32,
        above_main: bool,
    },
    SuiteRun {
        suite: String,
        cases: usize,
    },
}

impl TaskKind {
    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::SepCheck { .. } => "sep-check",
            TaskKind::SepMake { .. } => "sep-make",
            TaskKind::SepLift { .. } => "sep-lift",
            TaskKind::CompVerify { .. } => "comp-verify",
            TaskKind::RvIndep { .. } => "rv-indep",
            TaskKind::IsoExtend { .. } => "iso-extend",
            TaskKind::ValRefine { .. } => "val-refine",
            TaskKind::SuiteRun { .. } => "suite-run",
        }
    }

    /// Whether the task draws random numbers.
    pub fn is_randomized(&self) -> bool {
        matches!(self, TaskKind::IsoExtend { .. } | TaskKind::SuiteRun { .. })
    }
}

#[derive(Clone, Debug)]
pub struct Task {
    pub id: Option<String>,
    pub expect: Option<String>,
    pub kind: TaskKind,
}

#[derive(Clone, Debug)]
pub struct TaskFile {
    pub universe: Universe,
    pub presentations: BTreeMap<String, Pres>,
    pub power_model: Option<PowerModel>,
    pub seed: Option<u64>,
    pub tasks: Vec<Task>,
}

/// Flags that override file contents.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub degree_bound: Option<u32>,
    pub seed: Option<u64>,
}

pub const SUITES: [&str; 4] = ["valuation-axioms", "separated-sampling", "constructions", "lift-family"];

pub fn parse_task_file(text: &str, ov: &Overrides) -> Result<TaskFile, LoadError> {
    let raw: RawFile = serde_json::from_str(text).map_err(|e| LoadError {
        location: "task file".into(),
        line: Some(e.line()),
        column: Some(e.column()),
        message: e.to_string(),
    })?;
    let universe = Universe::from_json(&raw.universe).map_err(|e| LoadError::at("universe", e))?;

    let mut presentations: BTreeMap<String, Pres> = BTreeMap::new();
    for (i, p) in raw.presentations.iter().enumerate() {
        let loc = format!("presentations[{i}]");
        if presentations.contains_key(&p.name) {
            return Err(LoadError::msg(loc, format!("presentation {:?} declared twice", p.name)));
        }
        let base = match &p.base {
            Some(b) => Some(
                presentations
                    .get(b)
                    .cloned()
                    .ok_or_else(|| LoadError::msg(format!("{loc}.base"), format!("unknown presentation {b:?}")))?,
            ),
            None => None,
        };
        let gens = p
            .generators
            .iter()
            .enumerate()
            .map(|(j, g)| {
                universe
                    .parse_series(g)
                    .map_err(|e| LoadError::at(format!("{loc}.generators[{j}]"), e))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let d = ov.degree_bound.unwrap_or(p.degree_bound);
        let pres = if base.is_none() && gens.is_empty() {
            ValuedSubfieldPresentation::prime(&p.name, universe.rank(), universe.precision())
        } else {
            ValuedSubfieldPresentation::new(&p.name, base, gens, d, universe.precision())
                .map_err(|e| LoadError::at(&loc, e))?
        };
        presentations.insert(p.name.clone(), pres);
    }

    let power_model = match &raw.power_model {
        Some(v) => Some(PowerModel::from_json(&universe, v).map_err(|e| LoadError::at("power_model", e))?),
        None => None,
    };
    let seed = ov.seed.or(raw.seed);

    let mut tasks = Vec::with_capacity(raw.tasks.len());
    for (i, t) in raw.tasks.iter().enumerate() {
        let loc = format!("tasks[{i}]");
        let raw_task: RawTask = serde_json::from_value(t.clone()).map_err(|e| LoadError::msg(&loc, e.to_string()))?;
        let ctx = Ctx {
            universe: &universe,
            presentations: &presentations,
            loc: &loc,
            degree: ov.degree_bound,
        };
        let task = ctx.resolve(raw_task, power_model.as_ref())?;
        if task.kind.is_randomized() && seed.is_none() {
            return Err(LoadError::msg(&loc, "randomized task needs a seed"));
        }
        tasks.push(task);
    }
    Ok(TaskFile {
        universe,
        presentations,
        power_model,
        seed,
        tasks,
    })
}

struct Ctx<'a> {
    universe: &'a Universe,
    presentations: &'a BTreeMap<String, Pres>,
    loc: &'a str,
    degree: Option<u32>,
}

impl Ctx<'_> {
    fn pres(&self, field: &str, name: &str) -> Result<Pres, LoadError> {
        self.presentations.get(name).cloned().ok_or_else(|| {
            LoadError::msg(
                format!("{}.{field}", self.loc),
                format!("unknown presentation {name:?}"),
            )
        })
    }

    fn series(&self, field: &str, exprs: &[String]) -> Result<Vec<HahnSeries>, LoadError> {
        exprs
            .iter()
            .enumerate()
            .map(|(j, s)| {
                self.universe
                    .parse_series(s)
                    .map_err(|e| LoadError::at(format!("{}.{field}[{j}]", self.loc), e))
            })
            .collect()
    }

    fn degree(&self, given: Option<u32>, fallback: u32) -> Result<u32, LoadError> {
        let d = self.degree.or(given).unwrap_or(fallback);
        if d == 0 {
            return Err(LoadError::msg(
                format!("{}.degree", self.loc),
                "degree must be positive",
            ));
        }
        Ok(d)
    }

    fn resolve(&self, raw_task: RawTask, file_model: Option<&PowerModel>) -> Result<Task, LoadError> {
        let (id, expect, kind) = match raw_task {
            RawTask::SepCheck {
                id,
                expect,
                basis,
                over,
            } => (
                id,
                expect,
                TaskKind::SepCheck {
                    basis: self.series("basis", &basis)?,
                    over: self.pres("over", &over)?,
                },
            ),
            RawTask::SepMake {
                id,
                expect,
                basis,
                over,
                method,
            } => (
                id,
                expect,
                TaskKind::SepMake {
                    basis: self.series("basis", &basis)?,
                    over: self.pres("over", &over)?,
                    method,
                },
            ),
            RawTask::SepLift {
                id,
                expect,
                basis,
                l,
                m,
                c,
            } => (
                id,
                expect,
                TaskKind::SepLift {
                    basis: self.series("basis", &basis)?,
                    l: self.pres("L", &l)?,
                    m: self.pres("M", &m)?,
                    c: self.pres("C", &c)?,
                },
            ),
            RawTask::CompVerify {
                id,
                expect,
                l,
                m,
                c,
                degree,
            } => (
                id,
                expect,
                TaskKind::CompVerify {
                    l: self.pres("L", &l)?,
                    m: self.pres("M", &m)?,
                    c: self.pres("C", &c)?,
                    degree: self.degree(degree, 4)?,
                },
            ),
            RawTask::RvIndep {
                id,
                expect,
                l,
                m,
                c,
                a,
                b,
                e,
            } => (
                id,
                expect,
                TaskKind::RvIndep {
                    l: self.pres("L", &l)?,
                    m: self.pres("M", &m)?,
                    c: self.pres("C", &c)?,
                    a: self.series("a", &a)?,
                    b: self.series("b", &b)?,
                    e: self.series("e", &e)?,
                },
            ),
            RawTask::IsoExtend {
                id,
                expect,
                l,
                m,
                c,
                sigma,
                fixes,
                degree,
                power_models,
            } => {
                let lp = self.pres("L", &l)?;
                let mut images: Vec<HahnSeries> = lp.generators().to_vec();
                for (key, image) in &sigma {
                    let field = format!("sigma[{key:?}]");
                    let g = self
                        .universe
                        .parse_series(key)
                        .map_err(|e| LoadError::at(format!("{}.{field}", self.loc), e))?;
                    let pos = lp.generators().iter().position(|x| *x == g).ok_or_else(|| {
                        LoadError::msg(
                            format!("{}.{field}", self.loc),
                            format!("{key} is not a generator of {l}"),
                        )
                    })?;
                    images[pos] = self
                        .universe
                        .parse_series(image)
                        .map_err(|e| LoadError::at(format!("{}.{field}", self.loc), e))?;
                }
                let models = match power_models {
                    Some(list) => list
                        .iter()
                        .enumerate()
                        .map(|(j, v)| {
                            PowerModel::from_json(self.universe, v)
                                .map_err(|e| LoadError::at(format!("{}.power_models[{j}]", self.loc), e))
                        })
                        .collect::<Result<Vec<_>, _>>()?,
                    None => match file_model {
                        Some(m) => vec![m.clone()],
                        None => vec![PowerModel::Acf, PowerModel::Rcf(crate::rv_sort::SignRule::Leading)],
                    },
                };
                crate::morphisms::Fixes::parse(&fixes).map_err(|e| LoadError::at(format!("{}.fixes", self.loc), e))?;
                (
                    id,
                    expect,
                    TaskKind::IsoExtend {
                        l: lp,
                        m: self.pres("M", &m)?,
                        c: self.pres("C", &c)?,
                        images,
                        fixes,
                        degree: self.degree(degree, 3)?,
                        models,
                    },
                )
            }
            RawTask::ValRefine {
                id,
                expect,
                l,
                m,
                c,
                a,
                b,
                e,
                degree,
                placement,
            } => {
                let above_main = match placement.as_deref() {
                    None | Some("below-main") => false,
                    Some("above-main") => true,
                    Some(other) => {
                        return Err(LoadError::msg(
                            format!("{}.placement", self.loc),
                            format!("unknown placement {other:?}"),
                        ))
                    }
                };
                (
                    id,
                    expect,
                    TaskKind::ValRefine {
                        l: self.pres("L", &l)?,
                        m: self.pres("M", &m)?,
                        c: self.pres("C", &c)?,
                        a: self.series("a", &a)?,
                        b: self.series("b", &b)?,
                        e: self.series("e", &e)?,
                        degree: self.degree(degree, 4)?,
                        above_main,
                    },
                )
            }
            RawTask::SuiteRun {
                id,
                expect,
                suite,
                cases,
            } => {
                if !SUITES.contains(&suite.as_str()) {
                    return Err(LoadError::msg(
                        format!("{}.suite", self.loc),
                        format!("unknown suite {suite:?}; known: {}", SUITES.join(", ")),
                    ));
                }
                (
                    id,
                    expect,
                    TaskKind::SuiteRun {
                        suite,
                        cases: cases.unwrap_or(20),
                    },
                )
            }
        };
        Ok(Task { id, expect, kind })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{"universe": {"axes": ["t"], "residue_variables": ["x1"]},
        "presentations": [{"name": "Q"}, {"name": "C", "generators": ["t"]}],
        "tasks": [{"kind": "sep-check", "basis": ["1", "t^(1/2)"], "over": "C"}]}"#;

    #[test]
    fn loads_a_file() {
        let f = parse_task_file(BASE, &Overrides::default()).unwrap();
        assert_eq!(f.tasks.len(), 1);
        assert_eq!(f.tasks[0].kind.name(), "sep-check");
        assert!(f.presentations["Q"].generators().is_empty());
    }

    #[test]
    fn reports_locations() {
        let e = parse_task_file("{\"universe\": ", &Overrides::default()).unwrap_err();
        assert_eq!(e.line, Some(1));
        let bad = BASE.replace("t^(1/2)", "t^(1/2) +");
        let e = parse_task_file(&bad, &Overrides::default()).unwrap_err();
        assert_eq!(e.location, "tasks[0].basis[1]");
        assert_eq!(e.column, Some(10));
        let bad = BASE.replace("\"over\": \"C\"", "\"over\": \"D\"");
        let e = parse_task_file(&bad, &Overrides::default()).unwrap_err();
        assert_eq!(e.location, "tasks[0].over");
        let bad = BASE.replace("sep-check", "sep-frobnicate");
        assert!(parse_task_file(&bad, &Overrides::default()).is_err());
    }

    #[test]
    fn randomized_tasks_need_a_seed() {
        let text = BASE.replace(
            r#"{"kind": "sep-check", "basis": ["1", "t^(1/2)"], "over": "C"}"#,
            r#"{"kind": "suite-run", "suite": "constructions"}"#,
        );
        let e = parse_task_file(&text, &Overrides::default()).unwrap_err();
        assert!(e.message.contains("seed"));
        let ov = Overrides {
            seed: Some(3),
            ..Default::default()
        };
        assert!(parse_task_file(&text, &ov).is_ok());
    }
}
