use serde::{Deserialize, Serialize};

use super::expr;
use super::{HahnSeries, Precision};
use crate::error::{Error, Result};
use crate::ordered_groups::{format_rational, GammaElement, Rational};
use crate::residue_algebra::ResElement;

/// Environment variable holding the default cutoff on the first main axis
/// when a universe declaration does not specify one.
pub const PRECISION_ENV: &str = "VALKIT_PRECISION";

pub const DEFAULT_PRECISION: i64 = 12;

/// Declaration of the ambient Hahn-series universe: series axes (main value
/// group coordinates), infinitesimal axes, residue transcendentals and the
/// default truncation cutoff.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Universe {
    axes: Vec<String>,
    inf_axes: Vec<String>,
    variables: Vec<String>,
    cutoff: GammaElement,
}

#[derive(Serialize, Deserialize)]
struct UniverseJson {
    axes: Vec<String>,
    #[serde(default)]
    inf_axes: Vec<String>,
    #[serde(default)]
    residue_variables: Vec<String>,
    #[serde(default)]
    precision: Option<GammaElement>,
}

impl Universe {
    pub fn new(axes: &[&str], variables: &[&str]) -> Self {
        Self::with_inf(axes, &[], variables)
    }

    pub fn with_inf(axes: &[&str], inf_axes: &[&str], variables: &[&str]) -> Self {
        let rank = (axes.len(), inf_axes.len());
        Universe {
            axes: axes.iter().map(|s| s.to_string()).collect(),
            inf_axes: inf_axes.iter().map(|s| s.to_string()).collect(),
            variables: variables.iter().map(|s| s.to_string()).collect(),
            cutoff: default_cutoff(rank),
        }
    }

    /// Default names `t1..`, `d1..` and `x1..` for a bare rank.
    pub fn anonymous(rank: (usize, usize)) -> Self {
        let axes: Vec<String> = (1..=rank.0).map(|i| format!("t{i}")).collect();
        let inf: Vec<String> = (1..=rank.1).map(|i| format!("d{i}")).collect();
        Universe {
            axes,
            inf_axes: inf,
            variables: Vec::new(),
            cutoff: GammaElement::zero(rank),
        }
    }

    pub fn from_parts(
        axes: Vec<String>,
        inf_axes: Vec<String>,
        variables: Vec<String>,
        cutoff: GammaElement,
    ) -> Result<Self> {
        cutoff.check_rank((axes.len(), inf_axes.len()))?;
        if axes.is_empty() {
            return Err(Error::Invalid("a universe needs at least one series axis".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for n in axes.iter().chain(&inf_axes).chain(&variables) {
            if !seen.insert(n.as_str()) {
                return Err(Error::Invalid(format!("name {n:?} declared twice")));
            }
            if n == "O" {
                return Err(Error::Invalid("the name O is reserved".into()));
            }
        }
        Ok(Universe {
            axes,
            inf_axes,
            variables,
            cutoff,
        })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let raw: UniverseJson =
            serde_json::from_value(value.clone()).map_err(|e| Error::Invalid(format!("universe: {e}")))?;
        let rank = (raw.axes.len(), raw.inf_axes.len());
        let cutoff = raw.precision.unwrap_or_else(|| default_cutoff(rank));
        Universe::from_parts(raw.axes, raw.inf_axes, raw.residue_variables, cutoff)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(UniverseJson {
            axes: self.axes.clone(),
            inf_axes: self.inf_axes.clone(),
            residue_variables: self.variables.clone(),
            precision: Some(self.cutoff.clone()),
        })
        .expect("universe serializes")
    }

    pub fn with_cutoff(mut self, cutoff: GammaElement) -> Result<Self> {
        cutoff.check_rank(self.rank())?;
        self.cutoff = cutoff;
        Ok(self)
    }

    pub fn rank(&self) -> (usize, usize) {
        (self.axes.len(), self.inf_axes.len())
    }

    pub fn axes(&self) -> &[String] {
        &self.axes
    }

    pub fn inf_axes(&self) -> &[String] {
        &self.inf_axes
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn cutoff(&self) -> &GammaElement {
        &self.cutoff
    }

    pub fn precision(&self) -> Precision {
        Precision::Cutoff(self.cutoff.clone())
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    pub fn var_name(&self, i: usize) -> String {
        self.variables.get(i).cloned().unwrap_or_else(|| format!("x{}", i + 1))
    }

    /// Position of a named axis in the flattened coordinates.
    pub fn axis_index(&self, name: &str) -> Option<usize> {
        self.axes.iter().position(|a| a == name).or_else(|| {
            self.inf_axes
                .iter()
                .position(|a| a == name)
                .map(|i| i + self.axes.len())
        })
    }

    pub fn axis_unit(&self, name: &str) -> Option<GammaElement> {
        let idx = self.axis_index(name)?;
        let rank = self.rank();
        Some(if idx < rank.0 {
            GammaElement::main_unit(rank, idx)
        } else {
            GammaElement::inf_unit(rank, idx - rank.0)
        })
    }

    fn axis_name(&self, flat: usize) -> &str {
        if flat < self.axes.len() {
            &self.axes[flat]
        } else {
            &self.inf_axes[flat - self.axes.len()]
        }
    }

    pub fn parse_series(&self, src: &str) -> Result<HahnSeries> {
        expr::parse_series(self, src)
    }

    pub fn parse_res(&self, src: &str) -> Result<ResElement> {
        expr::parse_res(self, src)
    }

    pub fn fmt_res(&self, r: &ResElement) -> String {
        r.fmt_with(&|i| self.var_name(i))
    }

    pub fn fmt_gamma_monomial(&self, g: &GammaElement) -> String {
        let mut parts = Vec::new();
        for (i, q) in g.coords().iter().enumerate() {
            if num_traits::Zero::is_zero(q) {
                continue;
            }
            let name = self.axis_name(i);
            if num_traits::One::is_one(q) {
                parts.push(name.to_string());
            } else if q.is_integer() && q > &Rational::from_integer(0.into()) {
                parts.push(format!("{name}^{}", q.numer()));
            } else {
                parts.push(format!("{name}^({})", format_rational(q)));
            }
        }
        parts.join("*")
    }

    pub fn fmt_series(&self, s: &HahnSeries) -> String {
        let mut out = String::new();
        for (k, (e, c)) in s.terms().enumerate() {
            let mono = self.fmt_gamma_monomial(e);
            let (neg, coeff) = match c.as_rational() {
                Some(q) if q < Rational::from_integer(0.into()) => (true, ResElement::from_rational(-q)),
                _ => (false, c.clone()),
            };
            let cs = self.fmt_res(&coeff);
            let compound = cs.contains(['+', '/']) || cs[1..].contains('-');
            let body = match (coeff.is_one(), mono.is_empty()) {
                (true, true) => "1".to_string(),
                (true, false) => mono,
                (false, true) => {
                    if compound && k > 0 {
                        format!("({cs})")
                    } else {
                        cs
                    }
                }
                (false, false) => {
                    if compound || cs.starts_with('-') {
                        format!("({cs})*{mono}")
                    } else {
                        format!("{cs}*{mono}")
                    }
                }
            };
            if k == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            out.push_str(&body);
        }
        match s.precision() {
            Precision::Exact => {
                if out.is_empty() {
                    out.push('0');
                }
            }
            Precision::Cutoff(c) => {
                let mono = self.fmt_gamma_monomial(c);
                let o = if mono.is_empty() {
                    "O(1)".to_string()
                } else {
                    format!("O({mono})")
                };
                if out.is_empty() {
                    out = o;
                } else {
                    out.push_str(" + ");
                    out.push_str(&o);
                }
            }
        }
        out
    }

    /// Series JSON: `{"terms": [{"exp": Γ, "coeff": "..."}], "precision": "exact" | Γ}`.
    pub fn series_to_json(&self, s: &HahnSeries) -> serde_json::Value {
        let terms: Vec<serde_json::Value> = s
            .terms()
            .map(|(e, c)| serde_json::json!({"exp": e, "coeff": self.fmt_res(c)}))
            .collect();
        let precision = match s.precision() {
            Precision::Exact => serde_json::Value::String("exact".into()),
            Precision::Cutoff(c) => serde_json::to_value(c).expect("gamma serializes"),
        };
        serde_json::json!({"terms": terms, "precision": precision})
    }

    pub fn series_from_json(&self, v: &serde_json::Value) -> Result<HahnSeries> {
        let bad = |m: &str| Error::Invalid(format!("series JSON: {m}"));
        let terms = v
            .get("terms")
            .and_then(|t| t.as_array())
            .ok_or_else(|| bad("missing terms array"))?;
        let mut out = Vec::new();
        for t in terms {
            let exp: GammaElement =
                serde_json::from_value(t.get("exp").cloned().unwrap_or_default()).map_err(|e| bad(&e.to_string()))?;
            exp.check_rank(self.rank())?;
            let coeff = t
                .get("coeff")
                .and_then(|c| c.as_str())
                .ok_or_else(|| bad("missing coeff"))?;
            out.push((exp, self.parse_res(coeff)?));
        }
        let precision = match v.get("precision") {
            Some(serde_json::Value::String(s)) if s == "exact" => Precision::Exact,
            Some(p) => Precision::Cutoff(serde_json::from_value(p.clone()).map_err(|e| bad(&e.to_string()))?),
            None => Precision::Exact,
        };
        HahnSeries::from_terms(self.rank(), out, precision)
    }
}

/// Cutoff on the first main axis, from `VALKIT_PRECISION` or the built-in
/// default.
pub fn default_cutoff(rank: (usize, usize)) -> GammaElement {
    let p = std::env::var(PRECISION_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .filter(|&p| p > 0)
        .unwrap_or(DEFAULT_PRECISION);
    let mut g = GammaElement::zero(rank);
    if rank.0 > 0 {
        g = GammaElement::main_unit(rank, 0).scale_int(p);
    }
    g
}
