use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{HarnessError, Stage};
use crate::bounds::{BoundId, Multiplicativity, ProblemInstance};
use crate::expr;
use crate::hclass::{HSpec, Sampling, DEFAULT_BUDGET};
use crate::scalar::linspace;

/// Which evaluation points a sweep visits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XPolicy {
    Fixed(f64),
    Grid(usize),
    Midpoint,
    Endpoints,
}

impl XPolicy {
    /// Points in `[a, b]`, ascending and deduplicated.
    pub fn points(&self, a: f64, b: f64) -> Vec<f64> {
        let mut xs = match *self {
            XPolicy::Fixed(x) => vec![x],
            XPolicy::Grid(n) => linspace(a, b, n),
            XPolicy::Midpoint => vec![0.5 * (a + b)],
            XPolicy::Endpoints => vec![a, b],
        };
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs
    }
}

impl fmt::Display for XPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            XPolicy::Fixed(x) => write!(f, "fixed:{x}"),
            XPolicy::Grid(n) => write!(f, "grid:{n}"),
            XPolicy::Midpoint => f.write_str("midpoint"),
            XPolicy::Endpoints => f.write_str("endpoints"),
        }
    }
}

impl FromStr for XPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "midpoint" => return Ok(XPolicy::Midpoint),
            "endpoints" => return Ok(XPolicy::Endpoints),
            _ => {}
        }
        if let Some(v) = s.strip_prefix("fixed:") {
            return v
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(XPolicy::Fixed)
                .ok_or_else(|| format!("bad fixed point `{v}`"));
        }
        if let Some(v) = s.strip_prefix("grid:") {
            return match v.trim().parse::<usize>() {
                Ok(n) if n >= 1 => Ok(XPolicy::Grid(n)),
                _ => Err(format!("grid needs a positive count, got `{v}`")),
            };
        }
        Err(format!("unknown x policy `{s}`; expected fixed:<x>, grid:<n>, midpoint or endpoints"))
    }
}

impl Serialize for XPolicy {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for XPolicy {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Closed interval `[lo, hi]` a falsification search may draw from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamRange {
    pub lo: f64,
    pub hi: f64,
}

impl ParamRange {
    fn validate(&self, name: &str) -> Result<(), HarnessError> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi) {
            return Err(HarnessError::new(
                Stage::Scenario,
                format!("range {name} = [{}, {}] must be finite with lo <= hi", self.lo, self.hi),
            ));
        }
        Ok(())
    }
}

/// Parameter ranges for falsification. Absent entries stay fixed at the
/// scenario's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ranges {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<ParamRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<ParamRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<ParamRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<ParamRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<ParamRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<ParamRange>,
}

impl Ranges {
    pub fn is_empty(&self) -> bool {
        *self == Ranges::default()
    }
}

fn default_x() -> XPolicy {
    XPolicy::Grid(11)
}

fn default_seed() -> u64 {
    42
}

fn default_budget() -> usize {
    DEFAULT_BUDGET
}

/// One problem plus how to sweep it. Serialized as a single JSON object;
/// scenario files hold one per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct Scenario {
    pub f: String,
    pub a: f64,
    pub b: f64,
    pub h: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    /// Bound on `|f'|`; estimated (heuristically) when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    /// Exponent of `h(t) = t^s` when `h` is the bare string `t^s`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    /// Exponent of `h(t) = t^n` for `cor23`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(default = "default_x")]
    pub x: XPolicy,
    /// Empty means every bound the given exponents allow.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bounds: Vec<BoundId>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Number of evaluations a falsification search may spend.
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// Samples per hypothesis check.
    #[serde(default = "default_budget")]
    pub check_budget: usize,
    /// Domain `J` for super-additivity and multiplicativity checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiplicativity: Option<Multiplicativity>,
    #[serde(default, skip_serializing_if = "Ranges::is_empty")]
    pub ranges: Ranges,
}

impl Scenario {
    /// Minimal scenario with defaults for everything but the problem.
    pub fn new(f: impl Into<String>, a: f64, b: f64, h: impl Into<String>) -> Self {
        Scenario {
            f: f.into(),
            a,
            b,
            h: h.into(),
            p: None,
            q: None,
            m: None,
            s: None,
            n: None,
            x: default_x(),
            bounds: Vec::new(),
            seed: default_seed(),
            budget: default_budget(),
            check_budget: default_budget(),
            j: None,
            multiplicativity: None,
            ranges: Ranges::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::new(Stage::Scenario, e))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("scenario serializes")
    }

    pub fn sampling(&self) -> Sampling {
        Sampling::new(self.check_budget, self.seed)
    }

    pub fn h_spec(&self) -> Result<HSpec, HarnessError> {
        let h = self.h.trim();
        match (h, self.s) {
            ("t^s", Some(s)) => HSpec::power(s).map_err(|e| HarnessError::new(Stage::Parse, e)),
            ("t^s", None) => Err(HarnessError::new(Stage::Scenario, "h = t^s needs s")),
            _ => h.parse().map_err(|e| HarnessError::new(Stage::Parse, e)),
        }
    }

    /// Requested bounds, or the default set when none were named.
    pub fn bound_ids(&self) -> Vec<BoundId> {
        let mut ids = if self.bounds.is_empty() {
            let mut ids = vec![BoundId::Classical, BoundId::Thm2];
            if self.p.is_some() || self.q.is_some_and(|q| q > 1.0) {
                ids.extend([BoundId::Thm3, BoundId::Thm5]);
            }
            if self.q.is_some() || self.p.is_some() {
                ids.push(BoundId::Thm4);
            }
            if self.n.is_some() && ids.contains(&BoundId::Thm3) {
                ids.push(BoundId::Cor23);
            }
            ids
        } else {
            self.bounds.clone()
        };
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::new(Stage::Scenario, m));
        if !(self.a.is_finite() && self.b.is_finite() && self.a < self.b) {
            return bad(format!("need finite a < b, got [{}, {}]", self.a, self.b));
        }
        if let XPolicy::Fixed(x) = self.x {
            if !(self.a..=self.b).contains(&x) {
                return bad(format!("fixed x = {x} outside [{}, {}]", self.a, self.b));
            }
        }
        if self.budget == 0 || self.check_budget == 0 {
            return bad("budget and checkBudget must be at least 1".into());
        }
        if self.s.is_some() && self.h.trim() != "t^s" {
            return bad(format!("s is only used with h = t^s, got h = {}", self.h));
        }
        for id in self.bound_ids() {
            let needs_pq = matches!(id, BoundId::Thm3 | BoundId::Thm5 | BoundId::Cor23);
            if needs_pq && self.p.is_none() && !self.q.is_some_and(|q| q > 1.0) {
                return bad(format!("{id} needs p (or q > 1)"));
            }
            if id == BoundId::Thm4 && self.p.is_none() && self.q.is_none() {
                return bad("thm4 needs q (or p)".into());
            }
        }
        let r = &self.ranges;
        for (name, range) in [("a", r.a), ("b", r.b), ("p", r.p), ("q", r.q), ("s", r.s), ("n", r.n)] {
            if let Some(range) = range {
                range.validate(name)?;
            }
        }
        Ok(())
    }

    /// The problem this scenario describes, evaluated at `a`.
    pub fn instance(&self) -> Result<ProblemInstance, HarnessError> {
        self.validate()?;
        let f = expr::parse(&self.f).map_err(|e| HarnessError::new(Stage::Parse, format!("f: {e}")))?;
        let h = self.h_spec()?;
        let stage = |e: crate::bounds::BoundError| HarnessError::new(Stage::Instance, e);
        let mut inst = ProblemInstance::new(f, self.a, self.b, self.a, h)
            .map_err(stage)?
            .with_sampling(self.sampling());
        inst = match (self.p, self.q) {
            (Some(p), Some(q)) => inst.with_exponents(p, q),
            (Some(p), None) => inst.with_p(p),
            (None, Some(q)) => inst.with_q(q),
            (None, None) => Ok(inst),
        }
        .map_err(stage)?;
        if let Some([lo, hi]) = self.j {
            inst = inst.with_j(lo, hi).map_err(stage)?;
        }
        if let Some(m) = self.m {
            inst = inst.with_m(m).map_err(stage)?;
            for x in self.x.points(self.a, self.b) {
                inst.at(x).map_err(stage)?;
            }
        } else {
            inst = inst.with_estimated_m().map_err(stage)?;
        }
        Ok(inst)
    }
}

/// Reads one scenario per nonblank line.
pub fn parse_scenarios(text: &str) -> Result<Vec<Scenario>, HarnessError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            Scenario::from_json(l).map_err(|e| HarnessError::new(Stage::Scenario, format!("line {}: {}", i + 1, e.message)))
        })
        .collect()
}
