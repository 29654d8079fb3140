use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{HarnessError, Scenario, Stage};
use crate::bounds::BoundId;
use crate::hclass::CertificateReport;

/// `+inf` travels as the string `"inf"`; everything else as a number.
mod rhs_repr {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("expected number or \"inf\", got `{t}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundStatus {
    Holds,
    Violated,
    /// A hypothesis failed, so no verdict applies; `holds` still records the
    /// raw comparison.
    Inapplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundEntry {
    #[serde(with = "rhs_repr")]
    pub rhs: f64,
    pub applicable: bool,
    /// `lhs / rhs`, null when `rhs` is zero or infinite.
    pub ratio: Option<f64>,
    pub holds: bool,
    pub status: BoundStatus,
    /// `[left, middle, right]` of the Hadamard chain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<[f64; 3]>,
}

impl BoundEntry {
    pub fn new(rhs: f64, applicable: bool, ratio: Option<f64>, holds: bool) -> Self {
        let status = match (applicable, holds) {
            (false, _) => BoundStatus::Inapplicable,
            (true, true) => BoundStatus::Holds,
            (true, false) => BoundStatus::Violated,
        };
        BoundEntry {
            rhs,
            applicable,
            ratio,
            holds,
            status,
            chain: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub x: f64,
    pub lhs: f64,
    pub bounds: BTreeMap<BoundId, BoundEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum FalsifyVerdict {
    /// No evaluated point broke the bound.
    NoViolationFound,
    /// Some point broke the bound while every hypothesis held.
    Violated,
    /// The bound broke only where a hypothesis failed.
    ViolatedWithoutHypotheses,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Violation {
    pub x: f64,
    pub lhs: f64,
    #[serde(with = "rhs_repr")]
    pub rhs: f64,
    /// `lhs - rhs`
    pub excess: f64,
    pub applicable: bool,
    /// Re-running this scenario reproduces the violation.
    pub witness_scenario: Scenario,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Falsification {
    pub target: BoundId,
    pub evaluated: usize,
    /// Evaluations where every hypothesis of the target held.
    pub applicable_evaluations: usize,
    pub verdict: FalsifyVerdict,
    /// Largest `lhs / rhs` seen over finite, positive right-hand sides.
    pub max_ratio: Option<f64>,
    /// Violation with the largest excess; hypotheses-holding ones first.
    pub worst: Option<Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: Scenario,
    pub rows: Vec<Row>,
    pub preconditions: Vec<CertificateReport>,
    pub seed: u64,
    pub version: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub falsification: Option<Falsification>,
}

/// Leading CSV columns; each bound then contributes
/// `<id>_rhs, <id>_applicable, <id>_ratio, <id>_holds` in bound order.
pub const CSV_FIXED_COLUMNS: [&str; 2] = ["x", "lhs"];

const CSV_BOUND_FIELDS: [&str; 4] = ["rhs", "applicable", "ratio", "holds"];

impl Report {
    /// Some applicable bound is violated somewhere, or a falsification search
    /// found a violation with all hypotheses holding.
    pub fn has_violation(&self) -> bool {
        let in_rows = self
            .rows
            .iter()
            .flat_map(|r| r.bounds.values())
            .any(|e| e.status == BoundStatus::Violated);
        let searched = self
            .falsification
            .as_ref()
            .is_some_and(|f| f.verdict == FalsifyVerdict::Violated);
        in_rows || searched
    }

    pub fn to_json(&self) -> Result<String, HarnessError> {
        serde_json::to_string_pretty(self).map_err(|e| HarnessError::new(Stage::Output, e))
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::new(Stage::Output, e))
    }

    fn bound_columns(&self) -> Vec<BoundId> {
        let mut ids: Vec<BoundId> = self.rows.iter().flat_map(|r| r.bounds.keys().copied()).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    /// Per-x rows only; preconditions and notes stay in the JSON form.
    pub fn to_csv(&self) -> String {
        let ids = self.bound_columns();
        let mut header: Vec<String> = CSV_FIXED_COLUMNS.iter().map(|c| c.to_string()).collect();
        for id in &ids {
            header.extend(CSV_BOUND_FIELDS.iter().map(|f| format!("{id}_{f}")));
        }
        let mut out = header.join(",");
        out.push('\n');
        for row in &self.rows {
            let mut cells = vec![row.x.to_string(), row.lhs.to_string()];
            for id in &ids {
                match row.bounds.get(id) {
                    Some(e) => cells.extend([
                        if e.rhs == f64::INFINITY { "inf".into() } else { e.rhs.to_string() },
                        e.applicable.to_string(),
                        e.ratio.map(|r| r.to_string()).unwrap_or_default(),
                        e.holds.to_string(),
                    ]),
                    None => cells.extend(std::iter::repeat_n(String::new(), CSV_BOUND_FIELDS.len())),
                }
            }
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Short human-readable summary.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let _ = writeln!(out, "x={} lhs={}", row.x, row.lhs);
            for (id, e) in &row.bounds {
                let rhs = if e.rhs == f64::INFINITY { "inf".to_string() } else { e.rhs.to_string() };
                let _ = writeln!(
                    out,
                    "  {id}: rhs={rhs} {} applicable={}",
                    if e.holds { "holds" } else { "violated" },
                    e.applicable
                );
            }
        }
        if let Some(f) = &self.falsification {
            let _ = writeln!(out, "falsify {}: {:?} after {} evaluations", f.target, f.verdict, f.evaluated);
            if let Some(w) = &f.worst {
                let _ = writeln!(out, "  worst: x={} lhs={} rhs={} applicable={}", w.x, w.lhs, w.rhs, w.applicable);
            }
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }
}
