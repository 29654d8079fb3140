use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::report::{BoundEntry, Falsification, FalsifyVerdict, Report, Row, Violation};
use super::{HarnessError, Scenario, Stage, XPolicy, VERSION};
use crate::bounds::{BoundEngine, BoundId, BoundValue};
use crate::hclass::HKind;
use crate::scalar::linspace;

/// x-points per parameter draw in a ranged falsification search.
const POINTS_PER_DRAW: usize = 32;

fn push_unique(notes: &mut Vec<String>, new: impl IntoIterator<Item = String>) {
    for n in new {
        if !notes.contains(&n) {
            notes.push(n);
        }
    }
}

struct Evaluator<'s> {
    scenario: &'s Scenario,
    engine: BoundEngine,
}

impl<'s> Evaluator<'s> {
    fn new(scenario: &'s Scenario) -> Result<Self, HarnessError> {
        let inst = scenario.instance()?;
        Ok(Evaluator {
            scenario,
            engine: BoundEngine::new(inst),
        })
    }

    fn lhs(&self, x: f64) -> Result<f64, HarnessError> {
        self.engine
            .lhs_at(x)
            .map_err(|e| HarnessError::new(Stage::Evaluate, format!("lhs at x = {x}: {e}")))
    }

    fn bound(&self, id: BoundId, x: f64) -> Result<BoundValue, HarnessError> {
        let err = |e| HarnessError::new(Stage::Evaluate, format!("{id} at x = {x}: {e}"));
        match id {
            BoundId::Thm2 => self
                .engine
                .thm2_with(x, self.scenario.multiplicativity.unwrap_or_default())
                .map_err(err),
            _ => self.engine.evaluate(id, x, self.scenario.n).map_err(err),
        }
    }

    /// Entry for `id` at `x` plus the notes it produced.
    fn entry(&self, id: BoundId, x: f64, lhs: f64) -> Result<(BoundEntry, Vec<String>), HarnessError> {
        if id == BoundId::Hadamard {
            let chain = self
                .engine
                .hadamard()
                .map_err(|e| HarnessError::new(Stage::Evaluate, format!("hadamard: {e}")))?;
            let ratio = (chain.right.is_finite() && chain.right != 0.0).then(|| chain.middle / chain.right);
            let mut entry = BoundEntry::new(chain.right, chain.applicable, ratio, chain.holds());
            entry.chain = Some([chain.left, chain.middle, chain.right]);
            return Ok((entry, chain.notes));
        }
        let v = self.bound(id, x)?;
        let entry = BoundEntry::new(v.rhs, v.applicable, v.ratio(lhs), v.holds_for(lhs));
        Ok((entry, v.notes))
    }
}

/// Evaluates the left-hand side and every requested bound at each point of
/// the scenario's x policy.
pub fn run_sweep(scenario: &Scenario) -> Result<Report, HarnessError> {
    let eval = Evaluator::new(scenario)?;
    let ids = scenario.bound_ids();
    let mut notes = Vec::new();
    if ids.contains(&BoundId::Hadamard) {
        notes.push("hadamard entries compare the interval average (ratio numerator) with the chain's right end".into());
    }
    let mut rows = Vec::new();
    for x in scenario.x.points(scenario.a, scenario.b) {
        let lhs = eval.lhs(x)?;
        let mut bounds = BTreeMap::new();
        for &id in &ids {
            let (entry, n) = eval.entry(id, x, lhs)?;
            push_unique(&mut notes, n);
            bounds.insert(id, entry);
        }
        rows.push(Row { x, lhs, bounds });
    }
    Ok(Report {
        scenario: scenario.clone(),
        rows,
        preconditions: eval.engine.certificates(),
        seed: scenario.seed,
        version: VERSION.to_owned(),
        notes,
        falsification: None,
    })
}

struct Search {
    target: BoundId,
    evaluated: usize,
    applicable_evaluations: usize,
    max_ratio: Option<f64>,
    worst: Option<Violation>,
    worst_row: Option<Row>,
    worst_preconditions: Vec<crate::hclass::CertificateReport>,
}

impl Search {
    fn visit(&mut self, eval: &Evaluator, x: f64) -> Result<(), HarnessError> {
        let lhs = eval.lhs(x)?;
        let (entry, _) = eval.entry(self.target, x, lhs)?;
        self.evaluated += 1;
        if entry.applicable {
            self.applicable_evaluations += 1;
        }
        if let Some(r) = entry.ratio {
            self.max_ratio = Some(self.max_ratio.map_or(r, |m: f64| m.max(r)));
        }
        if entry.holds {
            return Ok(());
        }
        // for the hadamard chain the compared quantity is the average
        let compared = entry.chain.map_or(lhs, |c| c[1]);
        let excess = compared - entry.rhs;
        let better = match &self.worst {
            None => true,
            Some(w) => (entry.applicable, excess) > (w.applicable, w.excess),
        };
        if better {
            let mut witness = eval.scenario.clone();
            witness.x = XPolicy::Fixed(x);
            witness.bounds = vec![self.target];
            witness.ranges = Default::default();
            self.worst = Some(Violation {
                x,
                lhs: compared,
                rhs: entry.rhs,
                excess,
                applicable: entry.applicable,
                witness_scenario: witness,
            });
            self.worst_row = Some(Row {
                x,
                lhs,
                bounds: BTreeMap::from([(self.target, entry)]),
            });
            self.worst_preconditions = eval.engine.certificates();
        }
        Ok(())
    }

    fn verdict(&self) -> FalsifyVerdict {
        match &self.worst {
            None => FalsifyVerdict::NoViolationFound,
            Some(w) if w.applicable => FalsifyVerdict::Violated,
            Some(_) => FalsifyVerdict::ViolatedWithoutHypotheses,
        }
    }
}

/// Grid points then uniform random points in `[a, b]`, `count` in total.
fn search_points(a: f64, b: f64, count: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let random = count / 2;
    let mut xs = linspace(a, b, count - random);
    xs.extend((0..random).map(|_| rng.gen_range(a..=b)));
    xs
}

/// Draws one scenario from the ranges, or explains why the draw is unusable.
fn draw(base: &Scenario, rng: &mut ChaCha8Rng) -> Result<Scenario, String> {
    let r = &base.ranges;
    let mut s = base.clone();
    s.ranges = Default::default();
    let mut pick = |range: Option<super::ParamRange>| range.map(|g| if g.lo == g.hi { g.lo } else { rng.gen_range(g.lo..=g.hi) });
    if let Some(a) = pick(r.a) {
        s.a = a;
    }
    if let Some(b) = pick(r.b) {
        s.b = b;
    }
    if let Some(p) = pick(r.p) {
        s.p = Some(p);
        s.q = None;
    } else if let Some(q) = pick(r.q) {
        s.q = Some(q);
        s.p = None;
    }
    if let Some(v) = pick(r.s) {
        s.h = "t^s".into();
        s.s = Some(v);
    }
    if let Some(n) = pick(r.n) {
        let n = n.round().max(2.0) as u32;
        s.n = Some(n);
        if s.h.trim().starts_with("t^n:") {
            s.h = format!("t^n:{n}");
        }
    }
    if !(s.a < s.b) {
        return Err(format!("drew a = {} >= b = {}", s.a, s.b));
    }
    if let XPolicy::Fixed(x) = s.x {
        if !(s.a..=s.b).contains(&x) {
            s.x = XPolicy::Midpoint;
        }
    }
    Ok(s)
}

/// Searches grid and random points (and, when the scenario has ranges,
/// random parameter draws) for a point where `target` fails. Hypothesis
/// failures do not stop the search; they are recorded with the violation.
pub fn run_falsify(scenario: &Scenario, target: BoundId) -> Result<Report, HarnessError> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut search = Search {
        target,
        evaluated: 0,
        applicable_evaluations: 0,
        max_ratio: None,
        worst: None,
        worst_row: None,
        worst_preconditions: Vec::new(),
    };
    let mut notes = Vec::new();

    let preconditions = if scenario.ranges.is_empty() {
        let eval = Evaluator::new(scenario)?;
        for x in search_points(scenario.a, scenario.b, scenario.budget, &mut rng) {
            search.visit(&eval, x)?;
        }
        eval.engine.certificates()
    } else {
        let draws = scenario.budget.div_ceil(POINTS_PER_DRAW);
        let mut skipped = 0usize;
        for i in 0..draws {
            let count = POINTS_PER_DRAW.min(scenario.budget - i * POINTS_PER_DRAW);
            let variant = match draw(scenario, &mut rng) {
                Ok(v) => v,
                Err(_) => {
                    skipped += 1;
                    continue;
                }
            };
            let eval = match Evaluator::new(&variant) {
                Ok(e) => e,
                Err(_) => {
                    skipped += 1;
                    continue;
                }
            };
            for x in search_points(variant.a, variant.b, count, &mut rng) {
                // a draw whose bound cannot be evaluated is skipped as a whole
                if search.visit(&eval, x).is_err() {
                    skipped += 1;
                    break;
                }
            }
        }
        if skipped > 0 {
            notes.push(format!("{skipped} of {draws} parameter draws were outside the problem's domain and skipped"));
        }
        std::mem::take(&mut search.worst_preconditions)
    };

    if let Some(HKind::IntegerPower(_)) = scenario.h_spec().ok().map(|h| h.kind().clone()) {
        if target != BoundId::Cor23 {
            notes.push("h(t) = t^n fails h(t) >= t on (0, 1); bounds relying on it are reported as inapplicable".into());
        }
    }
    let falsification = Falsification {
        target,
        evaluated: search.evaluated,
        applicable_evaluations: search.applicable_evaluations,
        verdict: search.verdict(),
        max_ratio: search.max_ratio,
        worst: search.worst.take(),
    };
    Ok(Report {
        scenario: scenario.clone(),
        rows: search.worst_row.take().into_iter().collect(),
        preconditions,
        seed: scenario.seed,
        version: VERSION.to_owned(),
        notes,
        falsification: Some(falsification),
    })
}
