//! Catalog of h-functions and sampled checks of the class hypotheses:
//! h-convexity, h-concavity, super-additivity, super/sub-multiplicativity
//! and `h(α) ≥ α`.
//!
//! A check never proves anything. It either finds a violating input (the
//! witness, which can be replayed) or reports `holdsOnSamples`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{self, DomainError, Expr, Variable};
use crate::scalar::linspace;

/// Relative slack for every sampled comparison: `1e-10 * (1 + |rhs|)`.
pub const CHECK_TOLERANCE: f64 = 1e-10;

/// Default budget for precondition checks.
pub const DEFAULT_BUDGET: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub enum HKind {
    /// `h(t) = t`
    Identity,
    /// `h(t) = t^s`, `s ∈ (0, 1)`
    Power(f64),
    /// `h(t) = 1/t`
    Reciprocal,
    /// `h(t) = 1`
    One,
    /// `h(t) = t^n`, `n ≥ 2`
    IntegerPower(u32),
    /// `h(t) = (c + t)^(p-1)`, `c ≥ 0`
    Shifted { c: f64, p: f64 },
    Custom { expr: Expr, source: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HSpecError {
    #[error("unknown h kind `{0}`; expected t, t^s:<s>, 1/t, 1, t^n:<n>, shifted:<c>:<p> or expr:<dsl>")]
    UnknownKind(String),
    #[error("invalid number `{0}` in h spec")]
    BadNumber(String),
    #[error("h parameter out of range: {0}")]
    OutOfRange(String),
    #[error("h expression: {0}")]
    Parse(#[from] expr::ParseError),
}

/// An h-function with validated parameters. `t^s:1` normalizes to `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct HSpec {
    kind: HKind,
}

impl HSpec {
    pub fn identity() -> Self {
        HSpec {
            kind: HKind::Identity,
        }
    }

    pub fn reciprocal() -> Self {
        HSpec {
            kind: HKind::Reciprocal,
        }
    }

    pub fn one() -> Self {
        HSpec { kind: HKind::One }
    }

    pub fn power(s: f64) -> Result<Self, HSpecError> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(HSpecError::OutOfRange(format!("s = {s} not in (0, 1]")));
        }
        if s == 1.0 {
            return Ok(Self::identity());
        }
        Ok(HSpec {
            kind: HKind::Power(s),
        })
    }

    pub fn integer_power(n: u32) -> Result<Self, HSpecError> {
        if n < 2 {
            return Err(HSpecError::OutOfRange(format!("n = {n} must be at least 2")));
        }
        Ok(HSpec {
            kind: HKind::IntegerPower(n),
        })
    }

    pub fn shifted(c: f64, p: f64) -> Result<Self, HSpecError> {
        if !(c >= 0.0) || !c.is_finite() || !p.is_finite() {
            return Err(HSpecError::OutOfRange(format!(
                "shifted needs finite c >= 0 and finite p, got c = {c}, p = {p}"
            )));
        }
        Ok(HSpec {
            kind: HKind::Shifted { c, p },
        })
    }

    pub fn custom(source: &str) -> Result<Self, HSpecError> {
        let expr = expr::parse_in(source, Variable::T)?;
        Ok(HSpec {
            kind: HKind::Custom {
                expr,
                source: source.trim().to_owned(),
            },
        })
    }

    pub fn kind(&self) -> &HKind {
        &self.kind
    }

    /// Evaluates `h(t)` for `t ≥ 0`. Negative values of a custom h are
    /// reported as domain errors.
    pub fn eval(&self, t: f64) -> Result<f64, DomainError> {
        let label = || self.to_string();
        if !(t >= 0.0) {
            return Err(DomainError::new(label(), 't', t, "h is defined on [0, inf) only"));
        }
        let v = match &self.kind {
            HKind::Identity => t,
            HKind::Power(s) => t.powf(*s),
            HKind::Reciprocal => {
                if t == 0.0 {
                    return Err(DomainError::new(label(), 't', t, "division by zero"));
                }
                1.0 / t
            }
            HKind::One => 1.0,
            HKind::IntegerPower(n) => t.powi(*n as i32),
            HKind::Shifted { c, p } => {
                let base = c + t;
                if base == 0.0 && *p < 1.0 {
                    return Err(DomainError::new(label(), 't', t, "zero base with negative exponent"));
                }
                base.powf(p - 1.0)
            }
            HKind::Custom { expr, .. } => {
                let v = expr.eval(t)?;
                if v < 0.0 {
                    return Err(DomainError::new(label(), 't', t, "h must be nonnegative"));
                }
                v
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(DomainError::new(label(), 't', t, "non-finite result"))
        }
    }
}

impl fmt::Display for HSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            HKind::Identity => f.write_str("t"),
            HKind::Power(s) => write!(f, "t^s:{s}"),
            HKind::Reciprocal => f.write_str("1/t"),
            HKind::One => f.write_str("1"),
            HKind::IntegerPower(n) => write!(f, "t^n:{n}"),
            HKind::Shifted { c, p } => write!(f, "shifted:{c}:{p}"),
            HKind::Custom { source, .. } => write!(f, "expr:{source}"),
        }
    }
}

fn number(s: &str) -> Result<f64, HSpecError> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| HSpecError::BadNumber(s.to_owned()))
}

impl FromStr for HSpec {
    type Err = HSpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(src) = s.strip_prefix("expr:") {
            return HSpec::custom(src);
        }
        if let Some(rest) = s.strip_prefix("t^s:") {
            return HSpec::power(number(rest)?);
        }
        if let Some(rest) = s.strip_prefix("t^n:") {
            let n = number(rest)?;
            if n.fract() != 0.0 || !(2.0..=64.0).contains(&n) {
                return Err(HSpecError::OutOfRange(format!("n = {rest} must be an integer in [2, 64]")));
            }
            return HSpec::integer_power(n as u32);
        }
        if let Some(rest) = s.strip_prefix("shifted:") {
            let (c, p) = rest
                .split_once(':')
                .ok_or_else(|| HSpecError::UnknownKind(s.to_owned()))?;
            return HSpec::shifted(number(c)?, number(p)?);
        }
        match s {
            "t" => Ok(HSpec::identity()),
            "1/t" => Ok(HSpec::reciprocal()),
            "1" => Ok(HSpec::one()),
            _ => Err(HSpecError::UnknownKind(s.to_owned())),
        }
    }
}

impl TryFrom<String> for HSpec {
    type Error = HSpecError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<HSpec> for String {
    fn from(h: HSpec) -> String {
        h.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Property {
    /// `g(tx+(1-t)y) ≤ h(t)g(x) + h(1-t)g(y)`
    HConvex,
    /// reverse of [`Property::HConvex`]
    HConcave,
    /// `h(x+y) ≥ h(x) + h(y)`
    Superadditive,
    /// `h(xy) ≥ h(x)h(y)`
    Supermultiplicative,
    /// `h(xy) ≤ h(x)h(y)`
    Submultiplicative,
    /// `h(α) ≥ α` on `(0, 1)`
    DominatesIdentity,
    /// `g(u) ≥ 0` on `[a, b]`
    Nonnegative,
    /// `|g(u)| ≤ M` on `[a, b]`
    BoundedBy,
}

impl Property {
    /// `true` when the property reads `lhs ≤ rhs`, `false` for `lhs ≥ rhs`.
    fn expects_le(self) -> bool {
        matches!(
            self,
            Property::HConvex | Property::Submultiplicative | Property::BoundedBy
        )
    }

    fn input_names(self) -> &'static [&'static str] {
        match self {
            Property::HConvex | Property::HConcave => &["x", "y", "t"],
            Property::Superadditive | Property::Supermultiplicative | Property::Submultiplicative => {
                &["x", "y"]
            }
            Property::DominatesIdentity => &["alpha"],
            Property::Nonnegative | Property::BoundedBy => &["u"],
        }
    }

    /// Whether `(lhs, rhs)` violates the property beyond the check tolerance.
    pub fn violated_by(self, lhs: f64, rhs: f64) -> bool {
        let slack = CHECK_TOLERANCE * (1.0 + rhs.abs());
        if self.expects_le() {
            lhs - rhs > slack
        } else {
            rhs - lhs > slack
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Property::HConvex => "h-convex",
            Property::HConcave => "h-concave",
            Property::Superadditive => "superadditive",
            Property::Supermultiplicative => "supermultiplicative",
            Property::Submultiplicative => "submultiplicative",
            Property::DominatesIdentity => "dominates-identity",
            Property::Nonnegative => "nonnegative",
            Property::BoundedBy => "bounded-by",
        };
        f.write_str(s)
    }
}

impl FromStr for Property {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "h-convex" => Property::HConvex,
            "h-concave" => Property::HConcave,
            "superadditive" => Property::Superadditive,
            "supermultiplicative" => Property::Supermultiplicative,
            "submultiplicative" => Property::Submultiplicative,
            "dominates-identity" => Property::DominatesIdentity,
            "nonnegative" => Property::Nonnegative,
            "bounded-by" => Property::BoundedBy,
            other => return Err(format!("unknown property `{other}`")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Verdict {
    HoldsOnSamples,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub inputs: BTreeMap<String, f64>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub property: Property,
    /// What was checked, e.g. `|f'|^2 on [0, 1] with h = t`.
    pub subject: String,
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    pub samples: usize,
    pub seed: u64,
}

impl CertificateReport {
    pub fn holds(&self) -> bool {
        self.verdict == Verdict::HoldsOnSamples
    }

    pub fn with_subject(mut self, subject: impl Into<String>) -> Self {
        self.subject = subject.into();
        self
    }
}

/// Sample budget and seed shared by every check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sampling {
    pub budget: usize,
    pub seed: u64,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            budget: DEFAULT_BUDGET,
            seed: 42,
        }
    }
}

impl Sampling {
    pub fn new(budget: usize, seed: u64) -> Self {
        Sampling { budget, seed }
    }

    fn split(self) -> (usize, usize) {
        let random = self.budget / 2;
        (self.budget - random, random)
    }
}

/// Runs grid points first, then seeded random points, stopping at the first
/// violation. Grid shortfall is made up with extra random points.
fn run_check<S, R>(
    property: Property,
    subject: String,
    sampling: Sampling,
    grid: Vec<Vec<f64>>,
    mut random: R,
    mut sides: S,
) -> Result<CertificateReport, DomainError>
where
    S: FnMut(&[f64]) -> Result<(f64, f64), DomainError>,
    R: FnMut(&mut ChaCha8Rng) -> Option<Vec<f64>>,
{
    let (grid_budget, random_budget) = sampling.split();
    let grid_used = grid.len().min(grid_budget);
    let random_count = random_budget + (grid_budget - grid_used);
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    let mut samples = 0;

    let mut test = |point: &[f64], samples: &mut usize| -> Result<Option<Witness>, DomainError> {
        *samples += 1;
        let (lhs, rhs) = sides(point)?;
        if property.violated_by(lhs, rhs) {
            let inputs = property
                .input_names()
                .iter()
                .zip(point)
                .map(|(n, v)| ((*n).to_owned(), *v))
                .collect();
            return Ok(Some(Witness { inputs, lhs, rhs }));
        }
        Ok(None)
    };

    let mut witness = None;
    for point in grid.iter().take(grid_used) {
        witness = test(point, &mut samples)?;
        if witness.is_some() {
            break;
        }
    }
    if witness.is_none() {
        for _ in 0..random_count {
            let Some(point) = random(&mut rng) else { break };
            witness = test(&point, &mut samples)?;
            if witness.is_some() {
                break;
            }
        }
    }

    Ok(CertificateReport {
        property,
        subject,
        verdict: if witness.is_some() {
            Verdict::Violated
        } else {
            Verdict::HoldsOnSamples
        },
        witness,
        samples,
        seed: sampling.seed,
    })
}

const T_GRID: [f64; 9] = [0.5, 0.4, 0.6, 0.3, 0.7, 0.2, 0.8, 0.1, 0.9];

/// `[a, b]` nodes with both endpoints first.
fn endpoint_first(a: f64, b: f64, m: usize) -> Vec<f64> {
    let mut nodes = linspace(a, b, m.max(2));
    let last = nodes.pop().unwrap();
    nodes.insert(1, last);
    nodes
}

fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let t: f64 = rng.gen();
        if t > 0.0 {
            return t;
        }
    }
}

fn convexity_check<G>(
    property: Property,
    g: G,
    h: &HSpec,
    a: f64,
    b: f64,
    sampling: Sampling,
) -> Result<CertificateReport, DomainError>
where
    G: Fn(f64) -> Result<f64, DomainError>,
{
    let (grid_budget, _) = sampling.split();
    let m = ((grid_budget as f64 / 9.0).sqrt().floor() as usize).max(2);
    let nodes = endpoint_first(a, b, m);
    let mut grid = Vec::with_capacity(9 * m * m);
    for &t in &T_GRID {
        for &x in &nodes {
            for &y in &nodes {
                grid.push(vec![x, y, t]);
            }
        }
    }
    let random = |rng: &mut ChaCha8Rng| {
        let x = rng.gen_range(a..=b);
        let y = rng.gen_range(a..=b);
        Some(vec![x, y, open_unit(rng)])
    };
    let sides = |p: &[f64]| convexity_sides(&g, h, p[0], p[1], p[2]);
    let subject = format!("g on [{a}, {b}] with h = {h}");
    run_check(property, subject, sampling, grid, random, sides)
}

fn convexity_sides<G>(g: &G, h: &HSpec, x: f64, y: f64, t: f64) -> Result<(f64, f64), DomainError>
where
    G: Fn(f64) -> Result<f64, DomainError>,
{
    let lhs = g(t * x + (1.0 - t) * y)?;
    let rhs = h.eval(t)? * g(x)? + h.eval(1.0 - t)? * g(y)?;
    Ok((lhs, rhs))
}

/// Samples `g(tx+(1-t)y) ≤ h(t)g(x) + h(1-t)g(y)` over `[a, b]² × (0, 1)`.
/// `g` is expected to be nonnegative (callers pass `|f'|` or `|f'|^q`).
pub fn check_h_convex<G>(
    g: G,
    h: &HSpec,
    a: f64,
    b: f64,
    sampling: Sampling,
) -> Result<CertificateReport, DomainError>
where
    G: Fn(f64) -> Result<f64, DomainError>,
{
    convexity_check(Property::HConvex, g, h, a, b, sampling)
}

/// Reverse of [`check_h_convex`].
pub fn check_h_concave<G>(
    g: G,
    h: &HSpec,
    a: f64,
    b: f64,
    sampling: Sampling,
) -> Result<CertificateReport, DomainError>
where
    G: Fn(f64) -> Result<f64, DomainError>,
{
    convexity_check(Property::HConcave, g, h, a, b, sampling)
}

/// Pairs of interior-or-upper nodes of `(lo, hi]`.
fn pair_grid(lo: f64, hi: f64, m: usize, keep: impl Fn(f64, f64) -> bool) -> Vec<Vec<f64>> {
    let m = m.max(2);
    let nodes: Vec<f64> = (1..=m).map(|i| lo + (hi - lo) * i as f64 / m as f64).collect();
    let mut grid = Vec::new();
    for &x in &nodes {
        for &y in &nodes {
            if keep(x, y) {
                grid.push(vec![x, y]);
            }
        }
    }
    grid
}

fn open_lower(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    loop {
        let v = rng.gen_range(lo..=hi);
        if v > lo {
            return v;
        }
    }
}

fn check_range(lo: f64, hi: f64) {
    assert!(lo >= 0.0 && lo < hi, "J = [{lo}, {hi}] must satisfy 0 <= lo < hi");
}

/// Samples `h(x+y) ≥ h(x) + h(y)` for `x, y ∈ (lo, hi]` with `x + y ≤ hi`.
pub fn check_superadditive(
    h: &HSpec,
    lo: f64,
    hi: f64,
    sampling: Sampling,
) -> Result<CertificateReport, DomainError> {
    check_range(lo, hi);
    let (grid_budget, _) = sampling.split();
    let m = ((2.0 * grid_budget as f64).sqrt().floor() as usize).max(2);
    let grid = pair_grid(lo, hi, m, |x, y| x + y <= hi);
    let random = |rng: &mut ChaCha8Rng| {
        if hi - lo <= lo {
            return None;
        }
        let x = open_lower(rng, lo, hi - lo);
        let y = open_lower(rng, lo, hi - x);
        Some(vec![x, y])
    };
    let sides = |p: &[f64]| Ok((h.eval(p[0] + p[1])?, h.eval(p[0])? + h.eval(p[1])?));
    let subject = format!("h = {h} on J = [{lo}, {hi}]");
    run_check(Property::Superadditive, subject, sampling, grid, random, sides)
}

fn multiplicative_check(
    property: Property,
    h: &HSpec,
    lo: f64,
    hi: f64,
    sampling: Sampling,
) -> Result<CertificateReport, DomainError> {
    check_range(lo, hi);
    let (grid_budget, _) = sampling.split();
    let m = ((grid_budget as f64).sqrt().floor() as usize).max(2);
    let inside = move |x: f64, y: f64| {
        let p = x * y;
        p > lo && p <= hi
    };
    let grid = pair_grid(lo, hi, m, inside);
    let random = move |rng: &mut ChaCha8Rng| {
        for _ in 0..64 {
            let x = open_lower(rng, lo, hi);
            let y = open_lower(rng, lo, hi);
            if inside(x, y) {
                return Some(vec![x, y]);
            }
        }
        None
    };
    let sides = |p: &[f64]| Ok((h.eval(p[0] * p[1])?, h.eval(p[0])? * h.eval(p[1])?));
    let subject = format!("h = {h} on J = [{lo}, {hi}]");
    run_check(property, subject, sampling, grid, random, sides)
}

/// Samples `h(xy) ≥ h(x)h(y)` for `x, y ∈ (lo, hi]` with `xy ∈ (lo, hi]`.
pub fn check_supermultiplicative(
    h: &HSpec,
    lo: f64,
    hi: f64,
    sampling: Sampling,
) -> Result<CertificateReport, DomainError> {
    multiplicative_check(Property::Supermultiplicative, h, lo, hi, sampling)
}

/// Samples `h(xy) ≤ h(x)h(y)`, the reverse of [`check_supermultiplicative`].
pub fn check_submultiplicative(
    h: &HSpec,
    lo: f64,
    hi: f64,
    sampling: Sampling,
) -> Result<CertificateReport, DomainError> {
    multiplicative_check(Property::Submultiplicative, h, lo, hi, sampling)
}

/// Samples `h(α) ≥ α` for `α ∈ (0, 1)`. The grid is `i / 2K`, visited from
/// `1/2` outward.
pub fn check_dominates_identity(h: &HSpec, sampling: Sampling) -> Result<CertificateReport, DomainError> {
    let (grid_budget, _) = sampling.split();
    let k = grid_budget.div_ceil(2);
    let mut grid: Vec<Vec<f64>> = (1..2 * k).map(|i| vec![i as f64 / (2 * k) as f64]).collect();
    grid.sort_by(|p, q| {
        (p[0] - 0.5)
            .abs()
            .total_cmp(&(q[0] - 0.5).abs())
            .then(p[0].total_cmp(&q[0]))
    });
    let random = |rng: &mut ChaCha8Rng| Some(vec![open_unit(rng)]);
    let sides = |p: &[f64]| Ok((h.eval(p[0])?, p[0]));
    run_check(
        Property::DominatesIdentity,
        format!("h = {h} on (0, 1)"),
        sampling,
        grid,
        random,
        sides,
    )
}

fn pointwise_grid(a: f64, b: f64, sampling: Sampling) -> Vec<Vec<f64>> {
    let (grid_budget, _) = sampling.split();
    endpoint_first(a, b, grid_budget).into_iter().map(|u| vec![u]).collect()
}

/// Samples `g(u) ≥ 0` on `[a, b]`.
pub fn check_nonnegative<G>(g: G, a: f64, b: f64, sampling: Sampling) -> Result<CertificateReport, DomainError>
where
    G: Fn(f64) -> Result<f64, DomainError>,
{
    let random = |rng: &mut ChaCha8Rng| Some(vec![rng.gen_range(a..=b)]);
    let sides = |p: &[f64]| Ok((g(p[0])?, 0.0));
    run_check(
        Property::Nonnegative,
        format!("g on [{a}, {b}]"),
        sampling,
        pointwise_grid(a, b, sampling),
        random,
        sides,
    )
}

/// Samples `|g(u)| ≤ bound` on `[a, b]`.
pub fn check_bounded_by<G>(
    g: G,
    bound: f64,
    a: f64,
    b: f64,
    sampling: Sampling,
) -> Result<CertificateReport, DomainError>
where
    G: Fn(f64) -> Result<f64, DomainError>,
{
    let random = |rng: &mut ChaCha8Rng| Some(vec![rng.gen_range(a..=b)]);
    let sides = |p: &[f64]| Ok((g(p[0])?.abs(), bound));
    run_check(
        Property::BoundedBy,
        format!("|g| <= {bound} on [{a}, {b}]"),
        sampling,
        pointwise_grid(a, b, sampling),
        random,
        sides,
    )
}

/// Re-evaluates a violated report's witness and tells whether the violation
/// reproduces. `g` is required for the properties that involve it; `bound`
/// for [`Property::BoundedBy`].
pub fn replay_witness<G>(
    report: &CertificateReport,
    g: Option<G>,
    h: Option<&HSpec>,
    bound: Option<f64>,
) -> Result<bool, DomainError>
where
    G: Fn(f64) -> Result<f64, DomainError>,
{
    let Some(w) = &report.witness else {
        return Ok(false);
    };
    let input = |name: &str| w.inputs.get(name).copied().unwrap_or(f64::NAN);
    let need_h = || h.expect("replay of this property needs h");
    let need_g = || g.as_ref().expect("replay of this property needs g");
    let (lhs, rhs) = match report.property {
        Property::HConvex | Property::HConcave => {
            convexity_sides(need_g(), need_h(), input("x"), input("y"), input("t"))?
        }
        Property::Superadditive => {
            let (x, y) = (input("x"), input("y"));
            let h = need_h();
            (h.eval(x + y)?, h.eval(x)? + h.eval(y)?)
        }
        Property::Supermultiplicative | Property::Submultiplicative => {
            let (x, y) = (input("x"), input("y"));
            let h = need_h();
            (h.eval(x * y)?, h.eval(x)? * h.eval(y)?)
        }
        Property::DominatesIdentity => (need_h().eval(input("alpha"))?, input("alpha")),
        Property::Nonnegative => (need_g()(input("u"))?, 0.0),
        Property::BoundedBy => (
            need_g()(input("u"))?.abs(),
            bound.expect("replay of bounded-by needs the bound"),
        ),
    };
    Ok(report.property.violated_by(lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    type Eval = fn(f64) -> Result<f64, DomainError>;

    fn s() -> Sampling {
        Sampling::default()
    }

    fn expr_fn(src: &str) -> impl Fn(f64) -> Result<f64, DomainError> {
        let e = expr::parse(src).unwrap();
        move |u| e.eval(u)
    }

    #[test]
    fn hspec_strings_round_trip() {
        for src in ["t", "t^s:0.5", "1/t", "1", "t^n:3", "shifted:1:0.5", "expr:t^2 + 1"] {
            let h: HSpec = src.parse().unwrap();
            assert_eq!(h.to_string().parse::<HSpec>().unwrap(), h, "{src}");
        }
        assert_eq!("t^s:1".parse::<HSpec>().unwrap(), HSpec::identity());
        assert_eq!("t^s:0.5".parse::<HSpec>().unwrap().to_string(), "t^s:0.5");
    }

    #[test]
    fn hspec_rejects_bad_parameters() {
        for bad in ["t^s:0", "t^s:1.5", "t^n:1", "t^n:2.5", "shifted:-1:2", "shifted:1", "q", "expr:x", "t^s:abc"] {
            assert!(bad.parse::<HSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn hspec_eval() {
        assert_eq!(HSpec::identity().eval(0.3).unwrap(), 0.3);
        assert_eq!(HSpec::power(0.5).unwrap().eval(0.25).unwrap(), 0.5);
        assert_eq!(HSpec::reciprocal().eval(0.25).unwrap(), 4.0);
        assert!(HSpec::reciprocal().eval(0.0).is_err());
        assert_eq!(HSpec::one().eval(0.7).unwrap(), 1.0);
        assert_eq!(HSpec::integer_power(3).unwrap().eval(0.5).unwrap(), 0.125);
        assert_eq!(HSpec::shifted(1.0, 2.0).unwrap().eval(0.5).unwrap(), 1.5);
        assert!(HSpec::custom("t - 1").unwrap().eval(0.5).is_err());
        assert!(HSpec::identity().eval(-0.1).is_err());
    }

    #[test]
    fn h_convex_examples() {
        let g = |u: f64| Ok((2.0 * u).abs());
        assert!(check_h_convex(g, &HSpec::identity(), 0.0, 1.0, s()).unwrap().holds());
        assert!(check_h_convex(g, &HSpec::power(0.5).unwrap(), 0.0, 1.0, s()).unwrap().holds());

        let r = check_h_concave(expr_fn("x^2"), &HSpec::identity(), 0.0, 1.0, s()).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        let w = r.witness.as_ref().unwrap();
        assert_eq!(w.inputs["x"], 0.0);
        assert_eq!(w.inputs["y"], 1.0);
        assert_eq!(w.inputs["t"], 0.5);
        assert_eq!(w.lhs, 0.25);
        assert_eq!(w.rhs, 0.5);
    }

    #[test]
    fn h_concave_examples() {
        assert!(check_h_concave(expr_fn("x"), &HSpec::identity(), 1.0, 2.0, s()).unwrap().holds());
        assert!(check_h_concave(expr_fn("sqrt(x)"), &HSpec::identity(), 0.0, 1.0, s())
            .unwrap()
            .holds());
        // (1+x)^-2 has positive second derivative 6(1+x)^-4: strictly convex
        let r = check_h_concave(expr_fn("(1+x)^-2"), &HSpec::identity(), 0.0, 1.0, s()).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
    }

    #[test]
    fn superadditive_examples() {
        let sq = HSpec::integer_power(2).unwrap();
        assert!(check_superadditive(&sq, 0.0, 10.0, s()).unwrap().holds());
        assert!(check_superadditive(&HSpec::identity(), 0.0, 10.0, s()).unwrap().holds());
        let root = HSpec::power(0.5).unwrap();
        let r = check_superadditive(&root, 0.0, 10.0, s()).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        // x = y = 1: sqrt(2) < 2
        let at_one = CertificateReport {
            witness: Some(Witness {
                inputs: [("x".to_owned(), 1.0), ("y".to_owned(), 1.0)].into(),
                lhs: 0.0,
                rhs: 0.0,
            }),
            ..r.clone()
        };
        assert!(replay_witness::<Eval>(&at_one, None, Some(&root), None).unwrap());
    }

    #[test]
    fn multiplicative_examples() {
        let super_h = HSpec::shifted(1.0, 0.5).unwrap();
        assert!(check_supermultiplicative(&super_h, 0.0, 1.0, s()).unwrap().holds());
        for sp in [0.25, 0.5, 0.9] {
            let h = HSpec::power(sp).unwrap();
            assert!(check_supermultiplicative(&h, 0.0, 1.0, s()).unwrap().holds());
            assert!(check_submultiplicative(&h, 0.0, 1.0, s()).unwrap().holds());
        }
        let sub_h = HSpec::shifted(1.0, 2.0).unwrap();
        let r = check_supermultiplicative(&sub_h, 0.0, 1.0, s()).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        assert!(replay_witness::<Eval>(&r, None, Some(&sub_h), None).unwrap());
        assert!(check_submultiplicative(&sub_h, 0.0, 1.0, s()).unwrap().holds());
    }

    #[test]
    fn dominates_identity_examples() {
        assert!(check_dominates_identity(&HSpec::power(0.5).unwrap(), s()).unwrap().holds());
        assert!(check_dominates_identity(&HSpec::one(), s()).unwrap().holds());
        let r = check_dominates_identity(&HSpec::integer_power(2).unwrap(), s()).unwrap();
        let w = r.witness.unwrap();
        assert_eq!(w.inputs["alpha"], 0.5);
        assert_eq!((w.lhs, w.rhs), (0.25, 0.5));
    }

    #[test]
    fn determinism() {
        let h = HSpec::custom("t^2 + 0.1*sin(t)").unwrap();
        let a = check_superadditive(&h, 0.0, 3.0, Sampling::new(333, 7)).unwrap();
        let b = check_superadditive(&h, 0.0, 3.0, Sampling::new(333, 7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn budget_counts_samples() {
        let r = check_dominates_identity(&HSpec::identity(), Sampling::new(101, 1)).unwrap();
        assert_eq!(r.samples, 101);
        let r = check_h_convex(|u: f64| Ok(u * u), &HSpec::identity(), 0.0, 1.0, Sampling::new(1, 1)).unwrap();
        assert_eq!(r.samples, 1);
    }

    #[test]
    fn domain_errors_surface() {
        let r = check_h_convex(expr_fn("ln(x)"), &HSpec::identity(), 0.0, 1.0, s());
        assert!(r.is_err());
    }

    #[test]
    fn bounded_and_nonnegative() {
        let g = expr_fn("2*x");
        assert!(check_bounded_by(&g, 2.0, 0.0, 1.0, s()).unwrap().holds());
        let r = check_bounded_by(&g, 1.5, 0.0, 1.0, s()).unwrap();
        assert!(replay_witness(&r, Some(&g), None, Some(1.5)).unwrap());
        assert!(check_nonnegative(expr_fn("x^2"), -1.0, 1.0, s()).unwrap().holds());
        assert!(!check_nonnegative(expr_fn("x - 0.5"), 0.0, 1.0, s()).unwrap().holds());
    }
}
