//! Arithmetic, generalized logarithmic and identric means, and audits of the
//! three mean inequalities that follow from the Ostrowski-type bounds.
//!
//! Each audit evaluates the inequality both with its printed constants and
//! with the constants the underlying bound actually produces, and reports a
//! verdict for each. Neither reading is treated as authoritative.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{self, cor23_constant, midpoint_concave_bound, BoundEngine, BoundError, ProblemInstance};
use crate::expr;
use crate::hclass::{CertificateReport, HSpec, Sampling};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum MeanError {
    #[error("mean needs positive arguments, got a = {a}, b = {b}")]
    NonPositive { a: f64, b: f64 },
    #[error("mean needs distinct arguments, got a = b = {0}")]
    Degenerate(f64),
    #[error("exponent p = {0} is excluded (p must not be 0 or -1)")]
    ExcludedExponent(f64),
    #[error("{0}")]
    OutOfRange(String),
    #[error(transparent)]
    Bound(#[from] BoundError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum MeanKind {
    Arithmetic,
    GeneralizedLog { p: f64 },
    Identric,
}

impl fmt::Display for MeanKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeanKind::Arithmetic => f.write_str("A"),
            MeanKind::GeneralizedLog { p } => write!(f, "L_{p}"),
            MeanKind::Identric => f.write_str("I"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MeanValue {
    pub kind: MeanKind,
    pub a: f64,
    pub b: f64,
    pub value: f64,
}

impl MeanValue {
    pub fn compute(kind: MeanKind, a: f64, b: f64) -> Result<Self, MeanError> {
        let value = match kind {
            MeanKind::Arithmetic => arithmetic_mean(a, b),
            MeanKind::GeneralizedLog { p } => generalized_log_mean(a, b, p)?,
            MeanKind::Identric => identric_mean(a, b)?,
        };
        Ok(MeanValue { kind, a, b, value })
    }
}

/// `(a + b) / 2`
pub fn arithmetic_mean<T: Real>(a: T, b: T) -> T {
    a / T::lit(2.0) + b / T::lit(2.0)
}

fn ordered_positive<T: Real>(a: T, b: T) -> Result<(T, T), MeanError> {
    if !(a > T::zero() && b > T::zero()) || !(a.is_finite() && b.is_finite()) {
        return Err(MeanError::NonPositive {
            a: a.to_f64_lossy(),
            b: b.to_f64_lossy(),
        });
    }
    if a == b {
        return Err(MeanError::Degenerate(a.to_f64_lossy()));
    }
    Ok(if a < b { (a, b) } else { (b, a) })
}

/// `[(b^(p+1) - a^(p+1)) / ((p+1)(b-a))]^(1/p)`, evaluated as
/// `b [(1 - r^(p+1)) / ((p+1)(1-r))]^(1/p)` with `r = a/b` so large `p`
/// does not overflow.
pub fn generalized_log_mean<T: Real>(a: T, b: T, p: T) -> Result<T, MeanError> {
    let (lo, hi) = ordered_positive(a, b)?;
    if p == T::zero() || p == -T::one() || !p.is_finite() {
        return Err(MeanError::ExcludedExponent(p.to_f64_lossy()));
    }
    let r = lo / hi;
    let p1 = p + T::one();
    let ratio = -(p1 * r.ln()).exp_m1() / (p1 * (T::one() - r));
    Ok(hi * ratio.powf(T::one() / p))
}

/// `ln I(a, b) = (b ln b - a ln a)/(b - a) - 1`
pub fn ln_identric_mean<T: Real>(a: T, b: T) -> Result<T, MeanError> {
    let (lo, hi) = ordered_positive(a, b)?;
    Ok((hi * hi.ln() - lo * lo.ln()) / (hi - lo) - T::one())
}

/// `I(a, b) = (1/e)(b^b / a^a)^(1/(b-a))`, through its logarithm.
pub fn identric_mean<T: Real>(a: T, b: T) -> Result<T, MeanError> {
    Ok(ln_identric_mean(a, b)?.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Proposition {
    P1,
    P2,
    P3,
}

impl fmt::Display for Proposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl std::str::FromStr for Proposition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().trim_start_matches(['p', 'P']) {
            "1" => Ok(Proposition::P1),
            "2" => Ok(Proposition::P2),
            "3" => Ok(Proposition::P3),
            _ => Err(format!("unknown proposition `{s}`; expected 1, 2 or 3")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuditVerdict {
    Holds,
    Violated,
}

impl AuditVerdict {
    pub fn of(lhs: f64, rhs: f64) -> Self {
        if bounds::holds(lhs, rhs) {
            AuditVerdict::Holds
        } else {
            AuditVerdict::Violated
        }
    }
}

/// An alternative reading of the right-hand side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AuditReading {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub verdict: AuditVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PropositionAudit {
    pub proposition: Proposition,
    pub inputs: BTreeMap<String, f64>,
    /// Deviation the underlying bound controls.
    pub lhs: f64,
    /// Left-hand side exactly as the inequality is stated.
    pub lhs_as_printed: f64,
    pub rhs_as_printed: f64,
    pub rhs_from_theorem: f64,
    pub verdict_printed: AuditVerdict,
    pub verdict_derived: AuditVerdict,
    /// `rhs_as_printed - lhs_as_printed`
    pub gap_printed: f64,
    /// `rhs_from_theorem - lhs`
    pub gap_derived: f64,
    /// `rhs_as_printed / rhs_from_theorem`
    pub constant_ratio: f64,
    pub derivative_bound: Option<f64>,
    pub readings: Vec<AuditReading>,
    pub preconditions: Vec<CertificateReport>,
    /// All preconditions of the underlying bound hold on their samples.
    pub applicable: bool,
    pub notes: Vec<String>,
}

impl PropositionAudit {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        proposition: Proposition,
        inputs: BTreeMap<String, f64>,
        lhs: f64,
        lhs_as_printed: f64,
        rhs_as_printed: f64,
        rhs_from_theorem: f64,
        derivative_bound: Option<f64>,
        readings: Vec<AuditReading>,
        preconditions: Vec<CertificateReport>,
        notes: Vec<String>,
    ) -> Self {
        let applicable = preconditions.iter().all(CertificateReport::holds);
        PropositionAudit {
            proposition,
            inputs,
            lhs,
            lhs_as_printed,
            rhs_as_printed,
            rhs_from_theorem,
            verdict_printed: AuditVerdict::of(lhs_as_printed, rhs_as_printed),
            verdict_derived: AuditVerdict::of(lhs, rhs_from_theorem),
            gap_printed: rhs_as_printed - lhs_as_printed,
            gap_derived: rhs_from_theorem - lhs,
            constant_ratio: rhs_as_printed / rhs_from_theorem,
            derivative_bound,
            readings,
            preconditions,
            applicable,
            notes,
        }
    }

    /// Recomputes both verdicts and every reading's verdict from the stored
    /// sides and reports whether they match.
    pub fn verdicts_consistent(&self) -> bool {
        AuditVerdict::of(self.lhs_as_printed, self.rhs_as_printed) == self.verdict_printed
            && AuditVerdict::of(self.lhs, self.rhs_from_theorem) == self.verdict_derived
            && self.readings.iter().all(|r| AuditVerdict::of(r.lhs, r.rhs) == r.verdict)
    }
}

fn check_interval(a: f64, b: f64) -> Result<(), MeanError> {
    if !(a > 0.0 && a < b && b.is_finite()) {
        return Err(MeanError::OutOfRange(format!("need 0 < a < b, got a = {a}, b = {b}")));
    }
    Ok(())
}

fn check_monomial(n: i32) -> Result<(), MeanError> {
    if n.unsigned_abs() < 2 {
        return Err(MeanError::OutOfRange(format!("need |n| >= 2, got n = {n}")));
    }
    Ok(())
}

/// `sup |n u^(n-1)|` over `[a, b]` with `a > 0`: attained at an endpoint.
pub fn monomial_derivative_bound(a: f64, b: f64, n: i32) -> f64 {
    let e = n - 1;
    n.unsigned_abs() as f64 * a.powi(e).max(b.powi(e))
}

/// `|A^n - L_n^n|`, which equals `|f(A) - avg f|` for `f = x^n`.
fn monomial_deviation(a: f64, b: f64, n: i32) -> Result<f64, MeanError> {
    let mean_power = generalized_log_mean(a, b, n as f64)?.powi(n);
    Ok((arithmetic_mean(a, b).powi(n) - mean_power).abs())
}

fn monomial_engine(a: f64, b: f64, n: i32, p: f64, sampling: Sampling) -> Result<(BoundEngine, f64), MeanError> {
    let h = HSpec::shifted(1.0, p).map_err(|e| MeanError::OutOfRange(e.to_string()))?;
    let m = monomial_derivative_bound(a, b, n);
    let inst = ProblemInstance::new(expr::parse(&format!("x^{n}")).map_err(BoundError::from)?, a, b, 0.5 * (a + b), h)?
        .with_m(m)?
        .with_sampling(sampling);
    Ok((BoundEngine::new(inst), m))
}

/// `|A^n - L_n^n| <= (M(b-a)/4)[∫(1+t^2)^(p-1) dt + ∫(1+t-t^2)^(p-1) dt]`,
/// compared with the pair-integral bound at the midpoint for
/// `h(t) = (1+t)^(p-1)`, whose constant is `M(b-a)/2`.
pub fn audit_prop1(a: f64, b: f64, n: i32, p: f64, sampling: Sampling) -> Result<PropositionAudit, MeanError> {
    check_interval(a, b)?;
    check_monomial(n)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(MeanError::OutOfRange(format!("need p in (0, 1), got p = {p}")));
    }
    let (engine, m) = monomial_engine(a, b, n, p, sampling)?;
    let lhs = monomial_deviation(a, b, n)?;
    let (pair, mut notes) = engine.pair_integral()?;
    let rhs_as_printed = m * (b - a) / 4.0 * pair;
    let derived = engine.thm2_at(0.5 * (a + b))?;
    notes.extend(derived.notes.iter().cloned());
    notes.push(format!(
        "pair integral for h(t) = (1+t)^({}) is {pair}; printed constant M(b-a)/4, bound constant M(b-a)/2",
        p - 1.0
    ));
    let inputs = BTreeMap::from([
        ("a".to_owned(), a),
        ("b".to_owned(), b),
        ("n".to_owned(), n as f64),
        ("p".to_owned(), p),
    ]);
    Ok(PropositionAudit::assemble(
        Proposition::P1,
        inputs,
        lhs,
        lhs,
        rhs_as_printed,
        derived.rhs,
        Some(m),
        Vec::new(),
        derived.preconditions,
        notes,
    ))
}

/// `|A^n - L_n^n| <= (2^(1/p) M(b-a)/8)[∫(1+t^2)^(p-1) + ∫(1+t-t^2)^(p-1)]^(1/q)`,
/// compared with the power-mean bound at the midpoint (constant
/// `2^(1/q) M(b-a)/4`) and with the `t^n` corollary reading.
pub fn audit_prop2(a: f64, b: f64, p: f64, q: f64, n: i32, sampling: Sampling) -> Result<PropositionAudit, MeanError> {
    check_interval(a, b)?;
    check_monomial(n)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(MeanError::OutOfRange(format!("need p in (0, 1), got p = {p}")));
    }
    if !(q >= 1.0 && q.is_finite()) {
        return Err(MeanError::OutOfRange(format!("need q >= 1, got q = {q}")));
    }
    let (engine, m) = monomial_engine(a, b, n, p, sampling)?;
    let engine = BoundEngine::new(engine.instance().clone().with_q(q)?);
    let lhs = monomial_deviation(a, b, n)?;
    let (pair, mut notes) = engine.pair_integral()?;
    let rhs_as_printed = 2f64.powf(1.0 / p) * m * (b - a) / 8.0 * pair.powf(1.0 / q);
    let derived = engine.thm4_at(0.5 * (a + b))?;
    notes.extend(derived.notes.iter().cloned());

    let mut readings = Vec::new();
    if q > 1.0 {
        let conj = q / (q - 1.0);
        let k = n.unsigned_abs();
        let rhs = m * (b - a) / 2.0 * cor23_constant(k, conj);
        readings.push(AuditReading {
            name: format!("cor23 with h(t) = t^{k}, p = {conj}"),
            lhs,
            rhs,
            verdict: AuditVerdict::of(lhs, rhs),
        });
    } else {
        notes.push("cor23 reading skipped: q = 1 has no finite conjugate exponent".into());
    }
    let inputs = BTreeMap::from([
        ("a".to_owned(), a),
        ("b".to_owned(), b),
        ("n".to_owned(), n as f64),
        ("p".to_owned(), p),
        ("q".to_owned(), q),
    ]);
    Ok(PropositionAudit::assemble(
        Proposition::P2,
        inputs,
        lhs,
        lhs,
        rhs_as_printed,
        derived.rhs,
        Some(m),
        readings,
        derived.preconditions,
        notes,
    ))
}

/// `|ln(A+1) - (b-a) ln I(a+1, b+1)| <= (b-a)/(4(p+1)^(1/p)) [1/(3a+b+4) + 1/(a+3b+4)]`
/// for `f(x) = ln(x+1)`, compared with the h-concave midpoint bound for
/// `h(t) = t`, whose bracket is `4/(3a+b+4) + 4/(a+3b+4)`.
pub fn audit_prop3(a: f64, b: f64, p: f64, sampling: Sampling) -> Result<PropositionAudit, MeanError> {
    check_interval(a, b)?;
    if !(p > 1.0 && p.is_finite()) {
        return Err(MeanError::OutOfRange(format!("need p > 1, got p = {p}")));
    }
    let shifted_a = arithmetic_mean(a, b) + 1.0;
    let ln_i = ln_identric_mean(a + 1.0, b + 1.0)?;
    let lhs = (shifted_a.ln() - ln_i).abs();
    let lhs_as_printed = (shifted_a.ln() - (b - a) * ln_i).abs();
    let rhs_as_printed = (b - a) / (4.0 * (p + 1.0).powf(1.0 / p)) * (1.0 / (3.0 * a + b + 4.0) + 1.0 / (a + 3.0 * b + 4.0));

    let inst = ProblemInstance::parse("ln(x+1)", a, b, 0.5 * (a + b), HSpec::identity())?
        .with_p(p)?
        .with_sampling(sampling);
    let engine = BoundEngine::new(inst);
    let derived = engine.thm5_at(0.5 * (a + b))?;
    let direct = midpoint_concave_bound(&engine.instance().f_prime, a, b, p).map_err(BoundError::from)?;
    let mut notes = derived.notes.clone();
    if (direct - derived.rhs).abs() > 1e-12 * derived.rhs {
        notes.push(format!("midpoint closed form {direct} differs from the general bound {}", derived.rhs));
    }
    let q = p / (p - 1.0);
    notes.push(format!(
        "h-concavity of |f'|^q = (1+x)^(-{q}) with h(t) = t is checked by sampling; see preconditions"
    ));
    let readings = vec![AuditReading {
        name: "printed left-hand side against derived right-hand side".into(),
        lhs: lhs_as_printed,
        rhs: derived.rhs,
        verdict: AuditVerdict::of(lhs_as_printed, derived.rhs),
    }];
    let inputs = BTreeMap::from([
        ("a".to_owned(), a),
        ("b".to_owned(), b),
        ("p".to_owned(), p),
        ("q".to_owned(), q),
    ]);
    Ok(PropositionAudit::assemble(
        Proposition::P3,
        inputs,
        lhs,
        lhs_as_printed,
        rhs_as_printed,
        derived.rhs,
        None,
        readings,
        derived.preconditions,
        notes,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hclass::Property;
    use crate::quadrature::integrate_pure;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn mean_examples() {
        assert_eq!(arithmetic_mean(2.0, 4.0), 3.0);
        assert!(close(generalized_log_mean(2.0, 4.0, 1.0).unwrap(), 3.0, 1e-14));
        assert!(close(generalized_log_mean(1.0f64, 2.0, 2.0).unwrap().powi(2), 7.0 / 3.0, 1e-14));
        let e = std::f64::consts::E;
        assert!(close(identric_mean(1.0, e).unwrap(), 1.789_572_396_841_83, 1e-13));
        assert!(close(ln_identric_mean(2.0, 3.0).unwrap(), 0.909_542_504_884_438, 1e-13));
        assert!(close(identric_mean(1.0f32, 2.0).unwrap() as f64, 4.0 / e, 1e-6));
    }

    #[test]
    fn mean_errors() {
        assert!(matches!(generalized_log_mean(0.0, 1.0, 2.0), Err(MeanError::NonPositive { .. })));
        assert!(matches!(generalized_log_mean(1.0, 2.0, -1.0), Err(MeanError::ExcludedExponent(_))));
        assert!(matches!(generalized_log_mean(1.0, 2.0, 0.0), Err(MeanError::ExcludedExponent(_))));
        assert!(matches!(identric_mean(2.0, 2.0), Err(MeanError::Degenerate(_))));
        assert!(identric_mean(-1.0, 2.0).is_err());
    }

    #[test]
    fn large_exponent_no_overflow() {
        let v = generalized_log_mean(900.0, 1000.0, 400.0).unwrap();
        assert!(v > 900.0 && v < 1000.0);
        let v = identric_mean(700.0, 800.0).unwrap();
        assert!(v > 700.0 && v < 800.0);
    }

    #[test]
    fn identric_matches_log_integral() {
        let r = integrate_pure(|u: f64| u.ln(), 2.0, 5.0, 1e-13);
        assert!(close(ln_identric_mean(2.0, 5.0).unwrap(), r.value / 3.0, 1e-12));
    }

    #[test]
    fn prop1_oracle() {
        let audit = audit_prop1(1.0, 2.0, 2, 0.5, Sampling::default()).unwrap();
        assert!(close(audit.lhs, 1.0 / 12.0, 1e-14));
        assert_eq!(audit.derivative_bound, Some(4.0));
        assert!(close(audit.rhs_as_printed, 1.808_668_805_021_16, 1e-10));
        assert!(close(audit.rhs_from_theorem, 3.617_337_610_042_31, 1e-10));
        assert!(close(audit.constant_ratio, 0.5, 1e-12));
        assert_eq!(audit.verdict_printed, AuditVerdict::Holds);
        assert_eq!(audit.verdict_derived, AuditVerdict::Holds);
        assert!(audit.verdicts_consistent());
    }

    #[test]
    fn prop1_degenerate_interval_shrinks() {
        let audit = audit_prop1(1.0, 1.0 + 1e-6, 2, 0.5, Sampling::new(64, 42)).unwrap();
        assert!(audit.lhs < 1e-12);
        assert!(audit.rhs_as_printed < 1e-5 && audit.rhs_from_theorem < 1e-5);
    }

    #[test]
    fn prop2_oracle() {
        let audit = audit_prop2(1.0, 2.0, 0.5, 2.0, 2, Sampling::default()).unwrap();
        assert!(close(audit.rhs_as_printed, 2.689_735_157_982_03, 1e-10));
        assert!(close(audit.rhs_from_theorem, 1.901_929_969_804_96, 1e-10));
        assert_eq!(audit.readings.len(), 1);
        assert!(close(audit.readings[0].rhs, 2.0 * 0.2f64.sqrt(), 1e-12));
        assert!(audit.verdicts_consistent());
    }

    #[test]
    fn prop2_reflection_symmetry() {
        // reflecting x^2 on [1, 2] gives (3 - x)^2 with the same deviation
        let audit = audit_prop2(1.0, 2.0, 0.5, 2.0, 2, Sampling::default()).unwrap();
        let inst = ProblemInstance::parse("x^2", 1.0, 2.0, 1.5, HSpec::shifted(1.0, 0.5).unwrap())
            .unwrap()
            .with_m(4.0)
            .unwrap()
            .with_q(2.0)
            .unwrap()
            .reflected()
            .unwrap();
        let engine = BoundEngine::new(inst);
        assert!(close(engine.lhs_at(1.5).unwrap(), audit.lhs, 1e-9));
        assert!(close(engine.thm4_at(1.5).unwrap().rhs, audit.rhs_from_theorem, 1e-9));
    }

    #[test]
    fn prop3_oracle() {
        let audit = audit_prop3(1.0, 2.0, 2.0, Sampling::default()).unwrap();
        assert!(close(audit.lhs, 0.006_748_226_989_716_61, 1e-12));
        assert!(close(audit.lhs_as_printed, 0.006_748_226_989_716_61, 1e-12));
        assert!(close(audit.rhs_as_printed, 0.029_159_104_504_526_6, 1e-12));
        assert!(close(audit.rhs_from_theorem, 0.116_636_418_018_106, 1e-12));
        let concave = audit
            .preconditions
            .iter()
            .find(|r| r.property == Property::HConcave)
            .unwrap();
        assert!(!concave.holds());
        assert!(!audit.applicable);

        let audit = audit_prop3(0.5, 3.0, 2.0, Sampling::default()).unwrap();
        assert!(close(audit.lhs_as_printed, 1.425_378_870_638_84, 1e-12));
        assert!(close(audit.lhs, 0.036_808_998_751_553_6, 1e-12));
        assert_eq!(audit.verdict_printed, AuditVerdict::Violated);
        assert!(audit.verdicts_consistent());
    }

    #[test]
    fn audit_input_validation() {
        assert!(audit_prop1(2.0, 1.0, 2, 0.5, Sampling::default()).is_err());
        assert!(audit_prop1(1.0, 2.0, 1, 0.5, Sampling::default()).is_err());
        assert!(audit_prop2(1.0, 2.0, 0.5, 0.5, 2, Sampling::default()).is_err());
        assert!(audit_prop3(1.0, 2.0, 1.0, Sampling::default()).is_err());
        assert_eq!("p2".parse::<Proposition>().unwrap(), Proposition::P2);
    }
}
