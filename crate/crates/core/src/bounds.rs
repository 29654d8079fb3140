//! Left-hand side `|f(x) - avg f|`, every right-hand side, the Montgomery
//! identity residual and the Hadamard chain for h-convex functions.
//!
//! Right-hand sides are always computed, even when a hypothesis fails; the
//! `applicable` flag carries the verdict. A divergent constituent integral
//! makes the right-hand side `+inf`.

use std::cell::{OnceCell, RefCell};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{self, BinOp, DomainError, Expr, NonDifferentiableError, ParseError};
use crate::hclass::{
    check_bounded_by, check_dominates_identity, check_h_concave, check_h_convex, check_nonnegative,
    check_submultiplicative, check_superadditive, check_supermultiplicative, CertificateReport, HSpec,
    Property, Sampling,
};
use crate::quadrature::{estimate_sup_abs, integrate, QuadResult, QuadStatus, SupEstimate};
use crate::special::{log_gamma, SpecialDomainError};

/// Absolute tolerance for the `h` integrals, and the relative tolerance for
/// interval averages.
pub const INTEGRAL_TOL: f64 = 1e-10;

/// `lhs <= rhs + 1e-9 * (1 + rhs)` decides whether a bound holds.
pub const COMPARISON_TOL: f64 = 1e-9;

/// Allowed drift of `1/p + 1/q` from 1.
pub const CONJUGATE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum BoundError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    NonDifferentiable(#[from] NonDifferentiableError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Special(#[from] SpecialDomainError),
    #[error("{0} requires exponent {1}")]
    MissingExponent(BoundId, &'static str),
    #[error("quadrature of {what} did not converge ({status:?})")]
    Quadrature { what: String, status: QuadStatus },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundId {
    Classical,
    Thm2,
    Thm3,
    Cor23,
    Thm4,
    Thm5,
    Hadamard,
}

impl BoundId {
    pub const ALL: [BoundId; 7] = [
        BoundId::Classical,
        BoundId::Thm2,
        BoundId::Thm3,
        BoundId::Cor23,
        BoundId::Thm4,
        BoundId::Thm5,
        BoundId::Hadamard,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundId::Classical => "classical",
            BoundId::Thm2 => "thm2",
            BoundId::Thm3 => "thm3",
            BoundId::Cor23 => "cor23",
            BoundId::Thm4 => "thm4",
            BoundId::Thm5 => "thm5",
            BoundId::Hadamard => "hadamard",
        }
    }
}

impl fmt::Display for BoundId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundId {
    type Err = String;

    /// Accepts the report names (`thm2`) and the short forms the CLI uses
    /// (`2`, `23`, `101`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "classical" | "101" | "ostrowski" => BoundId::Classical,
            "thm2" | "2" | "21" => BoundId::Thm2,
            "thm3" | "3" | "22" => BoundId::Thm3,
            "cor23" | "23" => BoundId::Cor23,
            "thm4" | "4" | "24" => BoundId::Thm4,
            "thm5" | "5" | "25" => BoundId::Thm5,
            "hadamard" | "102" => BoundId::Hadamard,
            other => return Err(format!("unknown bound `{other}`")),
        })
    }
}

/// Which multiplicativity hypothesis gates the `thm2` bound. The stated
/// hypothesis is super-multiplicativity, but the step that trades
/// `h(t)^2 + h(t)h(1-t)` for `h(t^2) + h(t - t^2)` needs the reverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Multiplicativity {
    #[default]
    Super,
    Sub,
}

/// Where the derivative bound `M` came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum DerivativeBound {
    User(f64),
    Estimated(SupEstimate<f64>),
}

impl DerivativeBound {
    pub fn value(&self) -> f64 {
        match self {
            DerivativeBound::User(m) => *m,
            DerivativeBound::Estimated(e) => e.value,
        }
    }

    pub fn guaranteed(&self) -> bool {
        matches!(self, DerivativeBound::User(_))
    }
}

/// The tuple `(f, [a, b], x, h, p, q, M)` every bound is evaluated on.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub f: Expr,
    pub f_prime: Expr,
    pub a: f64,
    pub b: f64,
    pub x: f64,
    pub h: HSpec,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub m: Option<DerivativeBound>,
    /// Domain `J` for the super-additivity and multiplicativity checks.
    pub j: (f64, f64),
    pub sampling: Sampling,
}

impl ProblemInstance {
    pub fn new(f: Expr, a: f64, b: f64, x: f64, h: HSpec) -> Result<Self, BoundError> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(BoundError::Invalid(format!("need finite a < b, got [{a}, {b}]")));
        }
        if !(a..=b).contains(&x) {
            return Err(BoundError::Invalid(format!("x = {x} outside [{a}, {b}]")));
        }
        let f_prime = f.differentiate()?;
        Ok(ProblemInstance {
            f,
            f_prime,
            a,
            b,
            x,
            h,
            p: None,
            q: None,
            m: None,
            j: (0.0, 1.0),
            sampling: Sampling::default(),
        })
    }

    pub fn parse(f: &str, a: f64, b: f64, x: f64, h: HSpec) -> Result<Self, BoundError> {
        Self::new(expr::parse(f)?, a, b, x, h)
    }

    /// Sets `p > 1` and its conjugate `q`.
    pub fn with_p(mut self, p: f64) -> Result<Self, BoundError> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(BoundError::Invalid(format!("p = {p} must exceed 1")));
        }
        self.p = Some(p);
        self.q = Some(p / (p - 1.0));
        Ok(self)
    }

    /// Sets `q ≥ 1`; for `q > 1` the conjugate `p` is filled in, for `q = 1`
    /// only the power-mean bound can use it.
    pub fn with_q(mut self, q: f64) -> Result<Self, BoundError> {
        if !(q >= 1.0 && q.is_finite()) {
            return Err(BoundError::Invalid(format!("q = {q} must be at least 1")));
        }
        self.q = Some(q);
        self.p = (q > 1.0).then(|| q / (q - 1.0));
        Ok(self)
    }

    pub fn with_exponents(mut self, p: f64, q: f64) -> Result<Self, BoundError> {
        if !(p > 1.0 && q > 1.0) || (1.0 / p + 1.0 / q - 1.0).abs() > CONJUGATE_TOL {
            return Err(BoundError::Invalid(format!(
                "p = {p}, q = {q} must satisfy p, q > 1 and 1/p + 1/q = 1"
            )));
        }
        self.p = Some(p);
        self.q = Some(q);
        Ok(self)
    }

    /// User-supplied `M`, checked against `|f'(x)|`.
    pub fn with_m(mut self, m: f64) -> Result<Self, BoundError> {
        if !(m >= 0.0 && m.is_finite()) {
            return Err(BoundError::Invalid(format!("M = {m} must be finite and nonnegative")));
        }
        self.m = Some(DerivativeBound::User(m));
        self.check_m()?;
        Ok(self)
    }

    pub fn with_estimated_m(mut self) -> Result<Self, BoundError> {
        let est = estimate_sup_abs(|u| self.f_prime.eval(u), self.a, self.b)?;
        self.m = Some(DerivativeBound::Estimated(est));
        Ok(self)
    }

    pub fn with_j(mut self, lo: f64, hi: f64) -> Result<Self, BoundError> {
        if !(lo >= 0.0 && lo < hi && hi.is_finite()) {
            return Err(BoundError::Invalid(format!("J = [{lo}, {hi}] must satisfy 0 <= lo < hi")));
        }
        self.j = (lo, hi);
        Ok(self)
    }

    pub fn with_sampling(mut self, sampling: Sampling) -> Self {
        self.sampling = sampling;
        self
    }

    /// The same problem at another evaluation point.
    pub fn at(&self, x: f64) -> Result<Self, BoundError> {
        if !(self.a..=self.b).contains(&x) {
            return Err(BoundError::Invalid(format!("x = {x} outside [{}, {}]", self.a, self.b)));
        }
        let mut next = self.clone();
        next.x = x;
        next.check_m()?;
        Ok(next)
    }

    /// Mirror image under `u -> a + b - u`, with `x` mirrored too.
    pub fn reflected(&self) -> Result<Self, BoundError> {
        let mirror = Expr::binary(
            BinOp::Sub,
            Expr::constant(self.a + self.b),
            Expr::var(expr::Variable::X),
        );
        let f = self.f.substitute(&mirror);
        let mut next = self.clone();
        next.f_prime = f.differentiate()?;
        next.f = f;
        next.x = self.a + self.b - self.x;
        if let Some(DerivativeBound::Estimated(mut e)) = next.m {
            e.argmax = e.argmax.map(|u| self.a + self.b - u);
            next.m = Some(DerivativeBound::Estimated(e));
        }
        Ok(next)
    }

    fn check_m(&self) -> Result<(), BoundError> {
        if let Some(DerivativeBound::User(m)) = self.m {
            let d = self.f_prime.eval(self.x)?.abs();
            if m < d - 1e-9 * d.max(1.0) {
                return Err(BoundError::Invalid(format!(
                    "M = {m} is below |f'(x)| = {d} at x = {}",
                    self.x
                )));
            }
        }
        Ok(())
    }

    /// `(x - a)^2 + (b - x)^2` at `x`.
    fn spread(&self, x: f64) -> f64 {
        (x - self.a).powi(2) + (self.b - x).powi(2)
    }

    fn width(&self) -> f64 {
        self.b - self.a
    }
}

/// One evaluated right-hand side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub name: BoundId,
    /// `+inf` when a constituent integral diverges.
    pub rhs: f64,
    pub preconditions: Vec<CertificateReport>,
    /// All preconditions hold on their samples.
    pub applicable: bool,
    pub notes: Vec<String>,
}

impl BoundValue {
    fn new(name: BoundId, rhs: f64, preconditions: Vec<CertificateReport>, notes: Vec<String>) -> Self {
        let applicable = preconditions.iter().all(CertificateReport::holds);
        BoundValue {
            name,
            rhs,
            preconditions,
            applicable,
            notes,
        }
    }

    /// Whether `lhs` respects this bound within [`COMPARISON_TOL`].
    pub fn holds_for(&self, lhs: f64) -> bool {
        holds(lhs, self.rhs)
    }

    /// `lhs / rhs`; `None` when `rhs` is zero or infinite.
    pub fn ratio(&self, lhs: f64) -> Option<f64> {
        (self.rhs.is_finite() && self.rhs != 0.0).then(|| lhs / self.rhs)
    }
}

pub fn holds(lhs: f64, rhs: f64) -> bool {
    rhs == f64::INFINITY || lhs <= rhs + COMPARISON_TOL * (1.0 + rhs.abs())
}

/// `(left, middle, right)` of the Hadamard inequality for h-convex `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HadamardChain {
    pub left: f64,
    pub middle: f64,
    pub right: f64,
    pub preconditions: Vec<CertificateReport>,
    pub applicable: bool,
    pub notes: Vec<String>,
}

impl HadamardChain {
    pub fn holds(&self) -> bool {
        holds(self.left, self.middle) && holds(self.middle, self.right)
    }
}

/// Integral of an `h`-built integrand over `(0, 1)`: `+inf` on divergence,
/// value plus error estimate when only the depth limit was hit.
fn unit_integral<F>(what: &str, f: F, notes: &mut Vec<String>) -> Result<f64, BoundError>
where
    F: FnMut(f64) -> Result<f64, DomainError>,
{
    let r = integrate(f, 0.0, 1.0, INTEGRAL_TOL)?;
    Ok(finish_integral(what, &r, notes))
}

fn finish_integral(what: &str, r: &QuadResult<f64>, notes: &mut Vec<String>) -> f64 {
    match r.status {
        QuadStatus::Converged => r.value,
        QuadStatus::DivergenceSuspected => {
            notes.push(format!("{what}: divergenceSuspected; right-hand side is +inf"));
            f64::INFINITY
        }
        QuadStatus::MaxDepthReached => {
            notes.push(format!(
                "{what} did not reach tolerance; using value + error estimate ({} + {})",
                r.value, r.error_estimate
            ));
            r.value + r.error_estimate
        }
    }
}

/// Cached, x-independent pieces of a problem: interval average, `M`,
/// `h` integrals and precondition reports. Evaluate any bound at any `x`
/// in `[a, b]`.
pub struct BoundEngine {
    inst: ProblemInstance,
    average: OnceCell<f64>,
    m: OnceCell<(f64, Option<String>)>,
    pair_integral: OnceCell<(f64, Vec<String>)>,
    power_integral: OnceCell<(f64, Vec<String>)>,
    h_integral: OnceCell<(f64, Vec<String>)>,
    certificates: RefCell<BTreeMap<(Property, String), CertificateReport>>,
}

impl BoundEngine {
    pub fn new(inst: ProblemInstance) -> Self {
        BoundEngine {
            inst,
            average: OnceCell::new(),
            m: OnceCell::new(),
            pair_integral: OnceCell::new(),
            power_integral: OnceCell::new(),
            h_integral: OnceCell::new(),
            certificates: RefCell::new(BTreeMap::new()),
        }
    }

    pub fn instance(&self) -> &ProblemInstance {
        &self.inst
    }

    /// Every precondition report computed so far, in a stable order.
    pub fn certificates(&self) -> Vec<CertificateReport> {
        self.certificates.borrow().values().cloned().collect()
    }

    fn cached<T: Clone>(
        cell: &OnceCell<T>,
        init: impl FnOnce() -> Result<T, BoundError>,
    ) -> Result<T, BoundError> {
        if let Some(v) = cell.get() {
            return Ok(v.clone());
        }
        let v = init()?;
        Ok(cell.get_or_init(|| v).clone())
    }

    /// `(1/(b-a)) ∫_a^b f(u) du`.
    pub fn average(&self) -> Result<f64, BoundError> {
        Self::cached(&self.average, || {
            let inst = &self.inst;
            let mid = 0.5 * (inst.a + inst.b);
            let scale = 1.0 + inst.f.eval(mid)?.abs();
            let tol = INTEGRAL_TOL * inst.width() * scale;
            let r = integrate(|u| inst.f.eval(u), inst.a, inst.b, tol)?;
            if !r.converged() {
                return Err(BoundError::Quadrature {
                    what: format!("f = {} on [{}, {}]", inst.f, inst.a, inst.b),
                    status: r.status,
                });
            }
            Ok(r.value / inst.width())
        })
    }

    /// `|f(x) - avg f|`.
    pub fn lhs_at(&self, x: f64) -> Result<f64, BoundError> {
        Ok((self.inst.f.eval(x)? - self.average()?).abs())
    }

    /// `M` and, when it was estimated, the heuristic footnote.
    pub fn derivative_bound(&self) -> Result<(f64, Option<String>), BoundError> {
        Self::cached(&self.m, || {
            let inst = &self.inst;
            Ok(match inst.m {
                Some(DerivativeBound::User(m)) => (m, None),
                Some(DerivativeBound::Estimated(e)) => (e.value, Some(heuristic_note(e.value))),
                None => {
                    let e = estimate_sup_abs(|u| inst.f_prime.eval(u), inst.a, inst.b)?;
                    (e.value, Some(heuristic_note(e.value)))
                }
            })
        })
    }

    fn certify(
        &self,
        property: Property,
        subject: String,
        run: impl FnOnce() -> Result<CertificateReport, DomainError>,
    ) -> Result<CertificateReport, BoundError> {
        let key = (property, subject.clone());
        if let Some(r) = self.certificates.borrow().get(&key) {
            return Ok(r.clone());
        }
        let report = run()?.with_subject(subject);
        self.certificates.borrow_mut().insert(key, report.clone());
        Ok(report)
    }

    fn interval(&self) -> String {
        format!("[{}, {}]", self.inst.a, self.inst.b)
    }

    fn m_certificate(&self) -> Result<(f64, CertificateReport, Vec<String>), BoundError> {
        let (m, note) = self.derivative_bound()?;
        let inst = &self.inst;
        let subject = format!("|f'| <= M = {m} on {}", self.interval());
        let report = self.certify(Property::BoundedBy, subject, || {
            check_bounded_by(|u| inst.f_prime.eval(u), m, inst.a, inst.b, inst.sampling)
        })?;
        Ok((m, report, note.into_iter().collect()))
    }

    fn dominates(&self, h: &HSpec) -> Result<CertificateReport, BoundError> {
        let subject = format!("h = {h} on (0, 1)");
        self.certify(Property::DominatesIdentity, subject, || {
            check_dominates_identity(h, self.inst.sampling)
        })
    }

    fn superadditive(&self, h: &HSpec) -> Result<CertificateReport, BoundError> {
        let (lo, hi) = self.inst.j;
        let subject = format!("h = {h} on J = [{lo}, {hi}]");
        self.certify(Property::Superadditive, subject, || {
            check_superadditive(h, lo, hi, self.inst.sampling)
        })
    }

    fn multiplicative(&self, reading: Multiplicativity) -> Result<CertificateReport, BoundError> {
        let h = &self.inst.h;
        let (lo, hi) = self.inst.j;
        let subject = format!("h = {h} on J = [{lo}, {hi}]");
        match reading {
            Multiplicativity::Super => self.certify(Property::Supermultiplicative, subject, || {
                check_supermultiplicative(h, lo, hi, self.inst.sampling)
            }),
            Multiplicativity::Sub => self.certify(Property::Submultiplicative, subject, || {
                check_submultiplicative(h, lo, hi, self.inst.sampling)
            }),
        }
    }

    /// h-convexity (or h-concavity) of `|f'|^q`.
    fn derivative_class(&self, property: Property, h: &HSpec, q: f64) -> Result<CertificateReport, BoundError> {
        let inst = &self.inst;
        let g = |u: f64| -> Result<f64, DomainError> { Ok(inst.f_prime.eval(u)?.abs().powf(q)) };
        let power = if q == 1.0 { String::new() } else { format!("^{q}") };
        let subject = format!("|f'|{power} on {} with h = {h}", self.interval());
        let sampling = inst.sampling;
        let (a, b) = (inst.a, inst.b);
        self.certify(property, subject, || match property {
            Property::HConcave => check_h_concave(g, h, a, b, sampling),
            _ => check_h_convex(g, h, a, b, sampling),
        })
    }

    fn require_q(&self, id: BoundId) -> Result<f64, BoundError> {
        self.inst.q.ok_or(BoundError::MissingExponent(id, "q"))
    }

    fn require_pq(&self, id: BoundId) -> Result<(f64, f64), BoundError> {
        match (self.inst.p, self.inst.q) {
            (Some(p), Some(q)) if p > 1.0 && q > 1.0 => Ok((p, q)),
            _ => Err(BoundError::MissingExponent(id, "p, q > 1")),
        }
    }

    /// `∫_0^1 [h(t^2) + h(t - t^2)] dt`
    pub fn pair_integral(&self) -> Result<(f64, Vec<String>), BoundError> {
        Self::cached(&self.pair_integral, || {
            let h = &self.inst.h;
            let mut notes = Vec::new();
            let v = unit_integral(
                &format!("∫ h(t^2) + h(t - t^2) dt for h = {h}"),
                |t| Ok(h.eval(t * t)? + h.eval(t - t * t)?),
                &mut notes,
            )?;
            Ok((v, notes))
        })
    }

    /// `∫_0^1 h(t^p) dt`
    pub fn power_integral(&self, p: f64) -> Result<(f64, Vec<String>), BoundError> {
        Self::cached(&self.power_integral, || {
            let h = &self.inst.h;
            let mut notes = Vec::new();
            let v = unit_integral(
                &format!("∫ h(t^{p}) dt for h = {h}"),
                |t| h.eval(t.powf(p)),
                &mut notes,
            )?;
            Ok((v, notes))
        })
    }

    /// `∫_0^1 h(t) dt`
    pub fn h_integral(&self) -> Result<(f64, Vec<String>), BoundError> {
        Self::cached(&self.h_integral, || {
            let h = &self.inst.h;
            let mut notes = Vec::new();
            let v = unit_integral(&format!("∫ h(t) dt for h = {h}"), |t| h.eval(t), &mut notes)?;
            Ok((v, notes))
        })
    }

    /// `(M / (b-a)) ((x-a)^2 + (b-x)^2) / 2`
    pub fn classical_at(&self, x: f64) -> Result<BoundValue, BoundError> {
        let (m, m_report, notes) = self.m_certificate()?;
        let rhs = m / self.inst.width() * self.inst.spread(x) / 2.0;
        Ok(BoundValue::new(BoundId::Classical, rhs, vec![m_report], notes))
    }

    pub fn thm2_at(&self, x: f64) -> Result<BoundValue, BoundError> {
        self.thm2_with(x, Multiplicativity::Super)
    }

    /// `(M ((x-a)^2 + (b-x)^2) / (b-a)) ∫_0^1 [h(t^2) + h(t - t^2)] dt`
    pub fn thm2_with(&self, x: f64, reading: Multiplicativity) -> Result<BoundValue, BoundError> {
        let (m, m_report, mut notes) = self.m_certificate()?;
        let (integral, int_notes) = self.pair_integral()?;
        notes.extend(int_notes);
        if reading == Multiplicativity::Sub {
            notes.push("gated on sub-multiplicativity of h instead of super-multiplicativity".into());
        }
        let rhs = scaled(m * self.inst.spread(x) / self.inst.width(), integral);
        let pre = vec![
            self.multiplicative(reading)?,
            self.dominates(&self.inst.h)?,
            self.derivative_class(Property::HConvex, &self.inst.h, 1.0)?,
            m_report,
        ];
        Ok(BoundValue::new(BoundId::Thm2, rhs, pre, notes))
    }

    /// `(M h(1)^(1/q) / (b-a)) (∫_0^1 h(t^p) dt)^(1/p) ((x-a)^2 + (b-x)^2)`
    pub fn thm3_at(&self, x: f64) -> Result<BoundValue, BoundError> {
        let (p, q) = self.require_pq(BoundId::Thm3)?;
        let (m, m_report, mut notes) = self.m_certificate()?;
        let h = &self.inst.h;
        let (integral, int_notes) = self.power_integral(p)?;
        notes.extend(int_notes);
        let factor = m * h.eval(1.0)?.powf(1.0 / q) / self.inst.width() * self.inst.spread(x);
        let rhs = scaled(factor, integral.powf(1.0 / p));
        let pre = vec![
            self.superadditive(h)?,
            self.dominates(h)?,
            self.derivative_class(Property::HConvex, h, q)?,
            m_report,
        ];
        Ok(BoundValue::new(BoundId::Thm3, rhs, pre, notes))
    }

    /// `(M / (b-a)) (1/(np+1))^(1/p) ((x-a)^2 + (b-x)^2)`, the `h(t) = t^n`
    /// instance of `thm3`. Preconditions are checked for `t^n`, not the
    /// instance's own `h`.
    pub fn cor23_at(&self, x: f64, n: u32) -> Result<BoundValue, BoundError> {
        let (p, q) = self.require_pq(BoundId::Cor23)?;
        let h = HSpec::integer_power(n).map_err(|e| BoundError::Invalid(e.to_string()))?;
        let (m, m_report, mut notes) = self.m_certificate()?;
        let constant = cor23_constant(n, p);
        let rhs = m / self.inst.width() * constant * self.inst.spread(x);
        notes.push(format!(
            "t^{n} < t on (0, 1): the dominance hypothesis h(t) >= t fails for this h, so the \
             step ∫ t^p <= ∫ h(t^p) is reversed"
        ));
        notes.push(cor23_claim_note(n, p));
        let pre = vec![
            self.superadditive(&h)?,
            self.dominates(&h)?,
            self.derivative_class(Property::HConvex, &h, q)?,
            m_report,
        ];
        Ok(BoundValue::new(BoundId::Cor23, rhs, pre, notes))
    }

    /// `(2^(1/q) M / (2(b-a))) ((x-a)^2 + (b-x)^2) (∫_0^1 [h(t^2) + h(t-t^2)] dt)^(1/q)`,
    /// `q ≥ 1`.
    pub fn thm4_at(&self, x: f64) -> Result<BoundValue, BoundError> {
        let q = self.require_q(BoundId::Thm4)?;
        let (m, m_report, mut notes) = self.m_certificate()?;
        let (integral, int_notes) = self.pair_integral()?;
        notes.extend(int_notes);
        let factor = 2f64.powf(1.0 / q) * m / (2.0 * self.inst.width()) * self.inst.spread(x);
        let rhs = scaled(factor, integral.powf(1.0 / q));
        let h = &self.inst.h;
        let pre = vec![
            self.multiplicative(Multiplicativity::Super)?,
            self.dominates(h)?,
            self.derivative_class(Property::HConvex, h, q)?,
            m_report,
        ];
        Ok(BoundValue::new(BoundId::Thm4, rhs, pre, notes))
    }

    /// `[(x-a)^2 |f'((x+a)/2)| + (b-x)^2 |f'((x+b)/2)|] / ((b-a) 2^(1/q) (p+1)^(1/p) h(1/2)^(1/q))`.
    /// Needs no `M`.
    pub fn thm5_at(&self, x: f64) -> Result<BoundValue, BoundError> {
        let (p, q) = self.require_pq(BoundId::Thm5)?;
        let inst = &self.inst;
        let h = &inst.h;
        let h_half = h.eval(0.5)?;
        if h_half <= 0.0 {
            return Err(BoundError::Invalid(format!("h(1/2) = {h_half} must be positive")));
        }
        let prefactor = thm5_prefactor(p, q, h_half);
        let left = (x - inst.a).powi(2) / inst.width() * inst.f_prime.eval(0.5 * (x + inst.a))?.abs();
        let right = (inst.b - x).powi(2) / inst.width() * inst.f_prime.eval(0.5 * (x + inst.b))?.abs();
        let rhs = prefactor * (left + right);
        let pre = vec![
            self.superadditive(h)?,
            self.dominates(h)?,
            self.derivative_class(Property::HConcave, h, q)?,
        ];
        Ok(BoundValue::new(BoundId::Thm5, rhs, pre, Vec::new()))
    }

    /// Hadamard chain for `g = f` on `[a, b]`.
    pub fn hadamard(&self) -> Result<HadamardChain, BoundError> {
        let inst = &self.inst;
        let (integral, notes) = self.h_integral()?;
        let nonneg = self.certify(Property::Nonnegative, format!("f on {}", self.interval()), || {
            check_nonnegative(|u| inst.f.eval(u), inst.a, inst.b, inst.sampling)
        })?;
        let convex = self.certify(
            Property::HConvex,
            format!("f on {} with h = {}", self.interval(), inst.h),
            || check_h_convex(|u| inst.f.eval(u), &inst.h, inst.a, inst.b, inst.sampling),
        )?;
        let (left, middle, right) = chain_values(|u| inst.f.eval(u), &inst.h, inst.a, inst.b, integral, self.average()?)?;
        let preconditions = vec![nonneg, convex];
        let applicable = preconditions.iter().all(CertificateReport::holds);
        Ok(HadamardChain {
            left,
            middle,
            right,
            preconditions,
            applicable,
            notes,
        })
    }

    /// Any bound except the Hadamard chain at `x`. `n` is used by `cor23`.
    pub fn evaluate(&self, id: BoundId, x: f64, n: Option<u32>) -> Result<BoundValue, BoundError> {
        match id {
            BoundId::Classical => self.classical_at(x),
            BoundId::Thm2 => self.thm2_at(x),
            BoundId::Thm3 => self.thm3_at(x),
            BoundId::Cor23 => {
                let n = n
                    .or(match self.inst.h.kind() {
                        crate::hclass::HKind::IntegerPower(n) => Some(*n),
                        _ => None,
                    })
                    .ok_or_else(|| BoundError::Invalid("cor23 needs n >= 2".into()))?;
                self.cor23_at(x, n)
            }
            BoundId::Thm4 => self.thm4_at(x),
            BoundId::Thm5 => self.thm5_at(x),
            BoundId::Hadamard => {
                let chain = self.hadamard()?;
                Ok(BoundValue {
                    name: BoundId::Hadamard,
                    rhs: chain.right,
                    preconditions: chain.preconditions,
                    applicable: chain.applicable,
                    notes: chain.notes,
                })
            }
        }
    }
}

fn heuristic_note(m: f64) -> String {
    format!("M = {m} was estimated numerically; bounds that use it are heuristic, not certified")
}

/// `factor * integral`, keeping `+inf` when the integral diverged even if the
/// factor is zero.
fn scaled(factor: f64, integral: f64) -> f64 {
    if integral == f64::INFINITY {
        f64::INFINITY
    } else {
        factor * integral
    }
}

fn chain_values<G>(g: G, h: &HSpec, a: f64, b: f64, h_integral: f64, middle: f64) -> Result<(f64, f64, f64), BoundError>
where
    G: Fn(f64) -> Result<f64, DomainError>,
{
    let h_half = h.eval(0.5)?;
    let left = g(0.5 * (a + b))? / (2.0 * h_half);
    let right = scaled(g(a)? + g(b)?, h_integral);
    Ok((left, middle, right))
}

/// `1 / (2^(1/q) (p+1)^(1/p) h(1/2)^(1/q))`
pub fn thm5_prefactor(p: f64, q: f64, h_half: f64) -> f64 {
    1.0 / (2f64.powf(1.0 / q) * (p + 1.0).powf(1.0 / p) * h_half.powf(1.0 / q))
}

/// `(1/(np+1))^(1/p)`
pub fn cor23_constant(n: u32, p: f64) -> f64 {
    (1.0 / (n as f64 * p + 1.0)).powf(1.0 / p)
}

fn cor23_claim_note(n: u32, p: f64) -> String {
    let c = cor23_constant(n, p);
    let in_range = n as f64 > p && p > 1.0 && n <= 4;
    format!(
        "claimed (1/(np+1))^(1/p) < 1/2 for 4 >= n > p > 1: n = {n}, p = {p}, constant = {c}, \
         in claimed range: {in_range}, below 1/2: {}",
        c < 0.5
    )
}

/// `1/(2s+1) + Γ(s+1)^2 / Γ(2s+2)`, the value of
/// `∫_0^1 [t^(2s) + (t - t^2)^s] dt`. Panics unless `s ∈ (0, 1]`.
pub fn thm2_power_closed_form(s: f64) -> f64 {
    assert!(s > 0.0 && s <= 1.0, "s = {s} must lie in (0, 1]");
    let beta_term = (2.0 * log_gamma(s + 1.0).expect("s + 1 > 0") - log_gamma(2.0 * s + 2.0).expect("2s + 2 > 0")).exp();
    1.0 / (2.0 * s + 1.0) + beta_term
}

/// Power-mean bound at the midpoint:
/// `2^(1/q) M (b-a) / 4 * I^(1/q)` with `I = ∫_0^1 [h(t^2) + h(t-t^2)] dt`.
pub fn thm4_midpoint_form(m: f64, a: f64, b: f64, q: f64, integral: f64) -> f64 {
    2f64.powf(1.0 / q) * m * (b - a) / 4.0 * integral.powf(1.0 / q)
}

/// Power-mean bound at either endpoint: `2^(1/q) M (b-a) / 2 * I^(1/q)`.
pub fn thm4_endpoint_form(m: f64, a: f64, b: f64, q: f64, integral: f64) -> f64 {
    2f64.powf(1.0 / q) * m * (b - a) / 2.0 * integral.powf(1.0 / q)
}

/// h-concave midpoint bound:
/// `(b-a) / ((2^(2q+1))^(1/q) (p+1)^(1/p) h(1/2)^(1/q)) [|f'((3a+b)/4)| + |f'((a+3b)/4)|]`.
pub fn thm5_midpoint_form(f_prime: &Expr, a: f64, b: f64, p: f64, q: f64, h_half: f64) -> Result<f64, DomainError> {
    let d = f_prime.eval((3.0 * a + b) / 4.0)?.abs() + f_prime.eval((a + 3.0 * b) / 4.0)?.abs();
    let denom = 2f64.powf(2.0 * q + 1.0).powf(1.0 / q) * (p + 1.0).powf(1.0 / p) * h_half.powf(1.0 / q);
    Ok((b - a) / denom * d)
}

/// The `h(t) = t` case of [`thm5_midpoint_form`]:
/// `(b-a) / (4 (p+1)^(1/p)) [|f'((3a+b)/4)| + |f'((a+3b)/4)|]`.
pub fn midpoint_concave_bound(f_prime: &Expr, a: f64, b: f64, p: f64) -> Result<f64, DomainError> {
    let d = f_prime.eval((3.0 * a + b) / 4.0)?.abs() + f_prime.eval((a + 3.0 * b) / 4.0)?.abs();
    Ok((b - a) / (4.0 * (p + 1.0).powf(1.0 / p)) * d)
}

pub fn lhs(inst: &ProblemInstance) -> Result<f64, BoundError> {
    BoundEngine::new(inst.clone()).lhs_at(inst.x)
}

/// `|(f(x) - avg) - [(x-a)^2/(b-a) ∫ t f'(tx+(1-t)a) dt - (b-x)^2/(b-a) ∫ t f'(tx+(1-t)b) dt]|`
pub fn montgomery_residual(inst: &ProblemInstance) -> Result<f64, BoundError> {
    let engine = BoundEngine::new(inst.clone());
    let (a, b, x) = (inst.a, inst.b, inst.x);
    let signed = inst.f.eval(x)? - engine.average()?;
    let kernel = |end: f64| -> Result<f64, BoundError> {
        let r = integrate(|t: f64| Ok::<_, DomainError>(t * inst.f_prime.eval(t * x + (1.0 - t) * end)?), 0.0, 1.0, INTEGRAL_TOL)?;
        if !r.converged() {
            return Err(BoundError::Quadrature {
                what: format!("∫ t f'(tx + (1-t){end}) dt"),
                status: r.status,
            });
        }
        Ok(r.value)
    };
    let w = b - a;
    let identity = (x - a).powi(2) / w * kernel(a)? - (b - x).powi(2) / w * kernel(b)?;
    Ok((signed - identity).abs())
}

pub fn classical_rhs(inst: &ProblemInstance) -> Result<BoundValue, BoundError> {
    BoundEngine::new(inst.clone()).classical_at(inst.x)
}

pub fn thm2_rhs(inst: &ProblemInstance) -> Result<BoundValue, BoundError> {
    BoundEngine::new(inst.clone()).thm2_at(inst.x)
}

pub fn thm3_rhs(inst: &ProblemInstance) -> Result<BoundValue, BoundError> {
    BoundEngine::new(inst.clone()).thm3_at(inst.x)
}

pub fn cor23_rhs(inst: &ProblemInstance, n: u32) -> Result<BoundValue, BoundError> {
    BoundEngine::new(inst.clone()).cor23_at(inst.x, n)
}

pub fn thm4_rhs(inst: &ProblemInstance) -> Result<BoundValue, BoundError> {
    BoundEngine::new(inst.clone()).thm4_at(inst.x)
}

pub fn thm5_rhs(inst: &ProblemInstance) -> Result<BoundValue, BoundError> {
    BoundEngine::new(inst.clone()).thm5_at(inst.x)
}

/// Hadamard chain for an arbitrary evaluator `g`, with its h-convexity
/// check attached.
pub fn hadamard_chain<G>(g: G, h: &HSpec, a: f64, b: f64, sampling: Sampling) -> Result<HadamardChain, BoundError>
where
    G: Fn(f64) -> Result<f64, DomainError>,
{
    if !(a < b) {
        return Err(BoundError::Invalid(format!("need a < b, got [{a}, {b}]")));
    }
    let mut notes = Vec::new();
    let integral = unit_integral(&format!("∫ h(t) dt for h = {h}"), |t| h.eval(t), &mut notes)?;
    let tol = INTEGRAL_TOL * (b - a) * (1.0 + g(0.5 * (a + b))?.abs());
    let r = integrate(&g, a, b, tol)?;
    if !r.converged() {
        return Err(BoundError::Quadrature {
            what: "g".into(),
            status: r.status,
        });
    }
    let (left, middle, right) = chain_values(&g, h, a, b, integral, r.value / (b - a))?;
    let report = check_h_convex(&g, h, a, b, sampling)?;
    let applicable = report.holds();
    Ok(HadamardChain {
        left,
        middle,
        right,
        preconditions: vec![report],
        applicable,
        notes,
    })
}
