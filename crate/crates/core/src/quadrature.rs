//! Adaptive definite integration on open panels and supremum estimation.
//!
//! Every panel is integrated with a 5-point Gauss-Legendre rule, whose nodes
//! are interior, so endpoints are never sampled. The error of a panel is the
//! difference between the whole-panel rule and the sum over its two halves.
//! The panel with the largest error is bisected until the summed error meets
//! the tolerance, a panel reaches the depth limit, or the panel budget runs
//! out. A non-converged run is then probed with dyadic shells toward each
//! endpoint to tell an endpoint singularity with unbounded mass apart from a
//! merely stubborn integrand.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::convert::Infallible;

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_08,
    0.478_628_670_499_366_47,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
];

/// Consecutive non-decreasing dyadic shells that flag divergence.
pub const DIVERGENCE_SHELLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum QuadStatus {
    Converged,
    MaxDepthReached,
    DivergenceSuspected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QuadResult<T> {
    pub value: T,
    /// Absolute error estimate.
    pub error_estimate: T,
    pub status: QuadStatus,
    pub panels: usize,
}

impl<T: Real> QuadResult<T> {
    pub fn converged(&self) -> bool {
        self.status == QuadStatus::Converged
    }

    pub fn diverged(&self) -> bool {
        self.status == QuadStatus::DivergenceSuspected
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub max_depth: usize,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            max_depth: 60,
            max_panels: 20_000,
        }
    }
}

fn gauss<T, E, F>(f: &mut F, lo: T, hi: T) -> Result<T, E>
where
    T: Real,
    F: FnMut(T) -> Result<T, E>,
{
    let half = (hi - lo) / T::lit(2.0);
    let mid = lo + half;
    let mut acc = T::zero();
    for (node, weight) in GL_NODES.iter().zip(GL_WEIGHTS) {
        acc = acc + T::lit(weight) * f(mid + half * T::lit(*node))?;
    }
    Ok(acc * half)
}

struct Panel<T> {
    lo: T,
    hi: T,
    depth: usize,
    left: T,
    right: T,
    err: T,
}

impl<T: Real> Panel<T> {
    fn build<E, F>(f: &mut F, lo: T, hi: T, whole: T, depth: usize) -> Result<Self, E>
    where
        F: FnMut(T) -> Result<T, E>,
    {
        let mid = lo + (hi - lo) / T::lit(2.0);
        let left = gauss(f, lo, mid)?;
        let right = gauss(f, mid, hi)?;
        let err = (left + right - whole).abs();
        Ok(Panel {
            lo,
            hi,
            depth,
            left,
            right,
            err,
        })
    }

    fn value(&self) -> T {
        self.left + self.right
    }

    fn splittable(&self, max_depth: usize) -> bool {
        let mid = self.lo + (self.hi - self.lo) / T::lit(2.0);
        self.depth < max_depth && mid > self.lo && mid < self.hi
    }
}

impl<T: Real> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T: Real> Eq for Panel<T> {}
impl<T: Real> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        // Ties broken by position so the bisection order is deterministic.
        self.err
            .partial_cmp(&other.err)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.lo.partial_cmp(&self.lo).unwrap_or(Ordering::Equal))
    }
}

/// Integrates `f` over `(a, b)` to absolute tolerance `tol`, with the default
/// depth limit of 60 bisections.
///
/// Panics if `a >= b` or `tol <= 0`.
pub fn integrate<T, E, F>(f: F, a: T, b: T, tol: T) -> Result<QuadResult<T>, E>
where
    T: Real,
    F: FnMut(T) -> Result<T, E>,
{
    integrate_with(f, a, b, tol, QuadOptions::default())
}

/// [`integrate`] for integrands that cannot fail.
pub fn integrate_pure<T, F>(mut f: F, a: T, b: T, tol: T) -> QuadResult<T>
where
    T: Real,
    F: FnMut(T) -> T,
{
    match integrate(|t| Ok::<T, Infallible>(f(t)), a, b, tol) {
        Ok(r) => r,
        Err(never) => match never {},
    }
}

pub fn integrate_with<T, E, F>(
    mut f: F,
    a: T,
    b: T,
    tol: T,
    opts: QuadOptions,
) -> Result<QuadResult<T>, E>
where
    T: Real,
    F: FnMut(T) -> Result<T, E>,
{
    assert!(a < b, "integration interval must satisfy a < b");
    assert!(tol > T::zero(), "tolerance must be positive");

    let mut non_finite = false;
    let mut guarded = |t: T| -> Result<T, E> {
        let v = f(t)?;
        if !v.is_finite() {
            non_finite = true;
            return Ok(T::zero());
        }
        Ok(v)
    };

    let whole = gauss(&mut guarded, a, b)?;
    let mut heap = BinaryHeap::new();
    heap.push(Panel::build(&mut guarded, a, b, whole, 0)?);
    let mut panels = 1usize;
    let mut status = QuadStatus::Converged;
    let mut iterations = 0usize;
    let mut total_err = heap.peek().unwrap().err;

    while total_err > tol {
        let worst = heap.peek().unwrap();
        if !worst.splittable(opts.max_depth) || panels >= opts.max_panels {
            status = QuadStatus::MaxDepthReached;
            break;
        }
        let worst = heap.pop().unwrap();
        let mid = worst.lo + (worst.hi - worst.lo) / T::lit(2.0);
        let left = Panel::build(&mut guarded, worst.lo, mid, worst.left, worst.depth + 1)?;
        let right = Panel::build(&mut guarded, mid, worst.hi, worst.right, worst.depth + 1)?;
        total_err = total_err - worst.err + left.err + right.err;
        heap.push(left);
        heap.push(right);
        panels += 1;
        iterations += 1;
        if iterations.is_multiple_of(64) {
            total_err = heap.iter().fold(T::zero(), |acc, p| acc + p.err);
        }
    }

    let mut parts: Vec<Panel<T>> = heap.into_vec();
    parts.sort_by(|p, q| p.lo.partial_cmp(&q.lo).unwrap_or(Ordering::Equal));
    let value = parts.iter().fold(T::zero(), |acc, p| acc + p.value());
    let error_estimate = parts.iter().fold(T::zero(), |acc, p| acc + p.err);
    if status == QuadStatus::Converged && error_estimate > tol {
        status = QuadStatus::MaxDepthReached;
    }

    let shells = status != QuadStatus::Converged
        && (shells_diverge(&mut guarded, a, b, true)? || shells_diverge(&mut guarded, a, b, false)?);
    if non_finite || shells {
        status = QuadStatus::DivergenceSuspected;
    }

    Ok(QuadResult {
        value,
        error_estimate,
        status,
        panels,
    })
}

/// Mass of the dyadic shells `[a + w 2^-(k+1), a + w 2^-k]` (or mirrored at
/// `b`), from the outermost shell inward, stopping where shells can no longer
/// be resolved in floating point.
pub fn shell_masses<T, E, F>(f: &mut F, a: T, b: T, toward_a: bool) -> Result<Vec<T>, E>
where
    T: Real,
    F: FnMut(T) -> Result<T, E>,
{
    let width = b - a;
    let anchor = if toward_a { a } else { b };
    let scale = a.abs().max(b.abs()).max(T::min_positive_value());
    let floor = T::lit(1e3) * T::epsilon() * scale;
    let mut masses = Vec::new();
    let mut outer = width;
    for _ in 0..=QuadOptions::default().max_depth {
        let inner = outer / T::lit(2.0);
        if inner <= floor {
            break;
        }
        let (lo, hi) = if toward_a {
            (anchor + inner, anchor + outer)
        } else {
            (anchor - outer, anchor - inner)
        };
        masses.push(gauss(f, lo, hi)?.abs());
        outer = inner;
    }
    Ok(masses)
}

fn shells_diverge<T, E, F>(f: &mut F, a: T, b: T, toward_a: bool) -> Result<bool, E>
where
    T: Real,
    F: FnMut(T) -> Result<T, E>,
{
    let masses = shell_masses(f, a, b, toward_a)?;
    Ok(masses_diverge(&masses))
}

/// True when the innermost shells carry non-decreasing, non-zero mass for
/// [`DIVERGENCE_SHELLS`] consecutive steps.
pub fn masses_diverge<T: Real>(masses: &[T]) -> bool {
    if masses.len() <= DIVERGENCE_SHELLS {
        return false;
    }
    let slack = T::one() - T::lit(1e-9);
    masses[masses.len() - DIVERGENCE_SHELLS - 1..]
        .windows(2)
        .all(|w| w[0] > T::zero() && w[1] >= w[0] * slack)
}

/// Heuristic bound on `sup |f|` over `[a, b]`. Never certified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupEstimate<T> {
    pub value: T,
    /// Location of the maximum found; absent for user-supplied bounds.
    pub argmax: Option<T>,
    /// True only when the value was supplied by the user.
    pub guaranteed: bool,
}

impl<T: Real> SupEstimate<T> {
    pub fn user(value: T) -> Self {
        SupEstimate {
            value,
            argmax: None,
            guaranteed: true,
        }
    }
}

const SUP_GRID: usize = 1025;
const GOLDEN_ITERATIONS: usize = 40;

/// Scans `|f|` on a 1025-point grid, refines around the best cell with 40
/// golden-section steps and inflates the result by `1 + 1e-9`.
pub fn estimate_sup_abs<T, E, F>(mut f: F, a: T, b: T) -> Result<SupEstimate<T>, E>
where
    T: Real,
    F: FnMut(T) -> Result<T, E>,
{
    assert!(a < b, "interval must satisfy a < b");
    let grid = crate::scalar::linspace(a, b, SUP_GRID);
    let mut best = (a, T::neg_infinity());
    let mut best_idx = 0;
    for (i, &u) in grid.iter().enumerate() {
        let v = f(u)?.abs();
        if v > best.1 {
            best = (u, v);
            best_idx = i;
        }
    }

    let mut lo = grid[best_idx.saturating_sub(1)];
    let mut hi = grid[(best_idx + 1).min(SUP_GRID - 1)];
    let inv_phi = T::lit((5.0_f64.sqrt() - 1.0) / 2.0);
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c)?.abs();
    let mut fd = f(d)?.abs();
    for _ in 0..GOLDEN_ITERATIONS {
        if fc > best.1 {
            best = (c, fc);
        }
        if fd > best.1 {
            best = (d, fd);
        }
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c)?.abs();
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d)?.abs();
        }
    }
    for (u, v) in [(c, fc), (d, fd)] {
        if v > best.1 {
            best = (u, v);
        }
    }

    Ok(SupEstimate {
        value: best.1 * (T::one() + T::lit(1e-9)),
        argmax: Some(best.0),
        guaranteed: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn simple_integrals() {
        let r = integrate_pure(|t: f64| t, 0.0, 1.0, 1e-10);
        assert!(r.converged());
        assert!((r.value - 0.5).abs() < 1e-14);
        assert!(r.panels >= 1);

        let r = integrate_pure(|t: f64| t * t + (t - t * t), 0.0, 1.0, 1e-10);
        assert!((r.value - 0.5).abs() < 1e-14);
    }

    #[test]
    fn endpoint_singular_but_integrable() {
        let r = integrate_pure(|t: f64| (t - t * t).sqrt(), 0.0, 1.0, 1e-9);
        assert!(r.converged(), "{r:?}");
        assert!((r.value - PI / 8.0).abs() < 1e-9);
        assert!((r.value - PI / 8.0).abs() <= r.error_estimate.max(1e-12), "{r:?} vs {}", PI / 8.0);

        let r = integrate_pure(|t: f64| 1.0 / t.sqrt(), 0.0, 1.0, 1e-9);
        assert!(r.converged(), "{r:?}");
        assert!((r.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn reciprocal_square_diverges() {
        let r = integrate_pure(|t: f64| 1.0 / (t * t), 0.0, 1.0, 1e-8);
        assert_eq!(r.status, QuadStatus::DivergenceSuspected);
        let r = integrate_pure(|t: f64| 1.0 / t, 0.0, 1.0, 1e-8);
        assert_eq!(r.status, QuadStatus::DivergenceSuspected);
        // singular at the right end
        let r = integrate_pure(|t: f64| 1.0 / (1.0 - t), 0.0, 1.0, 1e-8);
        assert_eq!(r.status, QuadStatus::DivergenceSuspected);
    }

    #[test]
    fn shell_oracle_for_reciprocal_square() {
        // each shell of t^-2 carries mass 2^k: unbounded partial sums
        let mut f = |t: f64| Ok::<f64, Infallible>(1.0 / (t * t));
        let masses = shell_masses(&mut f, 0.0, 1.0, true).unwrap();
        for (k, m) in masses.iter().enumerate().take(20) {
            let exact = 2f64.powi(k as i32);
            assert!((m - exact).abs() / exact < 1e-3, "shell {k}: {m}");
        }
        assert!(masses_diverge(&masses));
        // t^-1/2 shells shrink by sqrt(2)
        let mut g = |t: f64| Ok::<f64, Infallible>(1.0 / t.sqrt());
        assert!(!masses_diverge(&shell_masses(&mut g, 0.0, 1.0, true).unwrap()));
    }

    #[test]
    fn zero_tail_is_not_divergent() {
        assert!(!masses_diverge(&[0.0_f64; 20]));
    }

    #[test]
    fn domain_error_propagates() {
        let e = crate::expr::parse("ln(x - 0.5)").unwrap();
        let r = integrate(|t: f64| e.eval(t), 0.0, 1.0, 1e-8);
        assert!(r.is_err());
    }

    #[test]
    fn max_depth_reported() {
        let opts = QuadOptions {
            max_depth: 3,
            max_panels: 1000,
        };
        let r = integrate_with(
            |t: f64| Ok::<f64, Infallible>(t.sqrt()),
            0.0,
            1.0,
            1e-14,
            opts,
        )
        .unwrap();
        assert_eq!(r.status, QuadStatus::MaxDepthReached);
        assert!((r.value - 2.0 / 3.0).abs() < 1e-3);
    }

    #[test]
    fn works_in_f32() {
        let r = integrate_pure(|t: f32| t * t, 0.0, 1.0, 1e-5);
        assert!((r.value - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn sup_estimates() {
        let s = estimate_sup_abs(|u: f64| Ok::<f64, Infallible>(2.0 * u), 0.0, 1.0).unwrap();
        assert!((s.value - 2.0).abs() < 1e-8);
        assert!((s.argmax.unwrap() - 1.0).abs() < 1e-9);
        assert!(!s.guaranteed);

        let s = estimate_sup_abs(|u: f64| Ok::<f64, Infallible>(u.cos()), 0.0, PI).unwrap();
        assert!((s.value - 1.0).abs() < 1e-8);
        let am = s.argmax.unwrap();
        assert!(am < 1e-3 || (PI - am) < 1e-3);

        let s = estimate_sup_abs(|u: f64| Ok::<f64, Infallible>(3.0 * u * u - 1.0), -1.0, 1.0)
            .unwrap();
        assert!((s.value - 2.0).abs() < 1e-8);
        assert!((s.argmax.unwrap().abs() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sup_refines_interior_peak() {
        // peak at 1/3, off every grid node
        let s = estimate_sup_abs(
            |u: f64| Ok::<f64, Infallible>(1.0 - (u - 1.0 / 3.0).powi(2)),
            0.0,
            1.0,
        )
        .unwrap();
        assert!(s.value >= 1.0);
        assert!((s.argmax.unwrap() - 1.0 / 3.0).abs() < 1e-6);
    }
}
