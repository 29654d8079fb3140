use std::convert::Infallible;

use ostrowski_bounds::quadrature::{estimate_sup_abs, integrate, integrate_pure, QuadStatus};
use ostrowski_bounds::special::{beta, log_gamma};
use proptest::prelude::*;

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn poly_integral(coeffs: &[f64], a: f64, b: f64) -> f64 {
    let anti = |x: f64| {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * x.powi(k as i32 + 1) / (k as f64 + 1.0))
            .sum::<f64>()
    };
    anti(b) - anti(a)
}

proptest! {
    #[test]
    fn polynomials_up_to_degree_nine_are_exact(
        coeffs in prop::collection::vec(-3.0f64..3.0, 1..10),
        a in -2.0f64..1.0,
        w in 0.1f64..3.0,
    ) {
        let b = a + w;
        let r = integrate_pure(|x| poly(&coeffs, x), a, b, 1e-12);
        let exact = poly_integral(&coeffs, a, b);
        prop_assert_eq!(r.status, QuadStatus::Converged);
        prop_assert!((r.value - exact).abs() <= 1e-11 * (1.0 + exact.abs()), "{} vs {}", r.value, exact);
    }

    #[test]
    fn integrals_are_additive(a in -1.0f64..0.0, m in 0.1f64..1.0, w in 0.1f64..1.0) {
        let b = a + m;
        let c = b + w;
        let f = |x: f64| (3.0 * x).sin() * x.exp();
        let whole = integrate_pure(f, a, c, 1e-12).value;
        let parts = integrate_pure(f, a, b, 1e-12).value + integrate_pure(f, b, c, 1e-12).value;
        prop_assert!((whole - parts).abs() <= 1e-10);
    }

    #[test]
    fn affine_change_of_variables(a in -1.0f64..0.0, w in 0.1f64..2.0) {
        let f = |x: f64| 1.0 / (1.0 + x * x);
        let direct = integrate_pure(f, a, a + w, 1e-12).value;
        let unit = integrate_pure(|t: f64| w * f(a + w * t), 0.0, 1.0, 1e-12).value;
        prop_assert!((direct - unit).abs() <= 1e-11);
        prop_assert!((direct - ((a + w).atan() - a.atan())).abs() <= 1e-11);
    }

    #[test]
    fn beta_matches_its_integral(x in 1.0f64..4.0, y in 1.0f64..4.0) {
        let r = integrate_pure(|t: f64| t.powf(x - 1.0) * (1.0 - t).powf(y - 1.0), 0.0, 1.0, 1e-12);
        let b = beta(x, y).unwrap();
        prop_assert!((r.value - b).abs() <= 1e-9 * b);
    }

    #[test]
    fn log_gamma_recurrence(x in 0.5f64..20.0) {
        let lhs = log_gamma(x + 1.0).unwrap();
        let rhs = log_gamma(x).unwrap() + x.ln();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn sup_estimate_dominates_samples(c in -2.0f64..2.0, k in 0.5f64..4.0) {
        let f = |x: f64| Ok::<_, Infallible>((k * x).sin() + c * x);
        let est = estimate_sup_abs(f, 0.0, 3.0).unwrap();
        for i in 0..=300 {
            let x = i as f64 * 0.01;
            prop_assert!(f(x).unwrap().abs() <= est.value);
        }
        prop_assert!(!est.guaranteed);
    }
}

#[test]
fn beta_reference_pairs() {
    for (x, y) in [(1.0, 1.0), (2.0, 2.0), (1.5, 1.5), (0.5, 0.5)] {
        let r = integrate_pure(|t: f64| t.powf(x - 1.0) * (1.0 - t).powf(y - 1.0), 0.0, 1.0, 1e-10);
        let b = beta(x, y).unwrap();
        assert!((r.value - b).abs() <= 1e-7, "B({x}, {y}): {} vs {b}", r.value);
    }
}

#[test]
fn endpoint_singularities() {
    let r = integrate_pure(|t: f64| 1.0 / t.sqrt(), 0.0, 1.0, 1e-9);
    assert_eq!(r.status, QuadStatus::Converged);
    assert!((r.value - 2.0).abs() < 1e-8);
    let r = integrate_pure(|t: f64| 1.0 / t, 0.0, 1.0, 1e-10);
    assert_eq!(r.status, QuadStatus::DivergenceSuspected);
    let r = integrate_pure(|t: f64| 1.0 / (1.0 - t), 0.0, 1.0, 1e-10);
    assert_eq!(r.status, QuadStatus::DivergenceSuspected);
}

#[test]
fn domain_errors_propagate() {
    let r = integrate(|t: f64| if t > 0.5 { Err("boom") } else { Ok(t) }, 0.0, 1.0, 1e-10);
    assert_eq!(r.unwrap_err(), "boom");
}
