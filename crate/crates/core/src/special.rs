//! Log-gamma and Euler beta function.

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("{function} requires a strictly positive argument, got {value}")]
pub struct SpecialDomainError {
    pub function: &'static str,
    pub value: f64,
}

// Lanczos approximation, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0`.
pub fn log_gamma<T: Real>(x: T) -> Result<T, SpecialDomainError> {
    if !(x > T::zero()) || !x.is_finite() {
        return Err(SpecialDomainError {
            function: "log_gamma",
            value: x.to_f64_lossy(),
        });
    }
    if x < T::lit(0.5) {
        // Γ(x) = Γ(x + 1) / x keeps the series in its accurate range
        return Ok(lanczos_ln(x + T::one()) - x.ln());
    }
    Ok(lanczos_ln(x))
}

fn lanczos_ln<T: Real>(x: T) -> T {
    let z = x - T::one();
    let mut series = T::lit(LANCZOS[0]);
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        series = series + T::lit(*c) / (z + T::from_usize(i).unwrap());
    }
    let w = z + T::lit(LANCZOS_G + 0.5);
    let half_ln_two_pi = T::lit(0.918_938_533_204_672_8);
    half_ln_two_pi + (z + T::lit(0.5)) * w.ln() - w + series.ln()
}

/// `Γ(x)` for `x > 0`, via [`log_gamma`].
pub fn gamma<T: Real>(x: T) -> Result<T, SpecialDomainError> {
    log_gamma(x).map(T::exp)
}

/// `B(x, y) = Γ(x)Γ(y)/Γ(x+y)`, computed in log space.
pub fn beta<T: Real>(x: T, y: T) -> Result<T, SpecialDomainError> {
    let check = |v: T| {
        if v > T::zero() {
            Ok(())
        } else {
            Err(SpecialDomainError {
                function: "beta",
                value: v.to_f64_lossy(),
            })
        }
    };
    check(x)?;
    check(y)?;
    Ok((log_gamma(x)? + log_gamma(y)? - log_gamma(x + y)?).exp())
}
