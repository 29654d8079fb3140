//! Scalar abstraction shared by the numerical kernels.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar the quadrature, special-function and mean kernels
/// are written against. Implemented for `f32` and `f64`.
pub trait Real: Float + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static {
    /// Lossy conversion from an `f64` literal.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `n` evenly spaced points covering `[lo, hi]` inclusive. A single point
/// collapses to the midpoint.
pub fn linspace<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![(lo + hi) / T::lit(2.0)],
        _ => {
            let step = (hi - lo) / T::from_usize(n - 1).unwrap();
            (0..n)
                .map(|i| {
                    if i == n - 1 {
                        hi
                    } else {
                        lo + step * T::from_usize(i).unwrap()
                    }
                })
                .collect()
        }
    }
}

/// Relative comparison slack used throughout: `tol * (1 + |reference|)`.
pub fn slack<T: Real>(tol: T, reference: T) -> T {
    tol * (T::one() + reference.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_hits_both_ends() {
        let xs = linspace(0.0_f64, 1.0, 3);
        assert_eq!(xs, vec![0.0, 0.5, 1.0]);
        let xs = linspace(0.0_f32, 3.0, 4);
        assert_eq!(xs, vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(linspace(2.0_f64, 4.0, 1), vec![3.0]);
        assert!(linspace(0.0_f64, 1.0, 0).is_empty());
    }
}
