//! First-order surrogates used by the SCA inner loops.

use crate::convex::Real;

/// Tangent of `exp` at `x0`, evaluated at `x`. A global lower bound of `exp(x)`.
pub fn exp_tangent<T: Real>(x: T, x0: f64) -> T {
    let e0 = x0.exp();
    (x - x0) * e0 + e0
}

/// Tangent of a scalar function with value `f0` and slope `df0` at `x0`.
pub fn linear<T: Real>(x: T, x0: f64, f0: f64, df0: f64) -> T {
    (x - x0) * df0 + f0
}

/// Convex upper bound of the product `p * t`, tight at `(p0, t0)`:
/// `pt = ((p+t)/2)^2 - ((p-t)/2)^2` with the concave part linearised.
pub fn bilinear_upper<T: Real>(p: T, t: T, p0: f64, t0: f64) -> T {
    let d0 = p0 - t0;
    (p + t).powi(2) * 0.25 + 0.25 * d0 * d0 - (p - t) * (0.5 * d0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn exp_tangent_is_minorant(x in -20.0f64..5.0, x0 in -20.0f64..5.0) {
            let s = exp_tangent(x, x0);
            prop_assert!(s <= x.exp() * (1.0 + 1e-12) + 1e-300);
            prop_assert!((exp_tangent(x0, x0) - x0.exp()).abs() <= 1e-10 * x0.exp());
        }

        #[test]
        fn bilinear_is_majorant(p in 0.0f64..2.0, t in 0.0f64..2.0, p0 in 0.0f64..2.0, t0 in 0.0f64..2.0) {
            let s = bilinear_upper(p, t, p0, t0);
            prop_assert!(s >= p * t - 1e-12);
            prop_assert!((bilinear_upper(p0, t0, p0, t0) - p0 * t0).abs() <= 1e-12);
        }
    }
}
