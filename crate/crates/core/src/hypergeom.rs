//! The terminating series `F([1, 1, -m], [2, 2], z)` and the binomial
//! expectations it encodes.
//!
//! At the arguments that occur, `z = -pi/(1 - pi)`, the series terms are
//! all positive and grow like `(pi/(1-pi))^k C(m, k)`, so the hazard is
//! overflow rather than cancellation. The identity
//!
//! ```text
//! (1 - pi)^m F([1, 1, -m], [2, 2], -pi/(1 - pi)) = E[1/(B + 1)^2],  B ~ Bin(m, pi)
//! ```
//!
//! turns every prefactor-times-series product into a bounded expectation
//! over normalised binomial weights.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::numeric::{ratio_to_f64, NeumaierSum, Scalar};

/// Largest tolerated ratio of `sum |t_k|` to `|sum t_k|` before the float
/// series is abandoned for exact arithmetic.
const CANCELLATION_LIMIT: f64 = 1e4;

/// `sum_{k=0..m} (-m)_k z^k / ((k+1)! (k+1))`, compensated.
///
/// For `z > 0` the terms alternate; when the cancellation ratio exceeds
/// [`CANCELLATION_LIMIT`] the value is recomputed in rationals from the
/// exact binary value of `z`. Overflows to infinity when the true value
/// exceeds the double range, which happens for large `m` and `z < -1`; use
/// the scaled forms below in that regime.
pub fn f22_terminating(m: u32, z: f64) -> f64 {
    let mut acc = NeumaierSum::new();
    let mut magnitude = 0.0;
    // term_k = (-m)_k z^k / (k+1)!
    let mut term = 1.0;
    for k in 0..=m {
        let t = term / (k + 1) as f64;
        acc.add(t);
        magnitude += t.abs();
        term *= (k as f64 - m as f64) * z / (k + 2) as f64;
    }
    let sum = acc.total();
    if magnitude.is_finite() && magnitude > CANCELLATION_LIMIT * sum.abs() {
        if let Some(exact) = BigRational::from_float(z) {
            return ratio_to_f64(&f22_rational(m, &exact));
        }
    }
    sum
}

/// Exact value of the same series.
pub fn f22_rational(m: u32, z: &BigRational) -> BigRational {
    let mut sum = BigRational::zero();
    let mut term = BigRational::one();
    for k in 0..=m {
        sum += &term / BigRational::from_integer(BigInt::from(k + 1));
        term = term * BigRational::from_integer(BigInt::from(k as i64 - m as i64)) * z
            / BigRational::from_integer(BigInt::from(k + 2));
    }
    sum
}

/// `E[1/(B + 1)^2]` for `B ~ Bin(m, pi)`.
pub fn inv_sq_mean<T: Scalar>(m: u32, pi: &T) -> T {
    let w = T::binomial_weights(m, pi);
    let mut acc = T::Acc::default();
    for (k, wk) in w.into_iter().enumerate() {
        let d = T::from_u64(k as u64 + 1);
        T::acc_add(&mut acc, wk / (d.clone() * d));
    }
    T::acc_total(&acc)
}

/// `E[1/K; K >= 1]` for `K ~ Bin(n, pi)`.
pub fn inv_mean_positive<T: Scalar>(n: u32, pi: &T) -> T {
    let w = T::binomial_weights(n, pi);
    let mut acc = T::Acc::default();
    for (k, wk) in w.into_iter().enumerate().skip(1) {
        T::acc_add(&mut acc, wk / T::from_u64(k as u64));
    }
    T::acc_total(&acc)
}

fn check_open_unit(pi: f64) -> Result<()> {
    if !(pi > 0.0 && pi < 1.0) {
        return Err(Error::domain("pi", format!("{pi} is not in (0, 1)")));
    }
    Ok(())
}

/// `N (N-1) pi^2 (1-pi)^(N-2) F([1, 1, 2-N], [2, 2], -pi/(1-pi))`.
pub fn scaled_binom_term(n: u32, pi: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::domain("n", format!("need n >= 2, got {n}")));
    }
    check_open_unit(pi)?;
    let nn = n as f64;
    Ok(nn * (nn - 1.0) * pi * pi * inv_sq_mean(n - 2, &pi))
}

/// The same quantity evaluated literally from the series in exact
/// arithmetic; used as the reference for the float kernel.
pub fn scaled_binom_term_exact(n: u32, pi: &BigRational) -> Result<BigRational> {
    if n < 2 {
        return Err(Error::domain("n", format!("need n >= 2, got {n}")));
    }
    if *pi <= BigRational::zero() || *pi >= BigRational::one() {
        return Err(Error::domain("pi", "not in (0, 1)"));
    }
    let q = BigRational::one() - pi;
    let z = -(pi / &q);
    let nn = BigRational::from_integer(BigInt::from(n));
    let pre = &nn * (&nn - BigRational::one()) * pi * pi * q.powu(n - 2);
    Ok(pre * f22_rational(n - 2, &z))
}

/// Leading large-`N` behaviour `1 + 1/(N pi)`.
pub fn scaled_binom_asymptotic(n: u32, pi: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("n", "need n >= 1"));
    }
    check_open_unit(pi)?;
    Ok(1.0 + 1.0 / (n as f64 * pi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn short_series() {
        assert_eq!(f22_terminating(0, 3.7), 1.0);
        for z in [-2.0, -0.5, 0.0, 0.25, 1.5] {
            assert!((f22_terminating(1, z) - (1.0 - z / 4.0)).abs() < 1e-15);
        }
        assert_eq!(f22_rational(1, &q(1, 2)), q(7, 8));
    }

    #[test]
    fn nine_terms_against_rational() {
        let exact = ratio_to_f64(&f22_rational(8, &q(-1, 2)));
        let got = f22_terminating(8, -0.5);
        assert!((got - exact).abs() <= 1e-15 * exact.abs());
    }

    #[test]
    fn alternating_series_falls_back_to_rationals() {
        // plain summation loses about seven digits here
        let exact = ratio_to_f64(&f22_rational(59, &q(1, 1)));
        assert!((f22_terminating(59, 1.0) - exact).abs() <= 1e-15 * exact);
    }

    #[test]
    fn binomial_form_matches_series() {
        // (1-pi)^m F(m, -pi/(1-pi)) is the inverse-square binomial mean
        for (m, num, den) in [(0, 1, 3), (5, 2, 5), (12, 9, 10), (20, 1, 7)] {
            let pi = q(num, den);
            let one_minus = BigRational::one() - &pi;
            let lhs = one_minus.powu(m) * f22_rational(m, &(-(&pi / &one_minus)));
            assert_eq!(lhs, inv_sq_mean(m, &pi));
        }
    }

    #[test]
    fn scaled_term_examples() {
        assert_eq!(scaled_binom_term(2, 0.5).unwrap(), 0.5);
        let exact = ratio_to_f64(&scaled_binom_term_exact(6, &q(2, 5)).unwrap());
        assert!((scaled_binom_term(6, 0.4).unwrap() - exact).abs() < 1e-15);
        let v = scaled_binom_term(100, 1.0 / 3.0).unwrap();
        // next order is about 1.8/(N pi)^2
        assert!((v - 1.03).abs() < 2.0 / (100.0f64 / 3.0).powi(2), "{v}");
        assert!(scaled_binom_term(10, 0.0).is_err());
        assert!(scaled_binom_term(10, 1.0).is_err());
        assert!(scaled_binom_asymptotic(10, 0.0).is_err());
        assert!((scaled_binom_asymptotic(100, 1.0 / 3.0).unwrap() - 1.03).abs() < 1e-15);
    }

    #[test]
    fn asymptotic_gap_is_second_order() {
        let gap = |n| {
            (scaled_binom_term(n, 1.0 / 3.0).unwrap()
                - scaled_binom_asymptotic(n, 1.0 / 3.0).unwrap())
            .abs()
        };
        assert!(gap(400) <= 4.0 * gap(800) * 1.5);
        assert!(scaled_binom_asymptotic(1_000_000_000, 0.5).unwrap() - 1.0 < 1e-8);
    }

    #[test]
    fn inverse_mean_small_case() {
        // K ~ Bin(2, 1/2): P(1) = 1/2, P(2) = 1/4
        assert_eq!(inv_mean_positive(2, &q(1, 2)), q(5, 8));
    }
}
