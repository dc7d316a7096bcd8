//! The raw-conditional estimator `R` and the marginalisation (backdoor)
//! estimator `M`, evaluated on observed cell counts.
//!
//! Empty denominators follow the `0/0 -> 0` convention: every ratio here has
//! a numerator that counts a subset of its denominator, so the convention
//! never hides a genuine division by zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Scalar;

/// Observed counts `N_i`, `i = 4X + 2Z + Y`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Counts {
    pub n: [u64; 8],
}

impl Counts {
    pub fn new(n: [u64; 8]) -> Result<Self> {
        if n.iter().sum::<u64>() == 0 {
            return Err(Error::domain("counts", "total count must be at least 1"));
        }
        Ok(Counts { n })
    }

    pub fn total(&self) -> u64 {
        self.n.iter().sum()
    }

    /// Size of the treated arm, `N1`.
    pub fn n1(&self) -> u64 {
        self.n[4..].iter().sum()
    }

    pub fn n0(&self) -> u64 {
        self.n[..4].iter().sum()
    }

    pub fn scaled(&self, k: u64) -> Counts {
        Counts {
            n: self.n.map(|v| v * k),
        }
    }
}

/// `a / b` with `0 / 0 = 0`.
pub fn safe_ratio(a: f64, b: f64) -> Result<f64> {
    if b > 0.0 {
        Ok(a / b)
    } else if a == 0.0 {
        Ok(0.0)
    } else {
        Err(Error::ZeroDenominator { numerator: a })
    }
}

#[inline]
fn ratio<T: Scalar>(a: u64, b: u64) -> T {
    debug_assert!(a <= b);
    if b == 0 {
        T::zero()
    } else {
        T::from_u64(a) / T::from_u64(b)
    }
}

/// All pieces of both estimators for one sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateSet<T = f64> {
    pub r: T,
    pub r1: T,
    pub r0: T,
    pub m: T,
    pub m11: T,
    pub m10: T,
    pub m01: T,
    pub m00: T,
}

impl<T: Scalar> EstimateSet<T> {
    /// Components in the fixed order `[R1, R0, M11, M10, M01, M00]`.
    pub fn components(&self) -> [T; 6] {
        [
            self.r1.clone(),
            self.r0.clone(),
            self.m11.clone(),
            self.m10.clone(),
            self.m01.clone(),
            self.m00.clone(),
        ]
    }
}

/// Component labels matching [`EstimateSet::components`].
pub const COMPONENT_NAMES: [&str; 6] = ["R1", "R0", "M11", "M10", "M01", "M00"];

/// Signs that assemble `R` and `M` from the component vector.
pub const R_SIGNS: [i8; 6] = [1, -1, 0, 0, 0, 0];
pub const M_SIGNS: [i8; 6] = [0, 0, 1, 1, -1, -1];

/// `(R1, R0, R)`.
pub fn raw_estimate<T: Scalar>(c: &Counts) -> (T, T, T) {
    let n = &c.n;
    let r1: T = ratio(n[5] + n[7], c.n1());
    let r0: T = ratio(n[1] + n[3], c.n0());
    let r = r1.clone() - r0.clone();
    (r1, r0, r)
}

/// `(M11, M10, M01, M00, M)`.
pub fn marg_estimate<T: Scalar>(c: &Counts) -> (T, T, T, T, T) {
    let n = &c.n;
    let total = T::from_u64(c.total());
    let z1 = T::from_u64(n[2] + n[3] + n[6] + n[7]) / total.clone();
    let z0 = T::from_u64(n[0] + n[1] + n[4] + n[5]) / total;
    let m11 = ratio::<T>(n[7], n[6] + n[7]) * z1.clone();
    let m01 = ratio::<T>(n[3], n[2] + n[3]) * z1;
    let m10 = ratio::<T>(n[5], n[4] + n[5]) * z0.clone();
    let m00 = ratio::<T>(n[1], n[0] + n[1]) * z0;
    let m = m11.clone() + m10.clone() - m01.clone() - m00.clone();
    (m11, m10, m01, m00, m)
}

pub fn estimate_set<T: Scalar>(c: &Counts) -> EstimateSet<T> {
    let (r1, r0, r) = raw_estimate(c);
    let (m11, m10, m01, m00, m) = marg_estimate(c);
    EstimateSet {
        r,
        r1,
        r0,
        m,
        m11,
        m10,
        m01,
        m00,
    }
}

/// `(R, M)` only, for the Monte Carlo hot loop.
#[inline]
pub fn r_and_m(c: &Counts) -> (f64, f64) {
    let (_, _, r) = raw_estimate::<f64>(c);
    let (.., m) = marg_estimate::<f64>(c);
    (r, m)
}

/// `P(alpha) = alpha R + (1 - alpha) M`; `alpha` is not restricted.
pub fn combined_estimate(r: f64, m: f64, alpha: f64) -> f64 {
    alpha * r + (1.0 - alpha) * m
}

#[cfg(test)]
mod tests {
    use super::*;

    const EX: [u64; 8] = [20, 5, 10, 15, 8, 7, 5, 30];

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-14
    }

    #[test]
    fn safe_ratio_convention() {
        assert_eq!(safe_ratio(3.0, 4.0).unwrap(), 0.75);
        assert_eq!(safe_ratio(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(safe_ratio(0.0, 5.0).unwrap(), 0.0);
        assert!(safe_ratio(1.0, 0.0).is_err());
    }

    #[test]
    fn raw_estimate_examples() {
        let (r1, r0, r) = raw_estimate::<f64>(&Counts::new(EX).unwrap());
        assert!(close(r1, 0.74) && close(r0, 0.40) && close(r, 0.34));
        let (_, _, r) = raw_estimate::<f64>(&Counts::new([1; 8]).unwrap());
        assert_eq!(r, 0.0);
        let (r1, r0, r) = raw_estimate::<f64>(&Counts::new([2, 3, 0, 0, 0, 0, 0, 0]).unwrap());
        assert_eq!((r1, r0), (0.0, 0.6));
        assert!(close(r, -0.6));
    }

    #[test]
    fn marg_estimate_examples() {
        let (m11, m10, m01, m00, m) = marg_estimate::<f64>(&Counts::new([1; 8]).unwrap());
        assert_eq!([m11, m10, m01, m00, m], [0.25, 0.25, 0.25, 0.25, 0.0]);

        let (m11, m10, m01, m00, m) = marg_estimate::<f64>(&Counts::new(EX).unwrap());
        assert!(close(m11, 36.0 / 70.0));
        assert!(close(m01, 0.36));
        assert!(close(m10, 28.0 / 150.0));
        assert!(close(m00, 0.08));
        assert!(close(m, 36.0 / 70.0 + 28.0 / 150.0 - 0.36 - 0.08));
        assert!((m - 0.261).abs() < 5e-4);

        let (m11, m10, m01, m00, m) =
            marg_estimate::<f64>(&Counts::new([0, 0, 3, 2, 0, 0, 1, 4]).unwrap());
        assert!(close(m11, 0.8) && close(m01, 0.4));
        assert_eq!((m10, m00), (0.0, 0.0));
        assert!(close(m, 0.4));
    }

    #[test]
    fn combined_examples() {
        assert_eq!(combined_estimate(0.34, 0.261, 1.0), 0.34);
        assert_eq!(combined_estimate(0.34, 0.261, 0.0), 0.261);
        assert!(close(combined_estimate(0.34, 0.261, 0.5), 0.3005));
    }

    #[test]
    fn zero_total_rejected() {
        assert!(Counts::new([0; 8]).is_err());
    }
}
