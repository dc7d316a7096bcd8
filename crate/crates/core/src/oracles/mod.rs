//! Ground-truth moments: exhaustive enumeration of the multinomial support
//! for small samples, and an exact binomial mixture over the treated-arm
//! size for random X at practical sample sizes.

pub mod enumerate;
pub mod mixture;

use serde::{Deserialize, Serialize};

use crate::analytic::{ComponentMoments, Family, Summary};
use crate::numeric::Scalar;
use crate::report::Method;

pub use enumerate::{enumerate_fixed, enumerate_random, EnumCaps};
pub use mixture::{mixture_random, mixture_random_family};

/// Oracle output with its provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactMoments<T> {
    pub method: Method,
    pub moments: ComponentMoments<T>,
    /// Total probability visited; one up to rounding.
    pub mass: T,
    /// Probability mass the method leaves out; zero for both oracles.
    pub neglected_mass: T,
    /// Outcomes visited (enumeration) or mixture terms (mixture).
    pub support: u64,
}

impl<T: Scalar> ExactMoments<T> {
    pub fn summary(&self) -> Summary {
        Summary::from(&self.moments)
    }

    /// `C[R, M]^2 <= V[R] V[M]`, with a relative slack for rounding.
    pub fn cauchy_schwarz_holds(&self) -> bool {
        let s = self.summary();
        s.cov_rm * s.cov_rm <= s.var_r * s.var_m * (1.0 + 1e-12) + 1e-300
    }

    pub fn to_json(&self, family: Option<Family>) -> ExactMomentsJson {
        let s = self.summary();
        let m = &self.moments;
        ExactMomentsJson {
            method: self.method,
            family,
            e_r: s.e_r,
            e_m: s.e_m,
            var_r: s.var_r,
            var_m: s.var_m,
            cov_rm: s.cov_rm,
            sqrt_var_r: s.var_r.max(0.0).sqrt(),
            sqrt_var_m: s.var_m.max(0.0).sqrt(),
            sqrt_cov_rm: (s.cov_rm >= 0.0).then(|| s.cov_rm.sqrt()),
            component_means: std::array::from_fn(|i| m.mean[i].to_f64()),
            mass: self.mass.to_f64(),
            neglected_mass: self.neglected_mass.to_f64(),
            support: self.support,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactMomentsJson {
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    pub e_r: f64,
    pub e_m: f64,
    pub var_r: f64,
    pub var_m: f64,
    pub cov_rm: f64,
    pub sqrt_var_r: f64,
    pub sqrt_var_m: f64,
    pub sqrt_cov_rm: Option<f64>,
    /// `E[R1], E[R0], E[M11], E[M10], E[M01], E[M00]`
    pub component_means: [f64; 6],
    pub mass: f64,
    pub neglected_mass: f64,
    pub support: u64,
}
