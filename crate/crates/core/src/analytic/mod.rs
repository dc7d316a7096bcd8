//! Analytic moments of `R` and `M`.
//!
//! Two families are provided. [`Family::Exact`] conditions on the stratum
//! sizes and is exact at every `N`; it is the canonical truth and what the
//! enumeration oracle is checked against. [`Family::LargeSample`] is the
//! closed-form family built on the terminating hypergeometric kernels,
//! which neglects empty-stratum events of order `(1 - pi)^n`.

pub mod asymptotic;
pub mod closed_form;
pub mod exact;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::VStructParams;

pub use asymptotic::{asymptotic_cov_random, scaling_limit_gaps, AsymptoticReport, GapValue};
pub use closed_form::{
    component_cov_random, component_moments_fixed, cov_rm_fixed, cov_rm_random, var_m_fixed,
    var_r_fixed, ComponentCov, FixedComponents, Term, Variant,
};
pub use exact::{
    fixed_moments, random_covariance, single_arm_moments, ComponentMoments, RandomCovariance,
};

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    #[default]
    Exact,
    LargeSample,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Exact => "exact",
            Family::LargeSample => "large-sample",
        })
    }
}

impl std::str::FromStr for Family {
    type Err = crate::error::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Family::Exact),
            "large-sample" => Ok(Family::LargeSample),
            other => Err(crate::error::Error::Parse(format!(
                "unknown family {other:?}"
            ))),
        }
    }
}

/// First and second moments of the two estimators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub e_r: f64,
    pub e_m: f64,
    pub var_r: f64,
    pub var_m: f64,
    pub cov_rm: f64,
}

impl<T: crate::numeric::Scalar> From<&ComponentMoments<T>> for Summary {
    fn from(m: &ComponentMoments<T>) -> Self {
        Summary {
            e_r: m.e_r.to_f64(),
            e_m: m.e_m.to_f64(),
            var_r: m.var_r.to_f64(),
            var_m: m.var_m.to_f64(),
            cov_rm: m.cov_rm.to_f64(),
        }
    }
}

/// Closed-form component moments arranged like the exact ones, so both
/// families feed the same mixture code.
pub fn large_sample_fixed_components(
    params: &VStructParams<f64>,
    n0: u32,
    n1: u32,
) -> Result<ComponentMoments<f64>> {
    let fc = component_moments_fixed(params, n0, n1)?;
    let mut mean = [0.0; 6];
    let mut cov = [[0.0; 6]; 6];
    mean[0] = fc.mean_r[0];
    mean[1] = fc.mean_r[1];
    cov[0][0] = fc.mean_r[0] * (1.0 - fc.mean_r[0]) / n1 as f64;
    cov[1][1] = fc.mean_r[1] * (1.0 - fc.mean_r[1]) / n0 as f64;
    for s in 0..4 {
        mean[2 + s] = fc.mean_m[s];
        for r in 0..2 {
            cov[2 + s][r] = fc.cov_mr.values[s][r];
            cov[r][2 + s] = fc.cov_mr.values[s][r];
        }
        for t in 0..4 {
            cov[2 + s][2 + t] = fc.cov_mm[s][t];
        }
    }
    Ok(ComponentMoments::from_components(mean, cov))
}

/// Fixed-design moments in either family.
pub fn fixed_summary(
    params: &VStructParams<f64>,
    n0: u32,
    n1: u32,
    family: Family,
) -> Result<Summary> {
    match family {
        Family::Exact => Ok(Summary::from(&fixed_moments(params, n0, n1)?)),
        Family::LargeSample => {
            let r = params.cell_probs_fixed().p;
            Ok(Summary {
                e_r: params.outcome_rate(1) - params.outcome_rate(0),
                e_m: r[7] + r[5] - r[3] - r[1],
                var_r: var_r_fixed(params, n0, n1)?,
                var_m: var_m_fixed(params, n0, n1, Variant::Corrected)?,
                cov_rm: cov_rm_fixed(params, n0, n1)?,
            })
        }
    }
}

/// `C[R, M]` for random X in either family.
pub fn cov_rm_random_family(params: &VStructParams<f64>, n: u32, family: Family) -> Result<f64> {
    match family {
        Family::Exact => Ok(random_covariance(params, n)?.cov_rm),
        Family::LargeSample => cov_rm_random(params, n, Variant::Corrected),
    }
}
