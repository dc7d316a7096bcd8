//! Serialisable moment reports shared by the CLI and the sweep.

use serde::{Deserialize, Serialize};

use crate::analytic::{Family, Summary};
use crate::combine::CombineReport;
use crate::model::Regime;

/// Provenance of a moment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Analytic,
    Enumeration,
    Mixture,
    MonteCarlo,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Analytic => "analytic",
            Method::Enumeration => "enumeration",
            Method::Mixture => "mixture",
            Method::MonteCarlo => "monte-carlo",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = crate::error::Error;
    fn from_str(s: &str) -> crate::error::Result<Self> {
        match s {
            "analytic" => Ok(Method::Analytic),
            "enumeration" => Ok(Method::Enumeration),
            "mixture" => Ok(Method::Mixture),
            "monte-carlo" => Ok(Method::MonteCarlo),
            other => Err(crate::error::Error::Parse(format!(
                "unknown method {other:?}"
            ))),
        }
    }
}

/// E/V of `R` and `M`, their covariance, and the optimal combination.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub regime: Regime,
    pub n: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n0: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n1: Option<u32>,
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    pub e_r: Option<f64>,
    pub e_m: Option<f64>,
    pub var_r: Option<f64>,
    pub var_m: Option<f64>,
    pub cov_rm: f64,
    pub sqrt_var_r: Option<f64>,
    pub sqrt_var_m: Option<f64>,
    /// `sqrt(C[R, M])`; absent when the covariance is negative.
    pub sqrt_cov_rm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub combine: Option<CombineReport>,
}

fn sqrt_opt(v: f64) -> Option<f64> {
    (v >= 0.0).then(|| v.sqrt())
}

impl MomentReport {
    pub fn from_summary(
        regime: Regime,
        n: u32,
        fixed_arms: Option<(u32, u32)>,
        method: Method,
        family: Option<Family>,
        s: &Summary,
    ) -> Self {
        let combine = CombineReport::new(s.var_r, s.var_m, s.cov_rm).ok();
        MomentReport {
            regime,
            n,
            n0: fixed_arms.map(|a| a.0),
            n1: fixed_arms.map(|a| a.1),
            method,
            family,
            e_r: Some(s.e_r),
            e_m: Some(s.e_m),
            var_r: Some(s.var_r),
            var_m: Some(s.var_m),
            cov_rm: s.cov_rm,
            sqrt_var_r: sqrt_opt(s.var_r),
            sqrt_var_m: sqrt_opt(s.var_m),
            sqrt_cov_rm: sqrt_opt(s.cov_rm),
            combine,
        }
    }

    /// Report carrying only the covariance.
    pub fn covariance_only(
        regime: Regime,
        n: u32,
        method: Method,
        family: Option<Family>,
        cov_rm: f64,
    ) -> Self {
        MomentReport {
            regime,
            n,
            n0: None,
            n1: None,
            method,
            family,
            e_r: None,
            e_m: None,
            var_r: None,
            var_m: None,
            cov_rm,
            sqrt_var_r: None,
            sqrt_var_m: None,
            sqrt_cov_rm: sqrt_opt(cov_rm),
            combine: None,
        }
    }
}
