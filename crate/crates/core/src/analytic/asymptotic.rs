//! Large-`N` expansions in the effect parametrisation, and the leading
//! variance gaps in the scaling limit `C, D ~ N^(-1/2)`.

use serde::{Deserialize, Serialize};

use crate::analytic::closed_form::Term;
use crate::error::{Error, Result};
use crate::model::{EffectParams, Regime};
use crate::numeric::compensated_sum;

fn fraction_in_open_unit(v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::domain(
            "px",
            format!("treatment fraction {v} must lie in (0, 1)"),
        ));
    }
    Ok(())
}

/// Seven-term expansion of `C[R, M] * N` up to `O(N^-2)`.
pub fn cov_expansion_terms(e: &EffectParams<f64>, n: u32) -> Result<Vec<Term>> {
    fraction_in_open_unit(e.px)?;
    let (q0, q1, c, d, z, p) = (e.q0, e.q1, e.c, e.d, e.pz, e.px);
    let nn = n as f64;
    let bern = |v: f64| v * (1.0 - v);
    let k = (2.0 * z - 1.0) * c;
    let up = 1.0 + 1.0 / (nn * p);
    let down = 1.0 + 1.0 / (nn * (1.0 - p));
    let t = |label: &str, value: f64| Term {
        label: label.to_string(),
        value,
    };
    Ok(vec![
        t("treated.mean", bern(q1 + k)),
        t("control.mean", bern(q0 + k)),
        t(
            "treated.z1",
            (1.0 - p) * z * bern(q1 + c - (1.0 - z) * d) / p * up,
        ),
        t(
            "treated.z0",
            (1.0 - p) * (1.0 - z) * bern(q1 - c + z * d) / p * up,
        ),
        t(
            "control.z1",
            p * z * bern(q0 + c + (1.0 - z) * d) / (1.0 - p) * down,
        ),
        t(
            "control.z0",
            p * (1.0 - z) * bern(q0 - c - z * d) / (1.0 - p) * down,
        ),
        t("interaction", -2.0 * z * (1.0 - z) * (4.0 * c * c - d * d)),
    ])
}

/// Expansion of `C[R, M]` for random X.
pub fn asymptotic_cov_random(e: &EffectParams<f64>, n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("n", "need n >= 1"));
    }
    let terms = cov_expansion_terms(e, n)?;
    Ok(compensated_sum(terms.iter().map(|t| t.value)) / n as f64)
}

/// A gap whose printed normalisation is inconsistent with its order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapValue {
    /// The expression with the normalisation as published.
    pub printed: f64,
    /// The leading coefficient with every term at the order the exact
    /// moments exhibit (see the field docs on [`AsymptoticReport`]).
    pub rescaled: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub regime: Regime,
    pub n: u32,
    /// `p_X` (random) or `xi` (fixed).
    pub fraction: f64,
    /// Seven-term expansion of `C[R, M] * N`; random regime only.
    pub cov_expansion: Option<f64>,
    /// Leading `(C[R, M] - V[R]) * N`.
    pub gap_cov_minus_var_r: f64,
    /// `(C[R, M] - V[M]) * N`. The gap is `O(1/N)` after this scaling;
    /// `rescaled` is the `O(1)` coefficient of `(C[R, M] - V[M]) * N^2`.
    pub gap_cov_minus_var_m: GapValue,
    /// `(V[M] - V[R]) * N`, fixed regime only. `rescaled` carries both
    /// outcome terms at order `1/N`.
    pub gap_var_m_minus_var_r: Option<GapValue>,
}

impl AsymptoticReport {
    /// Both leading-order gaps are non-positive.
    pub fn gaps_non_positive(&self) -> bool {
        self.gap_cov_minus_var_r <= 0.0 && self.gap_cov_minus_var_m.rescaled <= 0.0
    }
}

/// `p_Z (1 - p_Z) / (f (1 - f)) [2C + (2f - 1) D]^2` with `f` the treatment
/// fraction.
fn bracket(e: &EffectParams<f64>) -> f64 {
    let f = e.px;
    e.pz * (1.0 - e.pz) / (f * (1.0 - f)) * (2.0 * e.c + (2.0 * f - 1.0) * e.d).powi(2)
}

/// `q1 (1 - q1)(1 - f)/f^2` and `q0 (1 - q0) f/(1 - f)^2`.
fn outcome_terms(e: &EffectParams<f64>) -> (f64, f64) {
    let f = e.px;
    (
        e.q1 * (1.0 - e.q1) * (1.0 - f) / (f * f),
        e.q0 * (1.0 - e.q0) * f / ((1.0 - f) * (1.0 - f)),
    )
}

/// Scaling-limit gaps. For the fixed regime `e.px` is read as `xi`.
pub fn scaling_limit_gaps(
    e: &EffectParams<f64>,
    n: u32,
    regime: Regime,
) -> Result<AsymptoticReport> {
    fraction_in_open_unit(e.px)?;
    if n == 0 {
        return Err(Error::domain("n", "need n >= 1"));
    }
    let nn = n as f64;
    let b = bracket(e);
    let (t1, t0) = outcome_terms(e);
    let report = match regime {
        Regime::Random => AsymptoticReport {
            regime,
            n,
            fraction: e.px,
            cov_expansion: Some(asymptotic_cov_random(e, n)? * nn),
            gap_cov_minus_var_r: -b,
            gap_cov_minus_var_m: GapValue {
                printed: -t1 / nn - t0 / nn,
                rescaled: -t1 - t0,
            },
            gap_var_m_minus_var_r: None,
        },
        Regime::Fixed => AsymptoticReport {
            regime,
            n,
            fraction: e.px,
            cov_expansion: None,
            gap_cov_minus_var_r: -b,
            // the treated-arm term was printed without its 1/N
            gap_cov_minus_var_m: GapValue {
                printed: -t1 - t0 / nn,
                rescaled: -t1 - t0,
            },
            gap_var_m_minus_var_r: Some(GapValue {
                printed: t1 + t0 / nn - b,
                rescaled: (t1 + t0) / nn - b,
            }),
        },
    };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn effect(c: f64, d: f64, px: f64) -> EffectParams<f64> {
        EffectParams {
            q0: 1.0 / 3.0,
            q1: 2.0 / 3.0,
            c,
            d,
            pz: 2.0 / 3.0,
            px,
        }
    }

    #[test]
    fn bracket_vanishes() {
        let r = scaling_limit_gaps(&effect(0.0, 0.0, 0.3), 100, Regime::Random).unwrap();
        assert_eq!(r.gap_cov_minus_var_r, 0.0);
        let r = scaling_limit_gaps(&effect(0.0, 0.2, 0.5), 100, Regime::Random).unwrap();
        assert_eq!(r.gap_cov_minus_var_r, 0.0);
    }

    #[test]
    fn gaps_are_non_positive() {
        for regime in [Regime::Random, Regime::Fixed] {
            let r = scaling_limit_gaps(&effect(5.0 / 24.0, -1.0 / 12.0, 1.0 / 3.0), 100, regime)
                .unwrap();
            assert!(r.gap_cov_minus_var_r < 0.0);
            assert!(r.gap_cov_minus_var_m.printed < 0.0);
            assert!(r.gaps_non_positive());
        }
    }

    #[test]
    fn no_effect_collapse() {
        // C = D = 0, q0 = q1 = q: every Bernoulli factor equals q(1-q)
        let q = 0.4;
        let (p, n) = (0.3, 50u32);
        let e = EffectParams {
            q0: q,
            q1: q,
            c: 0.0,
            d: 0.0,
            pz: 0.6,
            px: p,
        };
        let v = q * (1.0 - q);
        let nn = n as f64;
        let want = 2.0 * v
            + v * (1.0 - p) / p * (1.0 + 1.0 / (nn * p))
            + v * p / (1.0 - p) * (1.0 + 1.0 / (nn * (1.0 - p)));
        assert!((asymptotic_cov_random(&e, n).unwrap() * nn - want).abs() < 1e-15);
    }

    #[test]
    fn rejects_degenerate_fraction() {
        assert!(asymptotic_cov_random(&effect(0.0, 0.0, 0.0), 10).is_err());
        assert!(scaling_limit_gaps(&effect(0.0, 0.0, 1.0), 10, Regime::Fixed).is_err());
    }
}
