//! Known misprints in the published closed forms, each with a numeric
//! check against the exact moments where one is possible.

use serde::{Deserialize, Serialize};

use crate::analytic::{
    closed_form::{cov_rm_random_terms, var_m_fixed},
    component_cov_random, component_moments_fixed, cov_rm_fixed, cov_rm_random,
    exact::m_index,
    fixed_moments, random_covariance, scaling_limit_gaps, Summary, Variant,
};
use crate::error::Result;
use crate::model::{EffectParams, Regime, VStructParams};
use crate::numeric::compensated_sum;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Erratum {
    pub id: &'static str,
    pub location: &'static str,
    pub printed: &'static str,
    pub corrected: &'static str,
}

pub const ERRATA: [Erratum; 7] = [
    Erratum {
        id: "E1",
        location: "random X: C[M11, R1] and the first term of the complete C[R, M]",
        printed: "(1-p_X)^(N-2) F([1,1,2-N],[2,2],-p_X/(1-p_X))",
        corrected: "(1-p_X)^(N-1) F([1,1,2-N],[2,2],-p_X/(1-p_X))",
    },
    Erratum {
        id: "E2",
        location: "random X: last term of the complete C[R, M]",
        printed: "+2 (rate differences) p_Z (1-p_Z)",
        corrected: "-2 (rate differences) p_Z (1-p_Z)",
    },
    Erratum {
        id: "E3",
        location: "fixed X: fourth (M00) term of V[M]",
        printed: "p_Z^(N0-1) F([1,1,1-N0],[2,2],-p_Z/(1-p_Z))",
        corrected: "p_Z^(N0-1) F([1,1,1-N0],[2,2],-(1-p_Z)/p_Z)",
    },
    Erratum {
        id: "E4",
        location: "fixed X: list of non-vanishing component covariances of M",
        printed: "C[M01, M00]",
        corrected: "C[M10, M00] (same Z-stratum, opposite arms)",
    },
    Erratum {
        id: "E5",
        location: "fixed X: intermediate expression for E[M11 R1]",
        printed: "a stray factor y",
        corrected: "no such factor; the final expression is unaffected",
    },
    Erratum {
        id: "E6",
        location: "all hypergeometric closed forms",
        printed: "exact for every N",
        corrected: "exact up to events with an empty Z-stratum in an arm, of order (1 - pi)^n",
    },
    Erratum {
        id: "E7",
        location: "fixed X: scaling-limit gaps",
        printed: "(C - V[M]) N = -q1(1-q1)(1-xi)/xi^2 - ..., bracket [2C + (2p_X - 1)D]",
        corrected: "(C - V[M]) N = -q1(1-q1)(1-xi)/(N xi^2) - ..., bracket [2C + (2xi - 1)D]",
    },
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    /// The corrected form agrees with the exact moments and the printed one
    /// does not.
    Confirmed,
    /// The check contradicts the listed correction.
    Failed,
    /// Typographical; nothing to evaluate.
    Documented,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErratumCheck {
    pub id: String,
    pub status: CheckStatus,
    /// Relative error of the corrected form against the exact value.
    pub corrected_error: Option<f64>,
    /// Relative error of the printed form against the exact value.
    pub printed_error: Option<f64>,
    pub detail: String,
}

fn rel(a: f64, exact: f64) -> f64 {
    ((a - exact) / exact).abs()
}

fn verdict(id: &str, corrected: f64, printed: f64, tol: f64, detail: String) -> ErratumCheck {
    let ok = corrected <= tol && printed > 100.0 * tol;
    ErratumCheck {
        id: id.to_string(),
        status: if ok {
            CheckStatus::Confirmed
        } else {
            CheckStatus::Failed
        },
        corrected_error: Some(corrected),
        printed_error: Some(printed),
        detail,
    }
}

fn reference() -> VStructParams<f64> {
    VStructParams::new(1.0 / 3.0, 2.0 / 3.0, [1.0 / 6.0, 0.5, 1.0 / 3.0, 5.0 / 6.0])
        .expect("valid reference setting")
}

/// Run every numeric check. Sample sizes are large enough that the
/// empty-stratum terms the closed forms drop are below `1e-17`.
pub fn check_errata() -> Result<Vec<ErratumCheck>> {
    let p = reference();
    let n = 400;
    let (n0, n1) = (200, 100);
    let tol = 1e-10;
    let mut out = Vec::new();

    let exact = random_covariance(&p, n)?;
    let fixed = component_cov_random(&p, n, Variant::Corrected)?.values[0][0];
    let printed = component_cov_random(&p, n, Variant::AsPrinted)?.values[0][0];
    let e = exact.cov_mr[0][0];
    out.push(verdict(
        "E1",
        rel(fixed, e),
        rel(printed, e),
        tol,
        format!("C[M11, R1] at N = {n}: exact {e:.12e}"),
    ));

    let corrected = cov_rm_random(&p, n, Variant::Corrected)?;
    let terms = cov_rm_random_terms(&p, n, Variant::Corrected)?;
    let flipped = compensated_sum(terms.iter().map(|t| {
        if t.label == "cross" {
            -t.value
        } else {
            t.value
        }
    })) / n as f64;
    out.push(verdict(
        "E2",
        rel(corrected, exact.cov_rm),
        rel(flipped, exact.cov_rm),
        tol,
        format!("C[R, M] at N = {n}: exact {:.12e}", exact.cov_rm),
    ));

    let ex = Summary::from(&fixed_moments(&p, n0, n1)?);
    let vm = var_m_fixed(&p, n0, n1, Variant::Corrected)?;
    let vm_printed = var_m_fixed(&p, n0, n1, Variant::AsPrinted)?;
    out.push(verdict(
        "E3",
        rel(vm, ex.var_m),
        rel(vm_printed, ex.var_m),
        tol,
        format!("V[M] at (N0, N1) = ({n0}, {n1}): exact {:.12e}", ex.var_m),
    ));

    // M10 and M00 share Z = 0; M01 and M00 share the control arm
    let exact_fixed = fixed_moments(&p, n0, n1)?;
    let comps = component_moments_fixed(&p, n0, n1)?;
    let same_z = exact_fixed.cov[m_index(1)][m_index(3)];
    let same_arm = exact_fixed.cov[m_index(2)][m_index(3)];
    let signed = rel(comps.cov_rm(), cov_rm_fixed(&p, n0, n1)?);
    let mut e4 = verdict(
        "E4",
        rel(comps.cov_mm[1][3], same_z).max(signed),
        rel(comps.cov_mm[1][3], same_arm),
        tol,
        format!(
            "C[M10, M00] exact {same_z:.6e}, C[M01, M00] exact {same_arm:.6e}; \
             component sum vs assembled C[M, R] rel {signed:.1e}"
        ),
    );
    e4.detail
        .push_str("; printed_error compares the same-stratum form with C[M01, M00]");
    out.push(e4);

    out.push(ErratumCheck {
        id: "E5".into(),
        status: CheckStatus::Documented,
        corrected_error: None,
        printed_error: None,
        detail: "typographical; the assembled covariance is checked under E4".into(),
    });

    // small arms: the neglected terms are visible; large arms: gone
    let small = Summary::from(&fixed_moments(&p, 3, 3)?);
    let small_gap = rel(var_m_fixed(&p, 3, 3, Variant::Corrected)?, small.var_m);
    let large_gap = rel(vm, ex.var_m);
    out.push(ErratumCheck {
        id: "E6".into(),
        status: if small_gap > 1e-4 && large_gap < tol { CheckStatus::Confirmed } else { CheckStatus::Failed },
        corrected_error: Some(large_gap),
        printed_error: Some(small_gap),
        detail: format!("closed-form V[M] relative gap {small_gap:.3e} at (3, 3), {large_gap:.1e} at ({n0}, {n1})"),
    });

    out.push(check_scaling_limit()?);
    Ok(out)
}

/// Exact fixed moments with `C = 1/sqrt(N)`, `D = 1/(2 sqrt(N))` against
/// both normalisations of `(C - V[M])`.
fn check_scaling_limit() -> Result<ErratumCheck> {
    let n: u32 = 6400;
    let nn = n as f64;
    let n1 = n / 4;
    let xi = n1 as f64 / nn;
    let e = EffectParams {
        q0: 1.0 / 3.0,
        q1: 2.0 / 3.0,
        c: 1.0 / nn.sqrt(),
        d: 0.5 / nn.sqrt(),
        pz: 2.0 / 3.0,
        px: xi,
    };
    let s = Summary::from(&fixed_moments(&e.to_params()?, n - n1, n1)?);
    let g = scaling_limit_gaps(&e, n, Regime::Fixed)?;
    let exact_cm = (s.cov_rm - s.var_m) * nn * nn;
    let exact_cr = (s.cov_rm - s.var_r) * nn;
    let corrected = rel(g.gap_cov_minus_var_m.rescaled, exact_cm);
    let printed = rel(g.gap_cov_minus_var_m.printed * nn, exact_cm);
    let bracket = rel(g.gap_cov_minus_var_r, exact_cr);
    // the remainder is O(N^-1/2) relative
    let ok = corrected < 0.02 && printed > 10.0 && bracket < 1e-6;
    Ok(ErratumCheck {
        id: "E7".into(),
        status: if ok { CheckStatus::Confirmed } else { CheckStatus::Failed },
        corrected_error: Some(corrected),
        printed_error: Some(printed),
        detail: format!(
            "N = {n}, xi = {xi}: (C - V[M]) N^2 exact {exact_cm:.6}, corrected {:.6}, printed {:.6}; \
             (C - V[R]) N with the (2 xi - 1) bracket rel error {bracket:.1e}",
            g.gap_cov_minus_var_m.rescaled,
            g.gap_cov_minus_var_m.printed * nn
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_numeric_erratum_is_confirmed() {
        let checks = check_errata().unwrap();
        assert_eq!(checks.len(), ERRATA.len());
        for (c, e) in checks.iter().zip(ERRATA.iter()) {
            assert_eq!(c.id, e.id);
            assert_ne!(c.status, CheckStatus::Failed, "{c:?}");
        }
    }
}
