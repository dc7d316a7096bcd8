//! Optimal affine combination `P(a) = a R + (1 - a) M` and the relative
//! variance differences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(vM - c) / ((vR - c) + (vM - c))`. Not clamped to `[0, 1]`.
pub fn optimal_alpha(v_r: f64, v_m: f64, c: f64) -> Result<f64> {
    let den = (v_r - c) + (v_m - c);
    if den == 0.0 {
        return Err(Error::Degenerate(
            "V[R] + V[M] - 2C[R,M] = 0: R and M agree in second moments, any alpha is optimal"
                .into(),
        ));
    }
    Ok((v_m - c) / den)
}

pub fn variance_p(v_r: f64, v_m: f64, c: f64, alpha: f64) -> f64 {
    let b = 1.0 - alpha;
    alpha * alpha * v_r + b * b * v_m + 2.0 * alpha * b * c
}

/// `V[P(a*)]`, written as `min - (min - c)^2 / d` so that it is exactly
/// `min` when `c = min`.
pub fn variance_p_star(v_r: f64, v_m: f64, c: f64) -> Result<f64> {
    let d = (v_r - c) + (v_m - c);
    if d == 0.0 {
        return Err(Error::Degenerate("V[R] + V[M] - 2C[R,M] = 0".into()));
    }
    let lo = v_r.min(v_m);
    Ok(lo - (lo - c) * (lo - c) / d)
}

/// `(V[P(a*)] - min(vR, vM)) / min(vR, vM)`.
pub fn delta_combined(v_r: f64, v_m: f64, c: f64) -> Result<f64> {
    let lo = v_r.min(v_m);
    if lo.is_nan() || lo <= 0.0 {
        return Err(Error::domain(
            "min(V[R], V[M])",
            format!("{lo} must be positive"),
        ));
    }
    let d = (v_r - c) + (v_m - c);
    if d == 0.0 {
        return Err(Error::Degenerate("V[R] + V[M] - 2C[R,M] = 0".into()));
    }
    Ok(-(lo - c) * (lo - c) / (d * lo))
}

/// `(vM - vR) / vR`.
pub fn delta_mr(v_r: f64, v_m: f64) -> Result<f64> {
    if v_r == 0.0 {
        return Err(Error::ZeroDenominator { numerator: v_m });
    }
    Ok((v_m - v_r) / v_r)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombineReport {
    pub var_r: f64,
    pub var_m: f64,
    pub cov_rm: f64,
    pub alpha_star: f64,
    pub var_p_star: f64,
    pub sqrt_var_p_star: f64,
    pub delta_combined: f64,
    pub delta_mr: f64,
    /// `C[R, M] < min(V[R], V[M])`: the combination strictly improves on
    /// both estimators.
    pub dominance: bool,
}

impl CombineReport {
    pub fn new(var_r: f64, var_m: f64, cov_rm: f64) -> Result<Self> {
        let alpha_star = optimal_alpha(var_r, var_m, cov_rm)?;
        let var_p_star = variance_p_star(var_r, var_m, cov_rm)?;
        Ok(CombineReport {
            var_r,
            var_m,
            cov_rm,
            alpha_star,
            var_p_star,
            sqrt_var_p_star: var_p_star.max(0.0).sqrt(),
            delta_combined: delta_combined(var_r, var_m, cov_rm)?,
            delta_mr: delta_mr(var_r, var_m)?,
            dominance: cov_rm < var_r.min(var_m),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RANDOM: (f64, f64, f64) = (0.1019324, 0.0924017, 0.0915308);

    #[test]
    fn endpoints_and_symmetry() {
        assert_eq!(variance_p(2.0, 3.0, 0.5, 1.0), 2.0);
        assert_eq!(variance_p(2.0, 3.0, 0.5, 0.0), 3.0);
        assert_eq!(optimal_alpha(1.0, 1.0, 0.3).unwrap(), 0.5);
        assert!(optimal_alpha(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn rounded_published_inputs() {
        let (r, m, c) = RANDOM;
        let (vr, vm, vc) = (r * r, m * m, c * c);
        let a = optimal_alpha(vr, vm, vc).unwrap();
        // the rounded inputs land 4e-6 from the seven-digit alpha
        assert!((a - 0.0737371).abs() < 1e-5, "{a}");
        assert!((variance_p(vr, vm, vc, a).sqrt() - 0.0923378).abs() < 2e-7);
        let want = (0.0923378f64.powi(2) - vm) / vm;
        assert!((delta_combined(vr, vm, vc).unwrap() - want).abs() < 1e-5);

        let (r, m, c) = (0.101660f64, 0.092132f64, 0.091321f64);
        let (vr, vm, vc) = (r * r, m * m, c * c);
        let a = optimal_alpha(vr, vm, vc).unwrap();
        assert!((a - 0.069409).abs() < 1e-4, "{a}");
        assert!((variance_p(vr, vm, vc, a).sqrt() - 0.092076).abs() < 2e-6);
        assert!((delta_mr(vr, vm).unwrap() + 0.1787).abs() < 1e-4);
    }

    #[test]
    fn delta_edge_cases() {
        assert_eq!(delta_combined(0.4, 0.2, 0.2).unwrap(), 0.0);
        assert_eq!(delta_combined(0.3, 0.3, 0.0).unwrap(), -0.5);
        assert!(delta_combined(0.0, 0.2, 0.0).is_err());
        assert_eq!(delta_mr(0.5, 0.5).unwrap(), 0.0);
        assert_eq!(delta_mr(0.5, 1.0).unwrap(), 1.0);
        assert!(delta_mr(0.0, 1.0).is_err());
    }

    #[test]
    fn report_flags_dominance() {
        let r = CombineReport::new(0.02, 0.01, 0.005).unwrap();
        assert!(r.dominance && r.var_p_star < 0.01);
        let r = CombineReport::new(0.02, 0.01, 0.015).unwrap();
        assert!(!r.dominance);
        assert!(r.alpha_star < 0.0);
    }
}
