//! Small-N agreement program: analytic moments against exhaustive
//! enumeration, and the binomial mixture against enumeration, over a
//! deterministic sample of a parameter grid.

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::analytic::{fixed_moments, random_covariance, Summary};
use crate::error::Result;
use crate::model::VStructParams;
use crate::numeric::format_rational;
use crate::oracles::{enumerate_fixed, enumerate_random, mixture_random, EnumCaps};
use crate::par::map_ordered;

const FRACTIONS: [(i64, i64); 3] = [(1, 4), (1, 2), (3, 4)];
const OUTCOMES: [(i64, i64); 4] = [(1, 5), (2, 5), (3, 5), (4, 5)];

fn q((n, d): (i64, i64)) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Size of the full grid: `p_X, p_Z` from three values, each `p_Y`
/// component from four.
pub const FULL_GRID: usize = 3 * 3 * 4 * 4 * 4 * 4;

/// The `k`-th point of the full grid in row-major order over
/// `(p_X, p_Z, p_Y0, .., p_Y3)`.
pub fn grid_point(k: usize) -> VStructParams<BigRational> {
    let mut r = k;
    let mut digit = |base: usize| {
        let d = r % base;
        r /= base;
        d
    };
    let py: [usize; 4] = {
        let a3 = digit(4);
        let a2 = digit(4);
        let a1 = digit(4);
        let a0 = digit(4);
        [a0, a1, a2, a3]
    };
    let z = digit(3);
    let x = digit(3);
    VStructParams::new(q(FRACTIONS[x]), q(FRACTIONS[z]), py.map(|i| q(OUTCOMES[i])))
        .expect("grid values are probabilities")
}

/// `size` evenly strided points of the full grid, always including the
/// first.
pub fn sample_grid(size: usize) -> Vec<VStructParams<BigRational>> {
    let size = size.clamp(1, FULL_GRID);
    (0..size)
        .map(|i| grid_point(i * FULL_GRID / size))
        .collect()
}

fn label(p: &VStructParams<BigRational>) -> String {
    format!(
        "px={} pz={} py={}",
        format_rational(&p.px),
        format_rational(&p.pz),
        p.py.iter()
            .map(format_rational)
            .collect::<Vec<_>>()
            .join(",")
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// `random`, `fixed` or `mixture`.
    pub check: String,
    pub params: String,
    /// `N` or `(N0, N1)`.
    pub size: String,
    pub quantity: String,
    pub candidate: f64,
    pub oracle: f64,
    pub abs_diff: f64,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyPlan {
    pub grid_size: usize,
    /// Random-design `N` runs over `2..=nmax`.
    pub nmax: u32,
    /// Fixed-design arms run over `1..=arm_max` each.
    pub arm_max: u32,
    /// Mixture-versus-enumeration `N` runs over `2..=mixture_nmax`.
    pub mixture_nmax: u32,
    pub tol: f64,
}

impl Default for VerifyPlan {
    fn default() -> Self {
        VerifyPlan {
            grid_size: 20,
            nmax: 8,
            arm_max: 5,
            mixture_nmax: 10,
            tol: 1e-12,
        }
    }
}

fn compare(
    check: &str,
    params: &str,
    size: String,
    tol: f64,
    pairs: &[(&str, f64, f64)],
    out: &mut Vec<Comparison>,
) {
    for &(quantity, candidate, oracle) in pairs {
        let abs_diff = (candidate - oracle).abs();
        out.push(Comparison {
            check: check.into(),
            params: params.into(),
            size: size.clone(),
            quantity: quantity.into(),
            candidate,
            oracle,
            abs_diff,
            pass: abs_diff <= tol,
        });
    }
}

fn triple(s: &Summary, o: &Summary) -> [(&'static str, f64, f64); 3] {
    [
        ("var_r", s.var_r, o.var_r),
        ("var_m", s.var_m, o.var_m),
        ("cov_rm", s.cov_rm, o.cov_rm),
    ]
}

fn one_setting(exact: &VStructParams<BigRational>, plan: &VerifyPlan) -> Result<Vec<Comparison>> {
    let caps = EnumCaps::default();
    let p = exact.to_f64();
    let name = label(exact);
    let mut out = Vec::new();
    let top = plan.nmax.max(plan.mixture_nmax);
    for n in 2..=top {
        let en = enumerate_random(&p.cell_probs(), n, &caps, 1)?.summary();
        if n <= plan.nmax {
            let c = random_covariance(&p, n)?.cov_rm;
            compare(
                "random",
                &name,
                n.to_string(),
                plan.tol,
                &[("cov_rm", c, en.cov_rm)],
                &mut out,
            );
        }
        if n <= plan.mixture_nmax {
            let mix = mixture_random(&p, n, 1)?.summary();
            compare(
                "mixture",
                &name,
                n.to_string(),
                plan.tol,
                &triple(&mix, &en),
                &mut out,
            );
        }
    }
    let fixed_cells = p.cell_probs_fixed();
    for n0 in 1..=plan.arm_max {
        for n1 in 1..=plan.arm_max {
            let an = Summary::from(&fixed_moments(&p, n0, n1)?);
            let en = enumerate_fixed(&fixed_cells, n0, n1, &caps, 1)?.summary();
            compare(
                "fixed",
                &name,
                format!("({n0}, {n1})"),
                plan.tol,
                &triple(&an, &en),
                &mut out,
            );
        }
    }
    Ok(out)
}

/// Run the plan; settings are spread over `workers`.
pub fn run(plan: &VerifyPlan, workers: usize) -> Result<Vec<Comparison>> {
    let grid = sample_grid(plan.grid_size);
    let parts = map_ordered(grid.len(), workers, |i| one_setting(&grid[i], plan));
    let mut out = Vec::new();
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_walk() {
        assert_eq!(FULL_GRID, 2304);
        let first = grid_point(0);
        assert_eq!(label(&first), "px=1/4 pz=1/4 py=1/5,1/5,1/5,1/5");
        assert_eq!(label(&grid_point(1)), "px=1/4 pz=1/4 py=1/5,1/5,1/5,2/5");
        assert_eq!(
            label(&grid_point(FULL_GRID - 1)),
            "px=3/4 pz=3/4 py=4/5,4/5,4/5,4/5"
        );
        let g = sample_grid(20);
        assert_eq!(g.len(), 20);
        assert_eq!(g[0], first);
    }

    #[test]
    fn tiny_plan_passes() {
        let plan = VerifyPlan {
            grid_size: 2,
            nmax: 3,
            arm_max: 2,
            mixture_nmax: 3,
            tol: 1e-12,
        };
        let rows = run(&plan, 1).unwrap();
        // per setting: 2 random, 2 * 3 mixture, 4 * 3 fixed
        assert_eq!(rows.len(), 2 * (2 + 6 + 12));
        assert!(rows.iter().all(|r| r.pass), "{rows:?}");
    }
}
