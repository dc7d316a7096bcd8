//! Large-sample closed forms for the covariance of `R` and `M` (random X)
//! and for `V[R]`, `V[M]`, `C[M, R]` (block-randomised X).
//!
//! These drop the events in which a Z-stratum of an arm is empty, so they
//! differ from the exact moments by terms of order `(1 - pi)^n`. Each
//! evaluator exists in a corrected form and, where a printed term was found
//! wrong against enumeration, an as-printed form kept for diagnostics.
//! See `ERRATA.md`.

use serde::{Deserialize, Serialize};

use crate::analytic::exact::{STRATA, STRATUM_SIGN};
use crate::error::{Error, Result};
use crate::hypergeom::{f22_terminating, inv_sq_mean};
use crate::model::VStructParams;
use crate::numeric::{compensated_sum, NeumaierSum};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    #[default]
    Corrected,
    AsPrinted,
}

/// A named additive term, for `--explain` dumps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub label: String,
    pub value: f64,
}

fn term(label: &str, value: f64) -> Term {
    Term {
        label: label.to_string(),
        value,
    }
}

fn total(terms: &[Term]) -> f64 {
    compensated_sum(terms.iter().map(|t| t.value))
}

/// `num / den`, or zero when the whole term is multiplied by a vanishing
/// cell product.
fn frac(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn open_unit(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::domain(
            name,
            format!("{v} must lie strictly between 0 and 1"),
        ));
    }
    Ok(())
}

/// Centred covariances `C[M_ab, R_c]`, indexed `[M11, M10, M01, M00][R1, R0]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentCov {
    pub values: [[f64; 2]; 4],
}

impl ComponentCov {
    pub const M_LABELS: [&'static str; 4] = ["M11", "M10", "M01", "M00"];
    pub const R_LABELS: [&'static str; 2] = ["R1", "R0"];

    pub fn get(&self, m: &str, r: &str) -> Option<f64> {
        let i = Self::M_LABELS.iter().position(|&l| l == m)?;
        let j = Self::R_LABELS.iter().position(|&l| l == r)?;
        Some(self.values[i][j])
    }

    pub fn labelled(&self) -> Vec<Term> {
        let mut out = Vec::with_capacity(8);
        for (i, m) in Self::M_LABELS.iter().enumerate() {
            for (j, r) in Self::R_LABELS.iter().enumerate() {
                out.push(term(&format!("{m}.{r}"), self.values[i][j]));
            }
        }
        out
    }

    /// `C[R, M]` assembled with the estimator signs.
    pub fn signed_sum(&self) -> f64 {
        let mut acc = NeumaierSum::new();
        for (s, row) in self.values.iter().enumerate() {
            acc.add(STRATUM_SIGN[s] as f64 * (row[0] - row[1]));
        }
        acc.total()
    }
}

struct RandomKernels {
    p: [f64; 8],
    px: f64,
    pz: f64,
    n: f64,
    /// `(1-px)^(N-2) F(2-N; -px/(1-px))`
    ka: f64,
    /// `px^(N-2) F(2-N; -(1-px)/px)`
    kb: f64,
}

impl RandomKernels {
    fn new(params: &VStructParams<f64>, n: u32) -> Result<Self> {
        open_unit("px", params.px)?;
        if n < 2 {
            return Err(Error::domain("n", format!("need n >= 2, got {n}")));
        }
        Ok(RandomKernels {
            p: params.cell_probs().p,
            px: params.px,
            pz: params.pz,
            n: n as f64,
            ka: inv_sq_mean(n - 2, &params.px),
            kb: inv_sq_mean(n - 2, &(1.0 - params.px)),
        })
    }

    /// `p_a p_b / (p_a + p_b)^2`
    fn pair(&self, a: usize, b: usize) -> f64 {
        frac(self.p[a] * self.p[b], (self.p[a] + self.p[b]).powi(2))
    }

    /// `p_b / (p_a + p_b)`
    fn rate(&self, a: usize, b: usize) -> f64 {
        frac(self.p[b], self.p[a] + self.p[b])
    }
}

/// The eight component covariances for random X.
pub fn component_cov_random(
    params: &VStructParams<f64>,
    n: u32,
    variant: Variant,
) -> Result<ComponentCov> {
    let k = RandomKernels::new(params, n)?;
    let (p, px, pz, nn) = (&k.p, k.px, k.pz, k.n);
    let qx = 1.0 - px;
    // the first treated-arm term was printed with one power of (1-px) too few
    let first_power = match variant {
        Variant::Corrected => qx,
        Variant::AsPrinted => 1.0,
    };
    let det0 = p[0] * p[3] - p[1] * p[2];
    let det1 = p[5] * p[6] - p[4] * p[7];
    let mut v = [[0.0; 2]; 4];
    v[0][0] = k.pair(6, 7) * (nn - 1.0) * pz * px * first_power * k.ka
        + (p[4] + p[6]) * p[7] / (nn * px * px);
    v[0][1] = frac(det0 * p[7], nn * qx * qx * (p[6] + p[7]));
    v[1][0] = k.pair(4, 5) * (nn - 1.0) * (1.0 - pz) * px * qx * k.ka
        + (p[4] + p[6]) * p[5] / (nn * px * px);
    v[1][1] = -frac(det0 * p[5], nn * qx * qx * (p[4] + p[5]));
    v[2][0] = -frac(det1 * p[3], nn * px * px * (p[2] + p[3]));
    v[2][1] =
        k.pair(2, 3) * (nn - 1.0) * pz * qx * px * k.kb + (p[0] + p[2]) * p[3] / (nn * qx * qx);
    v[3][0] = frac(det1 * p[1], nn * px * px * (p[0] + p[1]));
    v[3][1] = k.pair(0, 1) * (nn - 1.0) * (1.0 - pz) * qx * px * k.kb
        + (p[0] + p[2]) * p[1] / (nn * qx * qx);
    Ok(ComponentCov { values: v })
}

/// Term-by-term `C[R, M] * N` for random X.
pub fn cov_rm_random_terms(
    params: &VStructParams<f64>,
    n: u32,
    variant: Variant,
) -> Result<Vec<Term>> {
    let k = RandomKernels::new(params, n)?;
    let (p, px, pz, nn) = (&k.p, k.px, k.pz, k.n);
    let qx = 1.0 - px;
    let (first_power, cross_sign) = match variant {
        Variant::Corrected => (qx, -1.0),
        Variant::AsPrinted => (1.0, 1.0),
    };
    let big = nn * (nn - 1.0);
    Ok(vec![
        term("F.M11", k.pair(6, 7) * big * pz * px * first_power * k.ka),
        term("F.M10", k.pair(4, 5) * big * (1.0 - pz) * px * qx * k.ka),
        term("F.M01", k.pair(2, 3) * big * pz * qx * px * k.kb),
        term("F.M00", k.pair(0, 1) * big * (1.0 - pz) * qx * px * k.kb),
        term("tail.treated", (p[4] + p[6]) * (p[5] + p[7]) / (px * px)),
        term("tail.control", (p[0] + p[2]) * (p[1] + p[3]) / (qx * qx)),
        term(
            "cross",
            cross_sign
                * 2.0
                * (k.rate(6, 7) - k.rate(4, 5))
                * (k.rate(2, 3) - k.rate(0, 1))
                * pz
                * (1.0 - pz),
        ),
    ])
}

/// Large-sample `C[R, M]` for random X.
pub fn cov_rm_random(params: &VStructParams<f64>, n: u32, variant: Variant) -> Result<f64> {
    Ok(total(&cov_rm_random_terms(params, n, variant)?) / n as f64)
}

fn fixed_arms(n0: u32, n1: u32) -> Result<()> {
    if n0 == 0 {
        return Err(Error::domain("n0", "arm must be non-empty"));
    }
    if n1 == 0 {
        return Err(Error::domain("n1", "arm must be non-empty"));
    }
    Ok(())
}

/// `V[R]` for block-randomised X; exact.
pub fn var_r_fixed(params: &VStructParams<f64>, n0: u32, n1: u32) -> Result<f64> {
    fixed_arms(n0, n1)?;
    let (p1, p0) = (params.outcome_rate(1), params.outcome_rate(0));
    Ok(p1 * (1.0 - p1) / n1 as f64 + p0 * (1.0 - p0) / n0 as f64)
}

/// Term-by-term `V[M] * N^2` for block-randomised X.
pub fn var_m_fixed_terms(
    params: &VStructParams<f64>,
    n0: u32,
    n1: u32,
    variant: Variant,
) -> Result<Vec<Term>> {
    fixed_arms(n0, n1)?;
    let pz = params.pz;
    open_unit("pz", pz)?;
    let r = params.cell_probs_fixed().p;
    let (f0, f1, nn) = (n0 as f64, n1 as f64, (n0 + n1) as f64);
    let arm = |x: usize| if x == 1 { (n1, n0) } else { (n0, n1) };
    let mut terms = Vec::new();
    for (s, &(x, z)) in STRATA.iter().enumerate() {
        let (c0, c1) = (4 * x + 2 * z, 4 * x + 2 * z + 1);
        let pi = params.z_prob(z);
        let (nx, nb) = arm(x);
        let kernel = if s == 3 && variant == Variant::AsPrinted {
            // printed with the argument of the opposite stratum
            pz.powi(nx as i32 - 1) * f22_terminating(nx - 1, -pz / (1.0 - pz))
        } else {
            inv_sq_mean(nx - 1, &pi)
        };
        let lead = r[c0] * r[c1];
        let v = if lead == 0.0 {
            0.0
        } else {
            f0 * f1 * lead * (1.0 + (nb as f64 - 1.0) * pi) * kernel
        };
        terms.push(term(&format!("F.{}", ComponentCov::M_LABELS[s]), v));
    }
    for (s, &(x, z)) in STRATA.iter().enumerate() {
        let c1 = 4 * x + 2 * z + 1;
        terms.push(term(
            &format!("binomial.{}", ComponentCov::M_LABELS[s]),
            nn * r[c1] * (1.0 - r[c1]),
        ));
    }
    for (s, &(x, z)) in STRATA.iter().enumerate() {
        let (c0, c1) = (4 * x + 2 * z, 4 * x + 2 * z + 1);
        let (_, nb) = arm(x);
        terms.push(term(
            &format!("stratum.{}", ComponentCov::M_LABELS[s]),
            frac(r[c0] * r[c1], params.z_prob(z)) * nb as f64,
        ));
    }
    terms.push(term("cross.arms", 2.0 * nn * (r[7] - r[3]) * (r[1] - r[5])));
    terms.push(term("cross.z1", -2.0 * nn * r[3] * r[7] * (1.0 - pz) / pz));
    terms.push(term("cross.z0", -2.0 * nn * r[1] * r[5] * pz / (1.0 - pz)));
    Ok(terms)
}

/// Large-sample `V[M]` for block-randomised X.
pub fn var_m_fixed(params: &VStructParams<f64>, n0: u32, n1: u32, variant: Variant) -> Result<f64> {
    let nn = (n0 + n1) as f64;
    Ok(total(&var_m_fixed_terms(params, n0, n1, variant)?) / (nn * nn))
}

/// Term-by-term `C[M, R]` for block-randomised X.
pub fn cov_rm_fixed_terms(params: &VStructParams<f64>, n0: u32, n1: u32) -> Result<Vec<Term>> {
    fixed_arms(n0, n1)?;
    let pz = params.pz;
    open_unit("pz", pz)?;
    let r = params.cell_probs_fixed().p;
    let (f0, f1, nn) = (n0 as f64, n1 as f64, (n0 + n1) as f64);
    let qz = 1.0 - pz;
    Ok(vec![
        term("mean", -(r[7] + r[5] - r[3] - r[1]).powi(2) / nn),
        term("z1", (r[7] - r[3]).powi(2) / (pz * nn)),
        term("z0", (r[5] - r[1]).powi(2) / (qz * nn)),
        term("M11", r[6] * r[7] / (pz * f1)),
        term("M10", r[4] * r[5] / (qz * f1)),
        term("M01", r[2] * r[3] / (pz * f0)),
        term("M00", r[0] * r[1] / (qz * f0)),
    ])
}

/// Large-sample `C[M, R]` for block-randomised X.
pub fn cov_rm_fixed(params: &VStructParams<f64>, n0: u32, n1: u32) -> Result<f64> {
    Ok(total(&cov_rm_fixed_terms(params, n0, n1)?))
}

/// Component-level closed forms for block-randomised X.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedComponents {
    /// `E[M11], E[M10], E[M01], E[M00]`
    pub mean_m: [f64; 4],
    /// `E[R1], E[R0]`
    pub mean_r: [f64; 2],
    pub cov_mr: ComponentCov,
    /// `C[M_s, M_t]`, symmetric, diagonal holds the variances.
    pub cov_mm: [[f64; 4]; 4],
}

pub fn component_moments_fixed(
    params: &VStructParams<f64>,
    n0: u32,
    n1: u32,
) -> Result<FixedComponents> {
    fixed_arms(n0, n1)?;
    open_unit("pz", params.pz)?;
    let r = params.cell_probs_fixed().p;
    let (f0, f1, nn) = (n0 as f64, n1 as f64, (n0 + n1) as f64);
    let arm = |x: usize| if x == 1 { (n1, n0) } else { (n0, n1) };
    let y1 = |x: usize, z: usize| r[4 * x + 2 * z + 1];
    let y0 = |x: usize, z: usize| r[4 * x + 2 * z];
    let mean_m = STRATA.map(|(x, z)| y1(x, z));
    let mean_r = [params.outcome_rate(1), params.outcome_rate(0)];

    let mut cov_mr = [[0.0; 2]; 4];
    for (s, &(x, z)) in STRATA.iter().enumerate() {
        let pi = params.z_prob(z);
        let (nx, _) = arm(x);
        let ri = 1 - x;
        cov_mr[s][ri] = -mean_m[s] * mean_r[ri] / nn
            + y0(x, z) * y1(x, z) / (pi * nx as f64)
            + y1(x, z).powi(2) / (pi * nn);
        let rb = x;
        cov_mr[s][rb] = -mean_m[s] * mean_r[rb] / nn + y1(x, z) * y1(1 - x, z) / (pi * nn);
    }

    let mut cov_mm = [[0.0; 4]; 4];
    for (s, &(x, z)) in STRATA.iter().enumerate() {
        for (t, &(xt, zt)) in STRATA.iter().enumerate() {
            let pi = params.z_prob(z);
            cov_mm[s][t] = if s == t {
                let (nx, nb) = arm(x);
                let lead = y0(x, z) * y1(x, z);
                let hyper = if lead == 0.0 {
                    0.0
                } else {
                    f0 * f1 * lead * (1.0 + (nb as f64 - 1.0) * pi) * inv_sq_mean(nx - 1, &pi)
                };
                (nn * y1(x, z) * (1.0 - y1(x, z)) + lead / pi * nb as f64 + hyper) / (nn * nn)
            } else if z == zt {
                y1(x, z) * y1(xt, zt) * (1.0 - pi) / (nn * pi)
            } else {
                -mean_m[s] * mean_m[t] / nn
            };
        }
    }
    Ok(FixedComponents {
        mean_m,
        mean_r,
        cov_mr: ComponentCov { values: cov_mr },
        cov_mm,
    })
}

impl FixedComponents {
    pub fn var_m(&self) -> f64 {
        let mut acc = NeumaierSum::new();
        for s in 0..4 {
            for t in 0..4 {
                acc.add((STRATUM_SIGN[s] * STRATUM_SIGN[t]) as f64 * self.cov_mm[s][t]);
            }
        }
        acc.total()
    }

    pub fn cov_rm(&self) -> f64 {
        self.cov_mr.signed_sum()
    }
}
