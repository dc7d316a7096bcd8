//! Exact finite-sample moments of the estimator components.
//!
//! Conditioning on the four stratum sizes `K_{xz}` makes the outcome counts
//! independent binomials, and the law of total covariance reduces every
//! moment to low-order binomial moments, some restricted to the event that
//! a stratum is non-empty. Nothing is neglected, so these agree with full
//! enumeration to the last bit in rational arithmetic.

use crate::error::{Error, Result};
use crate::hypergeom::inv_mean_positive;
use crate::model::{stratum, VStructParams};
use crate::numeric::Scalar;

/// `(x, z)` of each marginal component, in the order `M11, M10, M01, M00`.
pub const STRATA: [(usize, usize); 4] = [(1, 1), (1, 0), (0, 1), (0, 0)];
/// `+1` for the treated-arm terms of `M`, `-1` for the control-arm ones.
pub const STRATUM_SIGN: [i8; 4] = [1, 1, -1, -1];

/// Component index of `R_x` in the `[R1, R0, M11, M10, M01, M00]` order.
pub const fn r_index(x: usize) -> usize {
    1 - x
}

/// Component index of stratum `s` (position in [`STRATA`]).
pub const fn m_index(s: usize) -> usize {
    2 + s
}

/// Means and full covariance of the six components plus the assembled
/// totals.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentMoments<T> {
    pub mean: [T; 6],
    pub cov: [[T; 6]; 6],
    pub e_r: T,
    pub e_m: T,
    pub var_r: T,
    pub var_m: T,
    pub cov_rm: T,
}

impl<T: Scalar> ComponentMoments<T> {
    pub fn from_components(mean: [T; 6], cov: [[T; 6]; 6]) -> Self {
        use crate::estimators::{M_SIGNS, R_SIGNS};
        let dot = |s: &[i8; 6]| signed_sum(s, |i| mean[i].clone());
        let quad = |a: &[i8; 6], b: &[i8; 6]| {
            let mut acc = T::Acc::default();
            for i in 0..6 {
                for j in 0..6 {
                    let k = a[i] * b[j];
                    if k != 0 {
                        let v = cov[i][j].clone();
                        T::acc_add(&mut acc, if k > 0 { v } else { -v });
                    }
                }
            }
            T::acc_total(&acc)
        };
        ComponentMoments {
            e_r: dot(&R_SIGNS),
            e_m: dot(&M_SIGNS),
            var_r: quad(&R_SIGNS, &R_SIGNS),
            var_m: quad(&M_SIGNS, &M_SIGNS),
            cov_rm: quad(&R_SIGNS, &M_SIGNS),
            mean,
            cov,
        }
    }
}

fn signed_sum<T: Scalar>(signs: &[i8; 6], f: impl Fn(usize) -> T) -> T {
    let mut acc = T::Acc::default();
    for (i, &s) in signs.iter().enumerate() {
        match s {
            1 => T::acc_add(&mut acc, f(i)),
            -1 => T::acc_add(&mut acc, -f(i)),
            _ => {}
        }
    }
    T::acc_total(&acc)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Mask {
    All,
    /// `K >= 1`
    Ge1,
    /// `K <= n - 1`
    LeNm1,
    Both,
}

impl Mask {
    fn and(self, other: Mask) -> Mask {
        match (self, other) {
            (Mask::All, m) | (m, Mask::All) => m,
            (a, b) if a == b => a,
            _ => Mask::Both,
        }
    }
}

/// `E[K^j; mask]` for `K ~ Bin(n, pi)`, `j <= 2`, `n >= 1`.
fn masked_moment<T: Scalar>(n: u32, pi: &T, mask: Mask, j: u32) -> T {
    let nt = T::from_u64(n as u64);
    let q = T::one() - pi.clone();
    let mut e = match j {
        0 => T::one(),
        1 => nt.clone() * pi.clone(),
        2 => {
            nt.clone() * pi.clone() * q.clone() + nt.clone() * nt.clone() * pi.clone() * pi.clone()
        }
        _ => unreachable!("only moments up to order two are needed"),
    };
    if j == 0 && matches!(mask, Mask::Ge1 | Mask::Both) {
        e = e - q.powu(n);
    }
    if matches!(mask, Mask::LeNm1 | Mask::Both) {
        e = e - nt.powu(j) * pi.powu(n);
    }
    e
}

fn binom2(c: usize, i: usize) -> u64 {
    match (c, i) {
        (2, 1) => 2,
        _ => 1,
    }
}

/// Exact moments for block-randomised X with arm sizes `n0`, `n1 >= 1`.
pub fn fixed_moments<T: Scalar>(
    params: &VStructParams<T>,
    n0: u32,
    n1: u32,
) -> Result<ComponentMoments<T>> {
    if n0 == 0 || n1 == 0 {
        return Err(Error::domain(
            if n0 == 0 { "n0" } else { "n1" },
            "both arms must be non-empty",
        ));
    }
    let big_n = n0 + n1;
    let nt = T::from_u64(big_n as u64);
    let arm = |x: usize| if x == 1 { n1 } else { n0 };
    let a = |x: usize, z: usize| params.py[stratum(x, z)].clone();
    let pi = |z: usize| params.z_prob(z);
    let rate = |x: usize| params.outcome_rate(x);
    let t = |v: u32| T::from_u64(v as u64);

    // E[I_s Z_s], with I_s the non-empty indicator and Z_s the Z-stratum total
    let a_term = |x: usize, z: usize| {
        let p = pi(z);
        let q = T::one() - p.clone();
        let (nx, nb) = (arm(x), arm(1 - x));
        t(nx) * p.clone() + (T::one() - q.powu(nx)) * t(nb) * p
    };
    // E[I_s Z_s K_s] / n_x
    let b_term = |z: usize| {
        let p = pi(z);
        p.clone() * (T::one() - p.clone()) + nt.clone() * p.clone() * p
    };
    // E[I_s Z_s K_{x-bar, z}] / n_{x-bar}
    let c_term = |x: usize, z: usize| {
        let p = pi(z);
        let q = T::one() - p.clone();
        let (nx, nb) = (arm(x), arm(1 - x));
        (T::one() - q.clone().powu(nx)) * (p.clone() * q + t(nb) * p.clone() * p.clone())
            + t(nx) * p.clone() * p
    };

    let mut mean: [T; 6] = std::array::from_fn(|_| T::zero());
    let mut cov: [[T; 6]; 6] = std::array::from_fn(|_| std::array::from_fn(|_| T::zero()));

    for x in 0..2 {
        let r = rate(x);
        mean[r_index(x)] = r.clone();
        cov[r_index(x)][r_index(x)] = r.clone() * (T::one() - r) / t(arm(x));
    }
    for (s, &(x, z)) in STRATA.iter().enumerate() {
        mean[m_index(s)] = a(x, z) * a_term(x, z) / nt.clone();
    }

    for (s, &(x, z)) in STRATA.iter().enumerate() {
        let a_s = a(x, z);
        let v_s = a_s.clone() * (T::one() - a_s.clone());
        let em = mean[m_index(s)].clone();
        let at = a_term(x, z);

        let azb = a(x, 1 - z);
        let same = v_s.clone() * at.clone() / (nt.clone() * t(arm(x)))
            + a_s.clone() / nt.clone()
                * (azb.clone() * at.clone() + (a_s.clone() - azb) * b_term(z))
            - em.clone() * rate(x);
        let xb = 1 - x;
        let other = a_s.clone() / nt.clone()
            * (a(xb, 1 - z) * at.clone() + (a(xb, z) - a(xb, 1 - z)) * c_term(x, z))
            - em * rate(xb);
        cov[m_index(s)][r_index(x)] = same.clone();
        cov[r_index(x)][m_index(s)] = same;
        cov[m_index(s)][r_index(xb)] = other.clone();
        cov[r_index(xb)][m_index(s)] = other;
    }

    // M-M block: K ~ Bin(n1, pz) and J ~ Bin(n0, pz) are the Z=1 counts
    let u = params.pz.clone();
    let mask_of = |x: usize, z: usize| (x, if z == 1 { Mask::Ge1 } else { Mask::LeNm1 });
    let zpoly = |z: usize| -> [T; 2] {
        if z == 1 {
            [T::zero(), T::one()]
        } else {
            [nt.clone(), -T::one()]
        }
    };
    let e_prod = |s: (usize, usize), r: (usize, usize)| {
        let (mut mk, mut mj) = (Mask::All, Mask::All);
        for (x, m) in [mask_of(s.0, s.1), mask_of(r.0, r.1)] {
            if x == 1 {
                mk = mk.and(m);
            } else {
                mj = mj.and(m);
            }
        }
        let (p1, p2) = (zpoly(s.1), zpoly(r.1));
        let coef = [
            p1[0].clone() * p2[0].clone(),
            p1[0].clone() * p2[1].clone() + p1[1].clone() * p2[0].clone(),
            p1[1].clone() * p2[1].clone(),
        ];
        let mut acc = T::Acc::default();
        for (c, cf) in coef.iter().enumerate() {
            if cf.is_zero() {
                continue;
            }
            for i in 0..=c {
                let term = cf.clone()
                    * T::from_u64(binom2(c, i))
                    * masked_moment(n1, &u, mk, i as u32)
                    * masked_moment(n0, &u, mj, (c - i) as u32);
                T::acc_add(&mut acc, term);
            }
        }
        T::acc_total(&acc)
    };
    let n2 = nt.clone() * nt.clone();
    for (s, &(x, z)) in STRATA.iter().enumerate() {
        for (r, &(y, w)) in STRATA.iter().enumerate().skip(s) {
            let (a_s, a_r) = (a(x, z), a(y, w));
            let v = if s == r {
                let p = pi(z);
                let q = T::one() - p.clone();
                let (nx, nb) = (arm(x), arm(1 - x));
                // E[I_s Z_s^2 / K_s]
                let e_iz2k = t(nx) * p.clone()
                    + T::from_u64(2) * (T::one() - q.powu(nx)) * t(nb) * p.clone()
                    + inv_mean_positive(nx, &p)
                        * (t(nb) * p.clone() * q + t(nb) * t(nb) * p.clone() * p);
                let at = a_term(x, z);
                a_s.clone() * (T::one() - a_s.clone()) * e_iz2k / n2.clone()
                    + a_s.clone() * a_s * (e_prod((x, z), (x, z)) - at.clone() * at) / n2.clone()
            } else {
                a_s * a_r * (e_prod((x, z), (y, w)) - a_term(x, z) * a_term(y, w)) / n2.clone()
            };
            cov[m_index(s)][m_index(r)] = v.clone();
            cov[m_index(r)][m_index(s)] = v;
        }
    }

    Ok(ComponentMoments::from_components(mean, cov))
}

/// Moments when every unit lands in arm `x`: both estimators reduce to the
/// same binomial proportion, and the empty arm contributes zeros.
pub fn single_arm_moments<T: Scalar>(
    params: &VStructParams<T>,
    n: u32,
    x: usize,
) -> ComponentMoments<T> {
    let p = params.outcome_rate(x);
    let v = p.clone() * (T::one() - p.clone()) / T::from_u64(n as u64);
    let mut mean: [T; 6] = std::array::from_fn(|_| T::zero());
    let mut cov: [[T; 6]; 6] = std::array::from_fn(|_| std::array::from_fn(|_| T::zero()));
    mean[r_index(x)] = p;
    let live: Vec<usize> = STRATA
        .iter()
        .enumerate()
        .filter(|(_, st)| st.0 == x)
        .map(|(s, _)| s)
        .collect();
    for &s in &live {
        let (_, z) = STRATA[s];
        mean[m_index(s)] = params.z_prob(z) * params.py[stratum(x, z)].clone();
    }
    // R_x = sum of the two live M components, each a cell proportion
    let cell_var = |s: usize, r: usize| {
        let (ps, pr) = (mean[m_index(s)].clone(), mean[m_index(r)].clone());
        let n = T::from_u64(n as u64);
        if s == r {
            ps.clone() * (T::one() - ps) / n
        } else {
            -(ps * pr) / n
        }
    };
    for &s in &live {
        for &r in &live {
            cov[m_index(s)][m_index(r)] = cell_var(s, r);
        }
        let with_r = live.iter().fold(T::zero(), |acc, &r| acc + cell_var(s, r));
        cov[m_index(s)][r_index(x)] = with_r.clone();
        cov[r_index(x)][m_index(s)] = with_r;
    }
    cov[r_index(x)][r_index(x)] = v;
    ComponentMoments::from_components(mean, cov)
}

/// `C[M_s, R_x]` for randomly assigned X, indexed `[stratum][R1, R0]`, plus
/// the component means.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomCovariance<T> {
    pub mean: [T; 6],
    pub cov_mr: [[T; 2]; 4],
    pub cov_rm: T,
}

/// Exact `C[R, M]` and its eight components for random X.
pub fn random_covariance<T: Scalar>(
    params: &VStructParams<T>,
    n: u32,
) -> Result<RandomCovariance<T>> {
    if params.px <= T::zero() || params.px >= T::one() {
        return Err(Error::domain("px", "must lie strictly between 0 and 1"));
    }
    if n < 1 {
        return Err(Error::domain("n", "need n >= 1"));
    }
    let nt = T::from_u64(n as u64);
    let a = |x: usize, z: usize| params.py[stratum(x, z)].clone();
    let pi = |z: usize| params.z_prob(z);
    let parm = |x: usize| params.x_prob(x);

    // E[y^n], E[(N - n) y^n] for n ~ Bin(N, p)
    let ey = |p: &T, y: &T| (T::one() - p.clone() + p.clone() * y.clone()).powu(n);
    let enb = |p: &T, y: &T| {
        let q = T::one() - p.clone();
        nt.clone() * q.clone() * (q + p.clone() * y.clone()).powu(n - 1)
    };
    // E[(1 - y^n)/n; n >= 1]
    let g_diff = |p: &T, y: &T| {
        let w = T::binomial_weights(n, p);
        let mut acc = T::Acc::default();
        for (k, wk) in w.into_iter().enumerate().skip(1) {
            T::acc_add(
                &mut acc,
                wk * (T::one() - y.powu(k as u32)) / T::from_u64(k as u64),
            );
        }
        T::acc_total(&acc)
    };
    let e_a = |x: usize, z: usize| {
        let (p, pr) = (parm(x), pi(z));
        let qr = T::one() - pr.clone();
        nt.clone() * p.clone() * pr.clone()
            + pr * (nt.clone() * (T::one() - p.clone()) - enb(&p, &qr))
    };

    let mut mean: [T; 6] = std::array::from_fn(|_| T::zero());
    for x in 0..2 {
        let q = T::one() - parm(x);
        mean[r_index(x)] = params.outcome_rate(x) * (T::one() - q.powu(n));
    }
    for (s, &(x, z)) in STRATA.iter().enumerate() {
        mean[m_index(s)] = a(x, z) * e_a(x, z) / nt.clone();
    }

    let mut cov_mr: [[T; 2]; 4] = std::array::from_fn(|_| [T::zero(), T::zero()]);
    for (s, &(x, z)) in STRATA.iter().enumerate() {
        let (p, pr) = (parm(x), pi(z));
        let q = T::one() - p.clone();
        let qr = T::one() - pr.clone();
        let a_s = a(x, z);
        let v_s = a_s.clone() * (T::one() - a_s.clone());
        let em = mean[m_index(s)].clone();
        let ea = e_a(x, z);

        let p_ge1 = T::one() - q.powu(n);
        let eq_ge1 = ey(&p, &qr) - q.powu(n);
        let ea_over_n = pr.clone() * p_ge1.clone()
            + pr.clone() * (nt.clone() * g_diff(&p, &qr) - (p_ge1.clone() - eq_ge1));
        let eb = (pr.clone() * qr.clone() + nt.clone() * pr.clone() * pr.clone()) * p_ge1;
        let azb = a(x, 1 - z);
        let same = v_s * ea_over_n / nt.clone()
            + a_s.clone() / nt.clone() * (azb.clone() * ea.clone() + (a_s.clone() - azb) * eb)
            - em.clone() * mean[r_index(x)].clone();

        let xb = 1 - x;
        let p_n = p.powu(n);
        let ea_r = ea - nt.clone() * pr.clone() * p_n.clone();
        let full = pr.clone() * qr.clone() * (T::one() - ey(&p, &qr))
            + pr.clone() * pr.clone() * (nt.clone() * q - enb(&p, &qr))
            + pr.clone() * pr.clone() * nt.clone() * p;
        let at_n = ((T::one() - qr.powu(n)) * pr.clone() * qr + nt.clone() * pr.clone() * pr) * p_n;
        let other = a_s / nt.clone()
            * (a(xb, 1 - z) * ea_r + (a(xb, z) - a(xb, 1 - z)) * (full - at_n))
            - em * mean[r_index(xb)].clone();

        cov_mr[s][r_index(x)] = same;
        cov_mr[s][r_index(xb)] = other;
    }

    let mut acc = T::Acc::default();
    for (s, row) in cov_mr.iter().enumerate() {
        for (ri, v) in row.iter().enumerate() {
            let sign = STRATUM_SIGN[s] * if ri == 0 { 1 } else { -1 };
            T::acc_add(&mut acc, if sign > 0 { v.clone() } else { -v.clone() });
        }
    }
    Ok(RandomCovariance {
        mean,
        cov_mr,
        cov_rm: T::acc_total(&acc),
    })
}
