//! Exhaustive enumeration of multinomial supports.
//!
//! Compositions are walked depth-first with the running product
//! `N! prod_i p_i^{c_i} / c_i!` carried down the recursion, so each outcome
//! costs one multiplication. The two outermost cells are split into
//! independent tasks whose partial sums are merged in task order.

use serde::{Deserialize, Serialize};

use crate::analytic::ComponentMoments;
use crate::error::{Error, Result};
use crate::estimators::{estimate_set, Counts};
use crate::model::{CellKind, CellProbs};
use crate::numeric::{binomial_coefficient, Scalar};
use crate::par::map_ordered;
use crate::report::Method;

use super::ExactMoments;

/// Configurable limits on the support size.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumCaps {
    pub random_max_n: u32,
    pub fixed_max_support: u64,
}

impl Default for EnumCaps {
    fn default() -> Self {
        EnumCaps {
            random_max_n: 16,
            fixed_max_support: 5_000_000,
        }
    }
}

/// Rough float-mode cost per visited outcome.
const NANOS_PER_OUTCOME: f64 = 60.0;

fn refusal(what: &str, support: u64) -> Error {
    let secs = support as f64 * NANOS_PER_OUTCOME * 1e-9;
    Error::CapExceeded {
        what: what.to_string(),
        detail: format!(
            "support of {support} outcomes (about {secs:.1} s single-threaded in float mode, \
             constant memory); raise the cap to proceed"
        ),
    }
}

/// Number of 8-part compositions of `n`.
pub fn random_support(n: u32) -> u64 {
    binomial_coefficient(n as u64 + 7, 7)
}

/// Number of outcome pairs for arms of sizes `n0`, `n1`.
pub fn fixed_support(n0: u32, n1: u32) -> u64 {
    binomial_coefficient(n0 as u64 + 3, 3).saturating_mul(binomial_coefficient(n1 as u64 + 3, 3))
}

#[derive(Clone)]
struct Acc<T: Scalar> {
    mass: T::Acc,
    first: [T::Acc; 6],
    second: [[T::Acc; 6]; 6],
    outcomes: u64,
}

impl<T: Scalar> Acc<T> {
    fn new() -> Self {
        Acc {
            mass: T::Acc::default(),
            first: std::array::from_fn(|_| T::Acc::default()),
            second: std::array::from_fn(|_| std::array::from_fn(|_| T::Acc::default())),
            outcomes: 0,
        }
    }

    fn add(&mut self, w: T, counts: &Counts) {
        let c = estimate_set::<T>(counts).components();
        self.outcomes += 1;
        for i in 0..6 {
            let wc = w.clone() * c[i].clone();
            for j in i..6 {
                T::acc_add(&mut self.second[i][j], wc.clone() * c[j].clone());
            }
            T::acc_add(&mut self.first[i], wc);
        }
        T::acc_add(&mut self.mass, w);
    }

    fn merge(&mut self, other: &Acc<T>) {
        T::acc_merge(&mut self.mass, &other.mass);
        for i in 0..6 {
            T::acc_merge(&mut self.first[i], &other.first[i]);
            for j in i..6 {
                T::acc_merge(&mut self.second[i][j], &other.second[i][j]);
            }
        }
        self.outcomes += other.outcomes;
    }

    fn finish(self, method: Method) -> ExactMoments<T> {
        let mean: [T; 6] = std::array::from_fn(|i| T::acc_total(&self.first[i]));
        let cov: [[T; 6]; 6] = std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let (a, b) = if i <= j { (i, j) } else { (j, i) };
                T::acc_total(&self.second[a][b]) - mean[a].clone() * mean[b].clone()
            })
        });
        let mass = T::acc_total(&self.mass);
        ExactMoments {
            method,
            moments: ComponentMoments::from_components(mean, cov),
            neglected_mass: T::zero(),
            mass,
            support: self.outcomes,
        }
    }
}

/// `table[i][k] = p_i^k / k!`
fn power_tables<T: Scalar>(p: &[T], n: u32) -> Vec<Vec<T>> {
    p.iter()
        .map(|pi| {
            let mut row = Vec::with_capacity(n as usize + 1);
            let mut v = T::one();
            row.push(v.clone());
            for k in 1..=n {
                v = v * pi.clone() / T::from_u64(k as u64);
                row.push(v.clone());
            }
            row
        })
        .collect()
}

fn factorial<T: Scalar>(n: u32) -> T {
    (1..=n).fold(T::one(), |acc, k| acc * T::from_u64(k as u64))
}

/// Visit every composition of `remaining` into cells `depth..cells`, calling
/// `leaf` with the full weight.
fn walk<T: Scalar>(
    tables: &[Vec<T>],
    depth: usize,
    remaining: u32,
    prefix: T,
    counts: &mut [u64],
    leaf: &mut dyn FnMut(T, &[u64]),
) {
    let last = tables.len() - 1;
    if depth == last {
        let t = &tables[depth][remaining as usize];
        if !t.is_zero() {
            counts[depth] = remaining as u64;
            leaf(prefix * t.clone(), counts);
        }
        return;
    }
    for k in 0..=remaining {
        let t = &tables[depth][k as usize];
        if t.is_zero() {
            continue;
        }
        counts[depth] = k as u64;
        walk(
            tables,
            depth + 1,
            remaining - k,
            prefix.clone() * t.clone(),
            counts,
            leaf,
        );
    }
}

/// Exact moments over all `C(N+7, 7)` outcomes of the eight-cell
/// multinomial.
pub fn enumerate_random<T: Scalar>(
    probs: &CellProbs<T>,
    n: u32,
    caps: &EnumCaps,
    workers: usize,
) -> Result<ExactMoments<T>> {
    if probs.kind != CellKind::Random {
        return Err(Error::domain(
            "cells",
            "random-design cell probabilities required",
        ));
    }
    if n == 0 {
        return Err(Error::domain("n", "need n >= 1"));
    }
    if n > caps.random_max_n {
        return Err(refusal(
            &format!("n = {n} (cap {})", caps.random_max_n),
            random_support(n),
        ));
    }
    let tables = power_tables(&probs.p, n);
    let scale = factorial::<T>(n);
    // tasks are the (c0, c1) heads, c0 + c1 <= n
    let heads: Vec<(u32, u32)> = (0..=n)
        .flat_map(|a| (0..=n - a).map(move |b| (a, b)))
        .collect();
    let parts = map_ordered(heads.len(), workers, |h| {
        let (c0, c1) = heads[h];
        let mut acc = Acc::<T>::new();
        let head = tables[0][c0 as usize].clone() * tables[1][c1 as usize].clone();
        if head.is_zero() {
            return acc;
        }
        let mut counts = [0u64; 8];
        counts[0] = c0 as u64;
        counts[1] = c1 as u64;
        walk(
            &tables,
            2,
            n - c0 - c1,
            scale.clone() * head,
            &mut counts,
            &mut |w, c| {
                let c: [u64; 8] = c.try_into().expect("eight cells");
                acc.add(w, &Counts { n: c });
            },
        );
        acc
    });
    let mut total = Acc::<T>::new();
    for p in &parts {
        total.merge(p);
    }
    Ok(total.finish(Method::Enumeration))
}

/// All compositions of one arm with their probabilities.
fn arm_outcomes<T: Scalar>(rho: &[T], n: u32) -> Vec<(T, [u64; 4])> {
    let tables = power_tables(rho, n);
    let mut out = Vec::new();
    let mut counts = [0u64; 4];
    walk(
        &tables,
        0,
        n,
        factorial::<T>(n),
        &mut counts,
        &mut |w, c| {
            out.push((w, c.try_into().expect("four cells")));
        },
    );
    out
}

/// Exact moments over both arms' four-cell multinomials.
pub fn enumerate_fixed<T: Scalar>(
    probs: &CellProbs<T>,
    n0: u32,
    n1: u32,
    caps: &EnumCaps,
    workers: usize,
) -> Result<ExactMoments<T>> {
    if probs.kind != CellKind::Fixed {
        return Err(Error::domain(
            "cells",
            "fixed-design cell probabilities required",
        ));
    }
    if n0 + n1 == 0 {
        return Err(Error::domain("n0", "need n0 + n1 >= 1"));
    }
    let support = fixed_support(n0, n1);
    if support > caps.fixed_max_support {
        return Err(refusal(
            &format!(
                "arms ({n0}, {n1}) (cap {} outcomes)",
                caps.fixed_max_support
            ),
            support,
        ));
    }
    let control = arm_outcomes(&probs.p[..4], n0);
    let treated = arm_outcomes(&probs.p[4..], n1);
    let parts = map_ordered(control.len(), workers, |i| {
        let (w0, c0) = &control[i];
        let mut acc = Acc::<T>::new();
        for (w1, c1) in &treated {
            let mut n = [0u64; 8];
            n[..4].copy_from_slice(c0);
            n[4..].copy_from_slice(c1);
            acc.add(w0.clone() * w1.clone(), &Counts { n });
        }
        acc
    });
    let mut total = Acc::<T>::new();
    for p in &parts {
        total.merge(p);
    }
    Ok(total.finish(Method::Enumeration))
}
