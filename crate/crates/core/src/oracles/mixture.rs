//! Random-X moments as a binomial mixture of fixed-design moments.
//!
//! With `N1 ~ Bin(N, p_X)`, the law of total covariance gives
//! `C[a, b] = E[C[a, b | N1]] + C[E[a | N1], E[b | N1]]`. The first pass
//! forms the mixture means, the second the centred sums, so no large terms
//! cancel.

use crate::analytic::{
    fixed_moments, large_sample_fixed_components, single_arm_moments, ComponentMoments, Family,
};
use crate::error::{Error, Result};
use crate::model::VStructParams;
use crate::numeric::Scalar;
use crate::par::map_ordered;
use crate::report::Method;

use super::ExactMoments;

fn conditional<T: Scalar>(
    n: u32,
    workers: usize,
    f: impl Fn(u32) -> Result<ComponentMoments<T>> + Sync,
) -> Result<Vec<ComponentMoments<T>>> {
    map_ordered(n as usize + 1, workers, |k| f(k as u32))
        .into_iter()
        .collect()
}

fn combine<T: Scalar>(weights: &[T], parts: &[ComponentMoments<T>]) -> ExactMoments<T> {
    let mut mass = T::Acc::default();
    let mut first: [T::Acc; 6] = std::array::from_fn(|_| T::Acc::default());
    for (w, m) in weights.iter().zip(parts) {
        T::acc_add(&mut mass, w.clone());
        for i in 0..6 {
            T::acc_add(&mut first[i], w.clone() * m.mean[i].clone());
        }
    }
    let mean: [T; 6] = std::array::from_fn(|i| T::acc_total(&first[i]));
    let mut second: [[T::Acc; 6]; 6] =
        std::array::from_fn(|_| std::array::from_fn(|_| T::Acc::default()));
    for (w, m) in weights.iter().zip(parts) {
        if w.is_zero() {
            continue;
        }
        let dev: [T; 6] = std::array::from_fn(|i| m.mean[i].clone() - mean[i].clone());
        for i in 0..6 {
            for j in i..6 {
                let v = m.cov[i][j].clone() + dev[i].clone() * dev[j].clone();
                T::acc_add(&mut second[i][j], w.clone() * v);
            }
        }
    }
    let cov: [[T; 6]; 6] = std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            T::acc_total(&second[a][b])
        })
    });
    ExactMoments {
        method: Method::Mixture,
        moments: ComponentMoments::from_components(mean, cov),
        mass: T::acc_total(&mass),
        neglected_mass: T::zero(),
        support: parts.len() as u64,
    }
}

fn check(n: u32) -> Result<()> {
    if n < 2 {
        return Err(Error::domain("n", "need n >= 2"));
    }
    Ok(())
}

/// Exact random-X moments at any `N`, from the exact fixed-design family.
pub fn mixture_random<T: Scalar>(
    params: &VStructParams<T>,
    n: u32,
    workers: usize,
) -> Result<ExactMoments<T>> {
    check(n)?;
    let weights = T::binomial_weights(n, &params.px);
    let parts = conditional(n, workers, |n1| {
        if weights[n1 as usize].is_zero() {
            // any well-formed value; its weight is zero
            return Ok(single_arm_moments(params, n, 0));
        }
        match n1 {
            0 => Ok(single_arm_moments(params, n, 0)),
            k if k == n => Ok(single_arm_moments(params, n, 1)),
            k => fixed_moments(params, n - k, k),
        }
    })?;
    Ok(combine(&weights, &parts))
}

/// Random-X moments in the chosen family. The large-sample family mixes
/// the closed-form fixed moments over `N1`.
pub fn mixture_random_family(
    params: &VStructParams<f64>,
    n: u32,
    family: Family,
    workers: usize,
) -> Result<ExactMoments<f64>> {
    match family {
        Family::Exact => mixture_random(params, n, workers),
        Family::LargeSample => {
            check(n)?;
            let weights = f64::binomial_weights(n, &params.px);
            let parts = conditional(n, workers, |n1| match n1 {
                _ if weights[n1 as usize] == 0.0 => Ok(single_arm_moments(params, n, 0)),
                0 => Ok(single_arm_moments(params, n, 0)),
                k if k == n => Ok(single_arm_moments(params, n, 1)),
                k => large_sample_fixed_components(params, n - k, k),
            })?;
            Ok(combine(&weights, &parts))
        }
    }
}
