//! Seeded Monte Carlo of `(R, M)`.
//!
//! Draws are split into fixed-size chunks. Chunk `i` owns the ChaCha stream
//! `i` of the run seed, and its co-moments are merged in chunk order, so
//! the result is bitwise identical for any worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::combine::variance_p;
use crate::error::{Error, Result};
use crate::estimators::{r_and_m, Counts};
use crate::model::{CellKind, CellProbs, Design, VStructParams};
use crate::par::map_ordered;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub design: Design,
    pub reps: u64,
    pub seed: u64,
    pub chunk_size: u64,
    #[serde(skip)]
    pub workers: usize,
    /// Extra `alpha` values at which to report `V[P(alpha)]`.
    #[serde(default)]
    pub alphas: Vec<f64>,
}

impl SimConfig {
    pub fn new(design: Design, reps: u64, seed: u64) -> Self {
        SimConfig {
            design,
            reps,
            seed,
            chunk_size: 1 << 16,
            workers: 1,
            alphas: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::domain("reps", "need reps >= 1"));
        }
        if self.chunk_size == 0 {
            return Err(Error::domain("chunk-size", "need chunk size >= 1"));
        }
        if let Some(a) = self.alphas.iter().find(|a| !a.is_finite()) {
            return Err(Error::domain("alpha", format!("{a} is not finite")));
        }
        Ok(())
    }

    pub fn chunks(&self) -> u64 {
        self.reps.div_ceil(self.chunk_size)
    }
}

/// Multinomial draw by a chain of conditional binomials.
fn multinomial<R: Rng + ?Sized>(n: u64, p: &[f64], out: &mut [u64], rng: &mut R) {
    let mut left = n;
    let mut mass = 1.0;
    let last = p.len() - 1;
    for (i, &pi) in p.iter().enumerate() {
        if i == last || left == 0 {
            out[i] = left;
            left = 0;
            continue;
        }
        let q = if mass > 0.0 {
            (pi / mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let k = Binomial::new(left, q)
            .expect("probability clamped to [0, 1]")
            .sample(rng);
        out[i] = k;
        left -= k;
        mass -= pi;
    }
}

/// One draw of the eight cell counts under `design`.
pub fn sample_counts<R: Rng + ?Sized>(
    probs: &CellProbs<f64>,
    design: &Design,
    rng: &mut R,
) -> Result<Counts> {
    let mut n = [0u64; 8];
    match (*design, probs.kind) {
        (Design::Random { n: size }, CellKind::Random) => {
            multinomial(size as u64, &probs.p, &mut n, rng)
        }
        (Design::Fixed { n0, n1 }, CellKind::Fixed) => {
            multinomial(n0 as u64, &probs.p[..4], &mut n[..4], rng);
            multinomial(n1 as u64, &probs.p[4..], &mut n[4..], rng);
        }
        (d, k) => {
            return Err(Error::domain(
                "design",
                format!("{:?} design with {k:?} cell probabilities", d.regime()),
            ));
        }
    }
    Counts::new(n)
}

/// Count, means and centred co-moments of `(R, M)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CoMoments {
    pub n: u64,
    pub mean_r: f64,
    pub mean_m: f64,
    pub m2_r: f64,
    pub m2_m: f64,
    pub c_rm: f64,
}

impl CoMoments {
    pub fn push(&mut self, r: f64, m: f64) {
        self.n += 1;
        let k = self.n as f64;
        let dr = r - self.mean_r;
        let dm = m - self.mean_m;
        self.mean_r += dr / k;
        self.mean_m += dm / k;
        self.m2_r += dr * (r - self.mean_r);
        self.m2_m += dm * (m - self.mean_m);
        self.c_rm += dr * (m - self.mean_m);
    }

    /// Pairwise combination of two disjoint samples.
    pub fn merge(&self, o: &CoMoments) -> CoMoments {
        if self.n == 0 {
            return *o;
        }
        if o.n == 0 {
            return *self;
        }
        let n = self.n + o.n;
        let (na, nb, nn) = (self.n as f64, o.n as f64, n as f64);
        let dr = o.mean_r - self.mean_r;
        let dm = o.mean_m - self.mean_m;
        let w = na * nb / nn;
        CoMoments {
            n,
            mean_r: self.mean_r + dr * nb / nn,
            mean_m: self.mean_m + dm * nb / nn,
            m2_r: self.m2_r + o.m2_r + dr * dr * w,
            m2_m: self.m2_m + o.m2_m + dm * dm * w,
            c_rm: self.c_rm + o.c_rm + dr * dm * w,
        }
    }

    /// Sample `(V[R], V[M], C[R, M])` with the `n - 1` divisor.
    pub fn sample_cov(&self) -> Option<(f64, f64, f64)> {
        (self.n >= 2).then(|| {
            let d = (self.n - 1) as f64;
            (self.m2_r / d, self.m2_m / d, self.c_rm / d)
        })
    }
}

/// A point estimate with its jackknife standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: Option<f64>,
    pub se: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaVariance {
    pub alpha: f64,
    pub var_p: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub design: Design,
    pub reps: u64,
    pub seed: u64,
    pub chunk_size: u64,
    pub chunks: u64,
    /// False when fewer than two draws were made; every second-moment
    /// field is then absent.
    pub variances_defined: bool,
    /// Draws with an empty treatment or control arm.
    pub empty_arm_draws: u64,
    pub mean_r: Estimate,
    pub mean_m: Estimate,
    pub var_r: Estimate,
    pub var_m: Estimate,
    pub cov_rm: Estimate,
    pub sqrt_var_r: Estimate,
    pub sqrt_var_m: Estimate,
    /// Absent if the sample covariance is negative.
    pub sqrt_cov_rm: Estimate,
    /// Sample alpha* and `V[P(alpha)]` at alpha* and the requested values.
    pub alpha_star: Estimate,
    pub var_p: Vec<AlphaVariance>,
}

#[derive(Clone, Copy, Debug, Default)]
struct Chunk {
    moments: CoMoments,
    empty_arm: u64,
}

fn run_chunk(cfg: &SimConfig, probs: &CellProbs<f64>, index: u64) -> Result<Chunk> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index);
    let start = index * cfg.chunk_size;
    let len = cfg.chunk_size.min(cfg.reps - start);
    let mut out = Chunk::default();
    for _ in 0..len {
        let c = sample_counts(probs, &cfg.design, &mut rng)?;
        if c.n0() == 0 || c.n1() == 0 {
            out.empty_arm += 1;
        }
        let (r, m) = r_and_m(&c);
        out.moments.push(r, m);
    }
    Ok(out)
}

/// Statistic of the merged co-moments and its delete-one-chunk jackknife
/// standard error.
fn jackknife(
    total: &CoMoments,
    prefix: &[CoMoments],
    suffix: &[CoMoments],
    stat: impl Fn(&CoMoments) -> Option<f64>,
) -> Estimate {
    let value = stat(total);
    let g = prefix.len() - 1;
    if value.is_none() || g < 2 {
        return Estimate { value, se: None };
    }
    let mut loo = Vec::with_capacity(g);
    for i in 0..g {
        match stat(&prefix[i].merge(&suffix[i + 1])) {
            Some(v) => loo.push(v),
            None => return Estimate { value, se: None },
        }
    }
    let gf = g as f64;
    let mean = loo.iter().sum::<f64>() / gf;
    let ss: f64 = loo.iter().map(|v| (v - mean) * (v - mean)).sum();
    Estimate {
        value,
        se: Some(((gf - 1.0) / gf * ss).sqrt()),
    }
}

pub fn run_simulation(cfg: &SimConfig, params: &VStructParams<f64>) -> Result<SimResult> {
    cfg.validate()?;
    let probs = match cfg.design {
        Design::Random { .. } => params.cell_probs(),
        Design::Fixed { .. } => params.cell_probs_fixed(),
    };
    let chunks = cfg.chunks();
    let parts: Vec<Chunk> = map_ordered(chunks as usize, cfg.workers, |i| {
        run_chunk(cfg, &probs, i as u64)
    })
    .into_iter()
    .collect::<Result<_>>()?;

    // prefix[i] covers chunks < i, suffix[i] covers chunks >= i
    let g = parts.len();
    let mut prefix = vec![CoMoments::default(); g + 1];
    let mut suffix = vec![CoMoments::default(); g + 1];
    for i in 0..g {
        prefix[i + 1] = prefix[i].merge(&parts[i].moments);
    }
    for i in (0..g).rev() {
        suffix[i] = parts[i].moments.merge(&suffix[i + 1]);
    }
    let total = prefix[g];
    let jk = |f: &dyn Fn(&CoMoments) -> Option<f64>| jackknife(&total, &prefix, &suffix, f);

    let var = |m: &CoMoments| m.sample_cov();
    let alpha_star = |m: &CoMoments| {
        let (a, b, c) = var(m)?;
        crate::combine::optimal_alpha(a, b, c).ok()
    };
    let mut var_p = Vec::new();
    var_p.push(AlphaVariance {
        alpha: alpha_star(&total).unwrap_or(f64::NAN),
        var_p: jk(&|m| {
            let (a, b, c) = var(m)?;
            crate::combine::variance_p_star(a, b, c).ok()
        }),
    });
    for &alpha in &cfg.alphas {
        var_p.push(AlphaVariance {
            alpha,
            var_p: jk(&|m| var(m).map(|(a, b, c)| variance_p(a, b, c, alpha))),
        });
    }
    if var_p[0].alpha.is_nan() {
        var_p.remove(0);
    }

    Ok(SimResult {
        design: cfg.design,
        reps: cfg.reps,
        seed: cfg.seed,
        chunk_size: cfg.chunk_size,
        chunks,
        variances_defined: total.n >= 2,
        empty_arm_draws: parts.iter().map(|p| p.empty_arm).sum(),
        mean_r: jk(&|m| Some(m.mean_r)),
        mean_m: jk(&|m| Some(m.mean_m)),
        var_r: jk(&|m| var(m).map(|v| v.0)),
        var_m: jk(&|m| var(m).map(|v| v.1)),
        cov_rm: jk(&|m| var(m).map(|v| v.2)),
        sqrt_var_r: jk(&|m| var(m).map(|v| v.0.sqrt())),
        sqrt_var_m: jk(&|m| var(m).map(|v| v.1.sqrt())),
        sqrt_cov_rm: jk(&|m| var(m).and_then(|v| (v.2 >= 0.0).then(|| v.2.sqrt()))),
        alpha_star: jk(&alpha_star),
        var_p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> VStructParams<f64> {
        VStructParams::new(1.0 / 3.0, 2.0 / 3.0, [1.0 / 6.0, 0.5, 1.0 / 3.0, 5.0 / 6.0]).unwrap()
    }

    #[test]
    fn treated_only_mass() {
        let p = VStructParams::new(1.0, 0.5, [0.5; 4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let c = sample_counts(&p.cell_probs(), &Design::random(12).unwrap(), &mut rng).unwrap();
            assert_eq!(c.n0(), 0);
            assert_eq!(c.total(), 12);
        }
    }

    #[test]
    fn empty_fixed_arm_stays_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = sample_counts(
            &params().cell_probs_fixed(),
            &Design::fixed(5, 0).unwrap(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(&c.n[4..], &[0, 0, 0, 0]);
        assert_eq!(c.n0(), 5);
        assert!(sample_counts(
            &params().cell_probs(),
            &Design::fixed(5, 1).unwrap(),
            &mut rng
        )
        .is_err());
    }

    #[test]
    fn same_seed_same_draws() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20)
                .map(|_| {
                    sample_counts(
                        &params().cell_probs(),
                        &Design::random(30).unwrap(),
                        &mut rng,
                    )
                    .unwrap()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }

    #[test]
    fn single_rep_has_no_variance() {
        let cfg = SimConfig::new(Design::random(10).unwrap(), 1, 3);
        let r = run_simulation(&cfg, &params()).unwrap();
        assert!(!r.variances_defined);
        assert_eq!(r.var_r.value, None);
        assert_eq!(r.sqrt_cov_rm.value, None);
        assert!(r.mean_r.value.is_some());
    }

    #[test]
    fn merge_matches_single_pass() {
        let xs: Vec<(f64, f64)> = (0..40)
            .map(|i| ((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut all = CoMoments::default();
        xs.iter().for_each(|&(r, m)| all.push(r, m));
        let (mut a, mut b) = (CoMoments::default(), CoMoments::default());
        xs[..13].iter().for_each(|&(r, m)| a.push(r, m));
        xs[13..].iter().for_each(|&(r, m)| b.push(r, m));
        let ab = a.merge(&b);
        assert_eq!(ab.n, all.n);
        for (x, y) in [
            (ab.mean_r, all.mean_r),
            (ab.m2_r, all.m2_r),
            (ab.c_rm, all.c_rm),
            (ab.m2_m, all.m2_m),
        ] {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_arms_do_not_abort() {
        let p = VStructParams::new(0.05, 0.5, [0.3, 0.4, 0.5, 0.6]).unwrap();
        let mut cfg = SimConfig::new(Design::random(10).unwrap(), 5000, 4);
        cfg.chunk_size = 500;
        let r = run_simulation(&cfg, &p).unwrap();
        assert!(r.empty_arm_draws > 1000, "{}", r.empty_arm_draws);
        assert!(r.var_r.value.unwrap().is_finite());
    }

    #[test]
    fn worker_count_is_invisible() {
        let mut cfg = SimConfig::new(Design::fixed(6, 4).unwrap(), 3000, 11);
        cfg.chunk_size = 256;
        cfg.alphas = vec![0.0, 0.5];
        let one = run_simulation(&cfg, &params()).unwrap();
        cfg.workers = 4;
        assert_eq!(one, run_simulation(&cfg, &params()).unwrap());
    }
}
