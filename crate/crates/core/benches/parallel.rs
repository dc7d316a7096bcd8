//! Sequential (one worker) against data-parallel runs of the hot paths.
//! Build with `--no-default-features` to time the fallback without rayon.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use vstruct_core::analytic::Family;
use vstruct_core::oracles::{enumerate_fixed, enumerate_random, mixture_random_family, EnumCaps};
use vstruct_core::par::available_workers;
use vstruct_core::simulate::{run_simulation, SimConfig};
use vstruct_core::{Design, VStructParams};

fn reference() -> VStructParams<f64> {
    VStructParams::new(1.0 / 3.0, 2.0 / 3.0, [1.0 / 6.0, 0.5, 1.0 / 3.0, 5.0 / 6.0]).unwrap()
}

fn worker_counts() -> [(&'static str, usize); 2] {
    [("sequential", 1), ("parallel", available_workers().max(2))]
}

fn oracles(c: &mut Criterion) {
    let p = reference();
    let caps = EnumCaps::default();
    let mut g = c.benchmark_group("oracles");
    g.sample_size(10);
    for (label, workers) in worker_counts() {
        g.bench_with_input(
            BenchmarkId::new("enumerate_random_n12", label),
            &workers,
            |b, &w| b.iter(|| enumerate_random(black_box(&p.cell_probs()), 12, &caps, w).unwrap()),
        );
        g.bench_with_input(
            BenchmarkId::new("enumerate_fixed_8x8", label),
            &workers,
            |b, &w| {
                b.iter(|| {
                    enumerate_fixed(black_box(&p.cell_probs_fixed()), 8, 8, &caps, w).unwrap()
                })
            },
        );
        g.bench_with_input(
            BenchmarkId::new("mixture_exact_n2000", label),
            &workers,
            |b, &w| {
                b.iter(|| mixture_random_family(black_box(&p), 2000, Family::Exact, w).unwrap())
            },
        );
    }
    g.finish();
}

fn simulation(c: &mut Criterion) {
    let p = reference();
    let mut g = c.benchmark_group("simulation");
    g.sample_size(10);
    for (label, workers) in worker_counts() {
        let mut cfg = SimConfig::new(Design::random(100).unwrap(), 200_000, 1);
        cfg.chunk_size = 10_000;
        cfg.workers = workers;
        g.bench_with_input(
            BenchmarkId::new("random_n100_200k", label),
            &cfg,
            |b, cfg| b.iter(|| run_simulation(black_box(cfg), &p).unwrap()),
        );
    }
    g.finish();
}

criterion_group!(benches, oracles, simulation);
criterion_main!(benches);
