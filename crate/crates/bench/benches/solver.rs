use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use regmdp::{evaluate_policy, random_mdp, rng_from_seed, solve_optimal, Policy, Regularizer, SolveOptions};

const SIZES: [(usize, usize); 3] = [(5, 3), (20, 5), (50, 10)];

fn regularizers() -> [Regularizer; 2] {
    [
        Regularizer::neg_entropy(0.1).unwrap(),
        Regularizer::squared_norm(0.1).unwrap(),
    ]
}

fn bench_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_optimal");
    for (ns, na) in SIZES {
        let m = random_mdp(ns, na, 0.9, 1).unwrap();
        for reg in regularizers() {
            group.bench_with_input(BenchmarkId::new(reg.to_string(), format!("{ns}x{na}")), &m, |b, m| {
                b.iter(|| solve_optimal(black_box(m), &reg, &SolveOptions::default()).unwrap())
            });
        }
    }
    group.finish();
}

fn bench_evaluate(c: &mut Criterion) {
    let mut group = c.benchmark_group("evaluate_policy");
    let reg = Regularizer::neg_entropy(0.1).unwrap();
    for (ns, na) in SIZES {
        let m = random_mdp(ns, na, 0.9, 1).unwrap();
        let pi = Policy::random(ns, na, &mut rng_from_seed(2));
        group.bench_function(format!("{ns}x{na}"), |b| {
            b.iter(|| evaluate_policy(black_box(&m), &reg, &pi).unwrap())
        });
    }
    group.finish();
}

fn bench_simplex_max(c: &mut Criterion) {
    let mut group = c.benchmark_group("simplex_max");
    let q: Vec<f64> = (0..10).map(|a| (a as f64 * 0.37).sin()).collect();
    for reg in regularizers() {
        group.bench_function(reg.to_string(), |b| b.iter(|| reg.simplex_max(black_box(&q)).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, bench_solve, bench_evaluate, bench_simplex_max);
criterion_main!(benches);
