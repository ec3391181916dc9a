use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use fedowen_core::budget::BudgetMeter;
use fedowen_core::estimators::{
    mc_shapley, owen_strict, owen_walk, OwenConfig, WalkNormalization,
};
use fedowen_core::game::{exact_shapley, normalize};
use fedowen_core::games::random_monotone_game;

fn bench_exact_oracle(c: &mut Criterion) {
    let mut group = c.benchmark_group("exact_shapley");
    for n in [8usize, 12, 16] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| {
                let game = random_monotone_game(n, 7).unwrap();
                black_box(exact_shapley(&game).unwrap())
            });
        });
    }
    group.finish();
}

fn bench_owen_walk(c: &mut Criterion) {
    let mut group = c.benchmark_group("owen_walk_n12_budget_nM");
    for m in [16usize, 64, 256] {
        group.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, &m| {
            b.iter(|| {
                let game = normalize(random_monotone_game(12, 7).unwrap()).unwrap();
                let cfg = OwenConfig {
                    q_levels: 2,
                    draws_per_level: m / 2,
                    eta: 0.05,
                    normalization: WalkNormalization::Visited,
                    seed: 3,
                };
                let budget = BudgetMeter::new((12 * m) as u64);
                black_box(owen_walk(&game, &cfg, &budget).unwrap())
            });
        });
    }
    group.finish();
}

fn bench_mc_vs_strict(c: &mut Criterion) {
    let mut group = c.benchmark_group("sampling_n12");
    group.bench_function("mc_64_permutations", |b| {
        b.iter(|| {
            let game = random_monotone_game(12, 7).unwrap();
            let budget = BudgetMeter::new(12 * 64);
            black_box(mc_shapley(&game, 64, &budget, 3).unwrap())
        });
    });
    group.bench_function("owen_strict_q4_m16", |b| {
        b.iter(|| {
            let game = random_monotone_game(12, 7).unwrap();
            black_box(owen_strict(&game, 4, 16, 3).unwrap())
        });
    });
    group.finish();
}

criterion_group!(benches, bench_exact_oracle, bench_owen_walk, bench_mc_vs_strict);
criterion_main!(benches);
