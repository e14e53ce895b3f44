use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use streamalloc::allocator::{max_matching, BipartiteGraph, ChannelAllocator, ChannelMatrix};
use streamalloc::model::ChannelModel;
use streamalloc::noback::{noback_solve, NobackInstance, NobackUser};
use streamalloc::optimizer::conc_min;
use streamalloc::{GridProb, Rational, UserProfile};

fn users(n: usize, rng: &mut ChaCha8Rng) -> Vec<UserProfile> {
    (0..n)
        .map(|_| UserProfile::power_law(GridProb::new(rng.random_range(8..=16), 20).unwrap(), 0.5).unwrap())
        .collect()
}

fn bench_conc_min(c: &mut Criterion) {
    let mut group = c.benchmark_group("conc_min");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in [10usize, 20, 40, 80] {
        let u = users(n, &mut rng);
        let cap = Rational::from_integer((2 * n / 5) as i64);
        group.bench_with_input(BenchmarkId::from_parameter(n), &u, |b, u| b.iter(|| conc_min(black_box(u), cap)));
    }
    group.finish();
}

fn bench_matching(c: &mut Criterion) {
    let mut group = c.benchmark_group("max_matching");
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for m in [8usize, 32, 128] {
        let mut g = BipartiteGraph::new(m, m);
        for l in 0..m {
            for r in 0..m {
                if rng.random_bool(0.5) {
                    g.add_edge(l, r);
                }
            }
        }
        group.bench_with_input(BenchmarkId::from_parameter(m), &g, |b, g| b.iter(|| max_matching(black_box(g))));
    }
    group.finish();
}

fn bench_allocate(c: &mut Criterion) {
    let mut group = c.benchmark_group("allocate_epoch");
    for n in [10usize, 30, 100] {
        let m = 2 * n / 5;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = users(n, &mut rng);
        let alpha = conc_min(&u, Rational::from_integer(m as i64)).unwrap().rates;
        let alloc = ChannelAllocator::new(&alpha, m).unwrap();
        let model = ChannelModel::uniform(n, m, 0.6).unwrap();
        let mut h = ChannelMatrix::all_on(n, m);
        group.bench_function(BenchmarkId::from_parameter(n), |b| {
            b.iter(|| {
                h.resample(&model, &mut rng);
                alloc.allocate(&h, &mut rng)
            })
        });
    }
    group.finish();
}

fn bench_noback(c: &mut Criterion) {
    let mut group = c.benchmark_group("noback_solve");
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in [10usize, 100, 1000] {
        let users = (0..n)
            .map(|_| {
                let a: f64 = rng.random_range(0.0..0.5);
                NobackUser::uniform(rng.random_range(0.5..2.0), a, a + rng.random_range(0.1..0.5))
            })
            .collect();
        let inst = NobackInstance::new(users, Rational::new(n as i64, 10)).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &inst, |b, i| b.iter(|| noback_solve(black_box(i))));
    }
    group.finish();
}

criterion_group!(benches, bench_conc_min, bench_matching, bench_allocate, bench_noback);
criterion_main!(benches);
