use std::hint::black_box;

use aliquot_bench::{beta_config, SIEVE_SIZES};
use aliquot_core::alpha::{alpha_upper_bound, AlphaParams};
use aliquot_core::beta::{main_term, s_set_visit, BetaOptions};
use aliquot_core::primes::{factored_range, for_each_prime, SieveConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

fn sieve(c: &mut Criterion) {
    let mut group = c.benchmark_group("sieve");
    group.sample_size(10);
    for n in SIEVE_SIZES {
        group.throughput(Throughput::Elements(n));
        group.bench_with_input(BenchmarkId::new("count_primes", n), &n, |b, &n| {
            b.iter(|| {
                let mut count = 0u64;
                for_each_prime(2, n, &SieveConfig::default(), |_| count += 1).unwrap();
                black_box(count)
            })
        });
    }
    group.finish();
}

fn factored(c: &mut Criterion) {
    let mut group = c.benchmark_group("factored_range");
    group.sample_size(10);
    for n in SIEVE_SIZES {
        group.throughput(Throughput::Elements(n));
        group.bench_with_input(BenchmarkId::new("all", n), &n, |b, &n| {
            b.iter(|| black_box(factored_range(1, n, false).unwrap().map(|(_, f)| f.entries().len()).sum::<usize>()))
        });
        group.bench_with_input(BenchmarkId::new("odd", n), &n, |b, &n| {
            b.iter(|| black_box(factored_range(1, n, true).unwrap().count()))
        });
    }
    group.finish();
}

fn alpha(c: &mut Criterion) {
    let mut group = c.benchmark_group("alpha");
    group.sample_size(10);
    for n in [100_000u64, 1_000_000] {
        let params = AlphaParams::new(n, 15, 15).unwrap();
        group.bench_with_input(BenchmarkId::new("upper_bound", n), &params, |b, p| {
            b.iter(|| black_box(alpha_upper_bound(p, 0).unwrap().upper_bound))
        });
    }
    group.finish();
}

fn beta(c: &mut Criterion) {
    let mut group = c.benchmark_group("beta");
    group.sample_size(10);
    let config = beta_config();
    for workers in [1usize, 0] {
        let opts = BetaOptions {
            workers,
            ..BetaOptions::default()
        };
        group.bench_with_input(BenchmarkId::new("main_term_workers", workers), &opts, |b, o| {
            b.iter(|| black_box(main_term(&config, o).unwrap().value))
        });
    }
    group.bench_function("s_set_j2_e075", |b| b.iter(|| black_box(s_set_visit(2, 0.75, true, u64::MAX, |_| {}).unwrap().count)));
    group.finish();
}

criterion_group!(benches, sieve, factored, alpha, beta);
criterion_main!(benches);
