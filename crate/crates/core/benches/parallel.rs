use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use covertime_core::graph::{default_corpus, make_cycle, make_torus, Ball};
use covertime_core::mdp::{self, phi_over_corpus};
use covertime_core::walk::{
    policy_visit_moments, tail_probability_mc_with, tail_probability_splitting_with,
};
use covertime_core::Execution;

const MODES: [(&str, Execution); 2] =
    [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn mc_tail(c: &mut Criterion) {
    let g = make_cycle(14).unwrap();
    let mut group = c.benchmark_group("mc_tail_c14");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| tail_probability_mc_with(&g, 0, 14, black_box(50_000), 1, exec).unwrap())
        });
    }
    group.finish();
}

fn splitting(c: &mut Criterion) {
    let g = make_cycle(20).unwrap();
    let mut group = c.benchmark_group("splitting_c20");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                tail_probability_splitting_with(&g, 0, 20, &[5, 10, 15, 20], 2_000, 1, exec)
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn policy_walks(c: &mut Criterion) {
    let g = make_torus(4, 2).unwrap();
    let value = mdp::solve_cover_mdp(&g, &Ball::new(&g, 0, 1).unwrap()).unwrap();
    let mut group = c.benchmark_group("policy_walks_torus4");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| policy_visit_moments(&g, &value, 10, black_box(20_000), 1, exec).unwrap())
        });
    }
    group.finish();
}

fn corpus_sweep(c: &mut Criterion) {
    let corpus = default_corpus();
    let mut group = c.benchmark_group("phi_corpus_r1");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| phi_over_corpus(&corpus, 1, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, mc_tail, splitting, policy_walks, corpus_sweep);
criterion_main!(benches);
