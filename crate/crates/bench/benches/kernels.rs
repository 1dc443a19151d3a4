use std::hint::black_box;

use backhaul_bench::{batch, env, network};
use backhaul_core::agent::{td_targets, train_step};
use backhaul_core::baselines::myopic_alloc;
use backhaul_core::env::enumerate_actions;
use criterion::{criterion_group, criterion_main, Criterion};

fn forward(c: &mut Criterion) {
    for (k, cap) in [(3, 20_000), (5, 20_000), (6, 60_000)] {
        let e = env(k, 20, cap);
        let net = network(&e, 128);
        let obs = e.observe();
        c.bench_function(&format!("forward k={k} a={}", e.num_actions()), |b| {
            b.iter(|| net.forward(black_box(&obs)).unwrap())
        });
    }
}

fn sgd_step(c: &mut Criterion) {
    let mut e = env(5, 20, 20_000);
    let mut net = network(&e, 128);
    let target = net.clone();
    let refs = batch(&mut e, 64);
    let targets = td_targets(&refs, &target, 0.9).unwrap();
    c.bench_function("td targets batch=64 k=5", |b| {
        b.iter(|| td_targets(black_box(&refs), &target, 0.9).unwrap())
    });
    c.bench_function("sgd step batch=64 k=5", |b| {
        b.iter(|| train_step(&mut net, black_box(&refs), &targets, 1e-6).unwrap())
    });
}

fn allocation(c: &mut Criterion) {
    c.bench_function("enumerate k=6 m=20", |b| {
        b.iter(|| enumerate_actions(black_box(6), 20, 60_000).unwrap())
    });
    let e = env(6, 20, 60_000);
    c.bench_function("myopic k=6 m=20", |b| {
        b.iter(|| myopic_alloc(black_box(e.state()), e.config()))
    });
    let mut stepping = env(6, 20, 60_000);
    c.bench_function("env step k=6", |b| {
        b.iter(|| stepping.apply_index(black_box(17)).unwrap())
    });
}

criterion_group!(benches, forward, sgd_step, allocation);
criterion_main!(benches);
