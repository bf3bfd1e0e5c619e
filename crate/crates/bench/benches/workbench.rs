// SPDX-License-Identifier: Apache-2.0

use criterion::{criterion_group, criterion_main, Criterion};
use qdi_dpa::dpa::{attack, Algorithm, SelectionFunction};
use qdi_dpa::{builtin_dims_xor, dissym, graph, Assignment, PlacementParams};
use qdi_dpa_bench::{exhaustive_traces, leaky_add_round_key, simulator};

fn bench_graph(c: &mut Criterion) {
    let n = builtin_dims_xor();
    c.bench_function("build_graph_xor", |b| {
        b.iter(|| graph::build_graph(&n).unwrap())
    });
    let g = graph::build_graph(&n).unwrap();
    c.bench_function("verify_balance_xor", |b| {
        b.iter(|| graph::verify_balance(&g).unwrap())
    });
}

fn bench_sim(c: &mut Criterion) {
    let xor = builtin_dims_xor();
    let sim = simulator(&xor);
    let inputs = Assignment::from_values(&xor, [("a", 1), ("b", 0)]).unwrap();
    c.bench_function("run_cycle_xor", |b| {
        b.iter(|| sim.run_cycle(&inputs, 0.0, 0).unwrap())
    });

    let bank = simulator(&leaky_add_round_key(1.0));
    let mut group = c.benchmark_group("collect_traces");
    group.sample_size(10);
    group.bench_function("add_round_key_256", |b| {
        b.iter(|| exhaustive_traces(&bank, 0.0, 0))
    });
    group.finish();
}

fn bench_attack(c: &mut Criterion) {
    let sim = simulator(&leaky_add_round_key(1.0));
    let traces = exhaustive_traces(&sim, 50.0, 7);
    let sel = SelectionFunction::new(Algorithm::AesXor, 0).unwrap();
    let mut group = c.benchmark_group("attack");
    group.sample_size(10);
    group.bench_function("aes_xor_256_guesses", |b| {
        b.iter(|| attack(&traces, sel).unwrap())
    });
    group.finish();
}

fn bench_placement(c: &mut Criterion) {
    let n = leaky_add_round_key(0.0);
    let mut group = c.benchmark_group("placement");
    group.sample_size(10);
    group.bench_function("compare_flows_100", |b| {
        b.iter(|| {
            dissym::compare_flows(
                &n,
                &PlacementParams::flat(0),
                &PlacementParams::hierarchical(0),
                100,
            )
            .unwrap()
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_graph,
    bench_sim,
    bench_attack,
    bench_placement
);
criterion_main!(benches);
