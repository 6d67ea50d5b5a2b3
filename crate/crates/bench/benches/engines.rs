use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use overrun_bench::{five_stage, triangular, upper_stop};
use overrun_core::combine::{combine_recursive, StageWeights};
use overrun_core::group::gs_stage_densities;
use overrun_core::linear::CrossingTable;
use overrun_core::numerics::{phi_bar, z_of};
use overrun_core::{Design, GridOptions, OperatingCharacteristics, OverrunData, OverrunModel};

fn numerics(c: &mut Criterion) {
    c.bench_function("phi_bar", |b| b.iter(|| phi_bar(black_box(1.7))));
    c.bench_function("z_of", |b| b.iter(|| z_of(black_box(0.0123))));
}

fn crossing_table(c: &mut Criterion) {
    let mut group = c.benchmark_group("crossing_table");
    group.sample_size(10);
    for steps in [500, 1000, 2000] {
        group.bench_with_input(BenchmarkId::from_parameter(steps), &steps, |b, &n| {
            b.iter(|| CrossingTable::build(&triangular(), 0.0, &GridOptions::with_steps(n)))
        });
    }
    group.finish();
}

fn tilted_p(c: &mut Criterion) {
    let table = CrossingTable::build(&triangular(), 0.0, &GridOptions::with_steps(1000)).unwrap();
    let o = upper_stop();
    c.bench_function("stagewise_p_tilted", |b| {
        b.iter(|| table.stagewise_p(&o, black_box(0.4)))
    });
}

fn group_densities(c: &mut Criterion) {
    let g = five_stage();
    c.bench_function("gs_stage_densities_k5", |b| {
        b.iter(|| gs_stage_densities(&g, black_box(0.5)))
    });
}

fn combination(c: &mut Criterion) {
    let w = StageWeights::from_increments(&[1.0, 2.0, 1.5, 0.5]).unwrap();
    let ps = [0.2, 0.04, 0.5, 0.31];
    c.bench_function("combine_recursive_k4", |b| {
        b.iter(|| combine_recursive(black_box(&ps), &w))
    });
}

fn coverage(c: &mut Criterion) {
    let oc = OperatingCharacteristics::new(&Design::Group(five_stage()), &GridOptions::default())
        .unwrap();
    let ov = OverrunData::model(OverrunModel::Constant, 1.0781);
    let mut group = c.benchmark_group("coverage");
    group.sample_size(10);
    group.bench_function("q_gs_single_drift", |b| {
        b.iter(|| oc.coverage_q(&ov, 0.5, black_box(0.8)))
    });
    group.finish();
}

criterion_group!(
    benches,
    numerics,
    crossing_table,
    tilted_p,
    group_densities,
    combination,
    coverage
);
criterion_main!(benches);
