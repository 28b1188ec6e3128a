use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use regdual::duality::{duality_gap_report, q_objective_minimize, solve_dual_value};
use regdual::solvers::{frank_wolfe_maximize, policy_iteration, soft_value_iteration};
use regdual::{Objective, QTable, ValueTable};
use regdual_bench::random;
use std::hint::black_box;

fn primal(c: &mut Criterion) {
    let mut group = c.benchmark_group("primal");
    for n_states in [10, 20, 50] {
        let inst = random(1, n_states, 4);
        group.bench_with_input(BenchmarkId::new("policy_iteration", n_states), &inst, |b, inst| {
            b.iter(|| policy_iteration(black_box(&inst.mdp), black_box(&inst.reward)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("soft_value_iteration", n_states), &inst, |b, inst| {
            b.iter(|| soft_value_iteration(black_box(&inst.mdp), black_box(&inst.reward), 0.5).unwrap())
        });
    }
    let inst = random(2, 10, 4);
    let tsallis = Objective::tsallis2(inst.reward.clone(), 0.5).unwrap();
    group.bench_function("frank_wolfe_tsallis_10", |b| {
        b.iter(|| frank_wolfe_maximize(&inst.mdp, black_box(&tsallis), 1e-6, 50_000).unwrap())
    });
    group.finish();
}

fn dual(c: &mut Criterion) {
    let mut group = c.benchmark_group("dual");
    group.sample_size(10);
    for eps in [0.05, 0.5] {
        let inst = random(3, 20, 4);
        let obj = Objective::entropy_sac(inst.reward.clone(), eps).unwrap();
        group.bench_with_input(BenchmarkId::new("sac_value_dual_20", eps), &obj, |b, obj| {
            b.iter(|| solve_dual_value(&inst.mdp, black_box(obj), &ValueTable::zeros(20), 1e-12).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sac_report_20", eps), &obj, |b, obj| {
            b.iter(|| duality_gap_report(&inst.mdp, black_box(obj)).unwrap())
        });
    }
    let inst = random(4, 8, 3);
    let obj = Objective::entropy_sac(inst.reward.clone(), 0.5).unwrap();
    group.bench_function("sac_q_minimum_8", |b| {
        b.iter(|| q_objective_minimize(&inst.mdp, black_box(&obj), &QTable::zeros(8, 3), 1e-9).unwrap())
    });
    group.finish();
}

criterion_group!(benches, primal, dual);
criterion_main!(benches);
