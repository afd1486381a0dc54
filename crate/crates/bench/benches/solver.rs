use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use windsmooth::cp::{fit_cp, CpGrid};
use windsmooth::market::MeritOrder;
use windsmooth::mpc::{objective_eval, solve_horizon, DecisionTrajectory, SolverConfig};
use windsmooth::sim::{run_scenario, ScenarioConfig};
use windsmooth_bench::farm_problem;

fn cp_fit(c: &mut Criterion) {
    let grid = CpGrid::default();
    c.bench_function("fit_cp/default_grid", |b| {
        b.iter(|| fit_cp(black_box(&grid)))
    });
}

fn dispatch(c: &mut Criterion) {
    let merit = MeritOrder::new(&windsmooth::market::reference_units()).unwrap();
    c.bench_function("dispatch/reference_units", |b| {
        b.iter(|| merit.dispatch(black_box(3.7)))
    });
}

fn objective(c: &mut Criterion) {
    let prob = farm_problem(10, 0.3);
    let traj = DecisionTrajectory::mppt(&prob);
    c.bench_function("objective_eval/4x10", |b| {
        b.iter(|| objective_eval(black_box(&traj), &prob))
    });
}

fn solve(c: &mut Criterion) {
    let prob = farm_problem(10, 0.3);
    let cfg = SolverConfig::default();
    let mut group = c.benchmark_group("solve_horizon");
    group.sample_size(20);
    group.bench_function("cold/4x10", |b| b.iter(|| solve_horizon(&prob, None, &cfg)));
    let (warm, _) = solve_horizon(&prob, None, &cfg).unwrap();
    group.bench_function("warm/4x10", |b| {
        b.iter(|| solve_horizon(&prob, Some(&warm), &cfg))
    });
    group.finish();
}

fn scenario(c: &mut Criterion) {
    let cfg = ScenarioConfig {
        duration_s: 120.0,
        ..ScenarioConfig::default()
    };
    let mut group = c.benchmark_group("run_scenario");
    group.sample_size(10);
    group.bench_function("two_minutes", |b| b.iter(|| run_scenario(&cfg)));
    group.finish();
}

criterion_group!(benches, cp_fit, dispatch, objective, solve, scenario);
criterion_main!(benches);
