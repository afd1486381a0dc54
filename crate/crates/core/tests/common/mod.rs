#![allow(dead_code)]

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use windsmooth::cp::{fit_cp, CpGrid};
use windsmooth::market::reference_units;
use windsmooth::mpc::{build_problem, HorizonProblem, Traces};
use windsmooth::{TurbineParams, TurbineState};

pub fn params() -> TurbineParams {
    TurbineParams::reference(fit_cp(&CpGrid::default()).unwrap().coeffs)
}

/// Seeded single-turbine instance with one or two steps.
pub fn small_instance(seed: u64) -> HorizonProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = params();
    let steps = 1 + (seed % 2) as usize;
    let v0: f64 = rng.random_range(5.0..12.0);
    let wind: Vec<f64> = (0..steps)
        .map(|_| (v0 + rng.random_range(-1.0..1.0)).max(3.0))
        .collect();
    let state = TurbineState {
        omega: rng.random_range(p.omega_min..p.omega_max),
        beta: rng.random_range(0.0..8.0),
        p_e: 0.0,
    };
    let traces = Traces {
        wind: vec![wind],
        imbalance: (0..steps).map(|_| rng.random_range(-2.0..2.0)).collect(),
        schedule: (0..steps).map(|_| rng.random_range(0.5..4.5)).collect(),
    };
    let alpha = rng.random_range(0.0..1.0);
    build_problem(
        &[state],
        &traces,
        0,
        steps,
        0.0,
        4.0,
        alpha,
        &p,
        &reference_units(),
    )
    .unwrap()
}
