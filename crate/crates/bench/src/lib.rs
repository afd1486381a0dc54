//! Shared fixtures for the benchmarks.

use windsmooth::cp::{fit_cp, CpGrid};
use windsmooth::market::reference_units;
use windsmooth::mpc::{build_problem, HorizonProblem, Traces};
use windsmooth::signal::OuSpec;
use windsmooth::turbine::mppt_reference;
use windsmooth::{TurbineParams, TurbineState};

pub fn params() -> TurbineParams {
    TurbineParams::reference(
        fit_cp(&CpGrid::default())
            .expect("default grid fits")
            .coeffs,
    )
}

/// The reference farm (4 turbines) over a `steps`-long window of gusty
/// wind, scheduled at its mean available power.
pub fn farm_problem(steps: usize, alpha: f64) -> HorizonProblem {
    let p = params();
    let wind: Vec<Vec<f64>> = (0..4)
        .map(|i| {
            OuSpec {
                mean: 9.0,
                stdev: 1.5,
                correlation_s: 60.0,
                seed: 42 + i,
                floor: Some(0.0),
            }
            .generate(steps, 4.0)
            .expect("valid OU parameters")
        })
        .collect();
    let states: Vec<TurbineState> = wind
        .iter()
        .map(|w| TurbineState::at_mppt(w[0], &p))
        .collect();
    let available = wind
        .iter()
        .flat_map(|w| w.iter().map(|&v| mppt_reference(v, &p).power))
        .sum::<f64>()
        / steps as f64
        / 1e6;
    let imbalance = OuSpec {
        mean: 0.0,
        stdev: 1.0,
        correlation_s: 30.0,
        seed: 7,
        floor: None,
    }
    .generate(steps, 4.0)
    .expect("valid OU parameters");
    let traces = Traces {
        wind,
        imbalance,
        schedule: vec![available; steps],
    };
    build_problem(
        &states,
        &traces,
        0,
        steps,
        0.0,
        4.0,
        alpha,
        &p,
        &reference_units(),
    )
    .expect("consistent problem")
}
