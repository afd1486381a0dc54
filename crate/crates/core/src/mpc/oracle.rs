use super::{DecisionTrajectory, Evaluator, HorizonProblem};
use crate::error::{Error, Result};

/// Exhaustive minimum over a rotor-speed × pitch grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub objective: f64,
    pub trajectory: DecisionTrajectory,
    pub evaluations: usize,
}

pub const ORACLE_MAX_STEPS: usize = 2;
pub const ORACLE_MAX_GRID: usize = 100;

/// Enumerates every `(ω, β)` grid combination of a single-turbine problem
/// of at most two steps, skipping pitch sequences that break the rate
/// limit, and returns the best objective.
pub fn brute_force_oracle(prob: &HorizonProblem, grid_res: usize) -> Result<OracleResult> {
    if prob.turbines() != 1 || prob.steps() > ORACLE_MAX_STEPS {
        return Err(Error::Config(format!(
            "oracle is limited to one turbine and {ORACLE_MAX_STEPS} steps, got {} × {}",
            prob.turbines(),
            prob.steps()
        )));
    }
    if !(2..=ORACLE_MAX_GRID).contains(&grid_res) {
        return Err(Error::Config(format!(
            "oracle grid must have 2..={ORACLE_MAX_GRID} points per axis"
        )));
    }
    let p = &prob.params;
    let linspace = |lo: f64, hi: f64| -> Vec<f64> {
        (0..grid_res)
            .map(|k| lo + (hi - lo) * k as f64 / (grid_res - 1) as f64)
            .collect()
    };
    let omegas = linspace(p.omega_min, p.omega_max);
    let betas = linspace(p.beta_min, p.beta_max);
    let max_move = p.pitch_step(prob.dt) + 1e-12;
    let beta0 = prob.initial_states[0].beta;

    let mut eval = Evaluator::new(prob);
    let mut best = (f64::INFINITY, [0.0; 2], [0.0; 2]);
    let mut evaluations = 0;
    let steps = prob.steps();

    let mut omega = [0.0; 2];
    let mut beta = [0.0; 2];
    for &w1 in &omegas {
        for &b1 in betas.iter().filter(|&&b| (b - beta0).abs() <= max_move) {
            omega[0] = w1;
            beta[0] = b1;
            if steps == 1 {
                let f = eval.value(&omega[..1], &beta[..1]).objective;
                evaluations += 1;
                if f < best.0 {
                    best = (f, omega, beta);
                }
                continue;
            }
            for &w2 in &omegas {
                for &b2 in betas.iter().filter(|&&b| (b - b1).abs() <= max_move) {
                    omega[1] = w2;
                    beta[1] = b2;
                    let f = eval.value(&omega, &beta).objective;
                    evaluations += 1;
                    if f < best.0 {
                        best = (f, omega, beta);
                    }
                }
            }
        }
    }
    Ok(OracleResult {
        objective: best.0,
        trajectory: DecisionTrajectory {
            steps,
            turbines: 1,
            omega: best.1[..steps].to_vec(),
            beta: best.2[..steps].to_vec(),
        },
        evaluations,
    })
}
