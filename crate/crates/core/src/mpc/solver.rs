use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{project_feasible, DecisionTrajectory, Evaluator, HorizonProblem, ObjectiveValue};
use crate::error::{Error, Result};

/// Tuning of the projected-gradient solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Relative objective improvement regarded as stalled.
    pub tolerance: f64,
    /// Consecutive stalled iterations before declaring convergence.
    pub stall_iterations: usize,
    /// Wall-clock budget per solve (s).
    pub time_budget_s: f64,
    /// Finite-difference step as a fraction of each variable's box width.
    pub fd_step: f64,
    pub armijo_c: f64,
    pub max_backtracks: usize,
    /// Points per axis for the brute-force oracle.
    pub oracle_grid: usize,
    /// Points per coordinate in the basin-escape scan (0 disables it).
    pub scan_points: usize,
    /// Descent restarts allowed after successful scans.
    pub scan_restarts: usize,
    /// Output-bound violation tolerated in a returned plan, as a fraction
    /// of rated power.
    pub violation_tolerance: f64,
    /// Times the penalty weight may be raised tenfold to meet the
    /// violation tolerance.
    pub penalty_escalations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 200,
            tolerance: 1e-6,
            stall_iterations: 3,
            time_budget_s: 10.0,
            fd_step: 1e-4,
            armijo_c: 1e-4,
            max_backtracks: 30,
            oracle_grid: 50,
            scan_points: 51,
            scan_restarts: 20,
            violation_tolerance: 5e-3,
            penalty_escalations: 3,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.time_budget_s > 0.0) {
            return Err(Error::Config("solver time budget must be positive".into()));
        }
        if self.max_iterations == 0 || self.stall_iterations == 0 {
            return Err(Error::Config(
                "solver iteration limits must be positive".into(),
            ));
        }
        if !(self.fd_step > 0.0 && self.tolerance >= 0.0) {
            return Err(Error::Config("invalid solver tolerances".into()));
        }
        if !(self.violation_tolerance >= 0.0) {
            return Err(Error::Config(
                "violation tolerance must be non-negative".into(),
            ));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::Config("Armijo constant must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Diagnostics of one solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub objective: f64,
    pub energy_term: f64,
    pub mileage_term: f64,
    pub penalty_term: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub wall_time: f64,
    /// Largest output-bound violation of the returned plan (W).
    pub constraint_violation: f64,
}

const STEP_MIN: f64 = 1e-8;
const STEP_MAX: f64 = 1e4;

/// Projected-gradient descent on the rotor-speed/pitch trajectory.
///
/// Gradients are central finite differences; each iteration starts from a
/// Barzilai–Borwein step length and backtracks by halving until the Armijo
/// condition holds. Every trial point is projected onto the feasible set.
/// Variables are scaled by their box widths.
///
/// The clearing price jumps whenever the marginal regulation unit changes,
/// which splits the objective into basins a local method cannot cross.
/// Once descent stalls, every coordinate is scanned across its range and
/// descent restarts from any better point found.
///
/// The output bound is a quadratic penalty. If the returned plan still
/// violates it by more than `violation_tolerance`, the solve continues
/// from that plan with a tenfold penalty weight, up to
/// `penalty_escalations` times. The report always evaluates the original
/// objective.
pub fn solve_horizon(
    prob: &HorizonProblem,
    warm_start: Option<&DecisionTrajectory>,
    cfg: &SolverConfig,
) -> Result<(DecisionTrajectory, SolverReport)> {
    cfg.validate()?;
    prob.validate()?;
    let started = Instant::now();

    let mut traj = match warm_start {
        Some(w) if w.fits(prob) => w.clone(),
        Some(_) => {
            return Err(Error::Config(
                "warm start does not match the problem dimensions".into(),
            ))
        }
        None => DecisionTrajectory::mppt(prob),
    };
    project_feasible(&mut traj, prob);

    let mut iterations = 0;
    let mut evaluations = 0;
    let mut converged;
    let mut escalated: Option<HorizonProblem> = None;
    let limit = cfg.violation_tolerance * prob.params.rated_power;
    let mut escalations = 0;
    loop {
        let current = escalated.as_ref().unwrap_or(prob);
        let mut search = Search::new(current, cfg, started, traj);
        converged = search.run();
        iterations += search.iterations;
        evaluations += search.evaluations;
        let violation = search
            .eval
            .value(&search.traj.omega, &search.traj.beta)
            .max_violation;
        let stop =
            violation <= limit || escalations >= cfg.penalty_escalations || search.out_of_time();
        traj = search.traj;
        if stop {
            break;
        }
        // Penalty continuation: the same problem with a stiffer bound,
        // started from the current plan.
        escalations += 1;
        let mut stiffer = current.clone();
        stiffer.penalty_weight *= 10.0;
        escalated = Some(stiffer);
    }

    project_feasible(&mut traj, prob);
    let value: ObjectiveValue = Evaluator::new(prob).value(&traj.omega, &traj.beta);
    let report = SolverReport {
        objective: value.objective,
        energy_term: value.energy_term,
        mileage_term: value.mileage_term,
        penalty_term: value.penalty_term,
        iterations,
        evaluations: evaluations + 1,
        converged,
        wall_time: started.elapsed().as_secs_f64(),
        constraint_violation: value.max_violation,
    };
    Ok((traj, report))
}

struct Search<'a> {
    prob: &'a HorizonProblem,
    cfg: &'a SolverConfig,
    started: Instant,
    eval: Evaluator<'a>,
    traj: DecisionTrajectory,
    trial: DecisionTrajectory,
    /// Box width per flattened variable.
    width: Vec<f64>,
    m: usize,
    f: f64,
    iterations: usize,
    evaluations: usize,
}

impl<'a> Search<'a> {
    fn new(
        prob: &'a HorizonProblem,
        cfg: &'a SolverConfig,
        started: Instant,
        traj: DecisionTrajectory,
    ) -> Self {
        let p = &prob.params;
        let m = traj.omega.len();
        let width = (0..2 * m)
            .map(|k| {
                if k < m {
                    p.omega_max - p.omega_min
                } else {
                    p.beta_max - p.beta_min
                }
            })
            .collect();
        let mut eval = Evaluator::new(prob);
        let f = eval.value(&traj.omega, &traj.beta).objective;
        Search {
            prob,
            cfg,
            started,
            eval,
            trial: traj.clone(),
            traj,
            width,
            m,
            f,
            iterations: 0,
            evaluations: 1,
        }
    }

    /// Descent, then scan-and-restart until nothing improves; true when
    /// the final descent stopped on the stall criterion.
    fn run(&mut self) -> bool {
        let cfg = self.cfg;
        let mut converged = self.descend();
        let mut restarts = 0;
        loop {
            // A scan also runs after the iteration cap; it is what escapes
            // the basins slow descent gets trapped in.
            if self.out_of_time() {
                return false;
            }
            if !self.scan() {
                return converged;
            }
            if restarts == cfg.scan_restarts || self.iterations >= cfg.max_iterations {
                return false;
            }
            restarts += 1;
            converged = self.descend();
        }
    }

    fn out_of_time(&self) -> bool {
        self.started.elapsed().as_secs_f64() > self.cfg.time_budget_s
    }

    /// Runs projected-gradient iterations; true when stopped by the stall
    /// criterion.
    fn descend(&mut self) -> bool {
        let cfg = self.cfg;
        let (m, dim) = (self.m, 2 * self.m);
        let h = cfg.fd_step;
        let mut x = flatten(&self.traj);
        let mut grad = vec![0.0; dim];
        let mut prev_x: Option<Vec<f64>> = None;
        let mut prev_grad = vec![0.0; dim];
        let mut stalled = 0usize;

        while self.iterations < cfg.max_iterations {
            if self.out_of_time() {
                return false;
            }
            self.iterations += 1;

            // central differences in scaled coordinates
            for k in 0..dim {
                let delta = h * self.width[k];
                let orig = x[k];
                set(&mut self.traj, k, m, orig + delta);
                let fp = self.eval.value(&self.traj.omega, &self.traj.beta).objective;
                set(&mut self.traj, k, m, orig - delta);
                let fm = self.eval.value(&self.traj.omega, &self.traj.beta).objective;
                set(&mut self.traj, k, m, orig);
                grad[k] = (fp - fm) / (2.0 * h);
            }
            self.evaluations += 2 * dim;

            // Barzilai–Borwein length from the previous accepted move
            let step = if let Some(px) = &prev_x {
                let mut ss = 0.0;
                let mut sy = 0.0;
                for k in 0..dim {
                    let s = (x[k] - px[k]) / self.width[k];
                    ss += s * s;
                    sy += s * (grad[k] - prev_grad[k]);
                }
                if sy > 0.0 {
                    ss / sy
                } else {
                    STEP_MAX
                }
            } else {
                let gmax = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
                if gmax > 0.0 {
                    0.1 / gmax
                } else {
                    STEP_MAX
                }
            }
            .clamp(STEP_MIN, STEP_MAX);

            let mut accepted = None;
            let mut t = step;
            for _ in 0..cfg.max_backtracks {
                for k in 0..dim {
                    set(&mut self.trial, k, m, x[k] - t * grad[k] * self.width[k]);
                }
                project_feasible(&mut self.trial, self.prob);
                let mut decrease = 0.0;
                for k in 0..dim {
                    decrease += grad[k] * (get(&self.trial, k, m) - x[k]) / self.width[k];
                }
                let ft = self
                    .eval
                    .value(&self.trial.omega, &self.trial.beta)
                    .objective;
                self.evaluations += 1;
                if decrease < 0.0 && ft <= self.f + cfg.armijo_c * decrease {
                    accepted = Some(ft);
                    break;
                }
                t *= 0.5;
            }

            let improvement = match accepted {
                Some(ft) => {
                    let rel = (self.f - ft) / self.f.abs().max(1e-12);
                    prev_x = Some(std::mem::replace(&mut x, flatten(&self.trial)));
                    prev_grad.copy_from_slice(&grad);
                    self.traj.clone_from(&self.trial);
                    self.f = ft;
                    rel
                }
                None => 0.0,
            };
            if improvement < cfg.tolerance {
                stalled += 1;
                if stalled >= cfg.stall_iterations {
                    return true;
                }
            } else {
                stalled = 0;
            }
        }
        false
    }

    /// Scans each coordinate over its whole range, keeping improvements.
    /// Returns true when the objective decreased.
    fn scan(&mut self) -> bool {
        let cfg = self.cfg;
        let points = cfg.scan_points;
        if points < 2 {
            return false;
        }
        let p = &self.prob.params;
        let m = self.m;
        let before = self.f;
        for k in 0..2 * m {
            if self.out_of_time() {
                break;
            }
            let (lo, hi) = if k < m {
                (p.omega_min, p.omega_max)
            } else {
                (p.beta_min, p.beta_max)
            };
            let mut best: Option<(f64, f64)> = None;
            for j in 0..points {
                let v = lo + (hi - lo) * j as f64 / (points - 1) as f64;
                self.trial.clone_from(&self.traj);
                set(&mut self.trial, k, m, v);
                project_feasible(&mut self.trial, self.prob);
                if get(&self.trial, k, m) != v {
                    continue;
                }
                let ft = self
                    .eval
                    .value(&self.trial.omega, &self.trial.beta)
                    .objective;
                self.evaluations += 1;
                if ft < best.map_or(self.f, |b| b.0) {
                    best = Some((ft, v));
                }
            }
            if let Some((ft, v)) = best {
                if self.f - ft > cfg.tolerance * self.f.abs().max(1e-12) {
                    set(&mut self.traj, k, m, v);
                    self.f = ft;
                }
            }
        }
        self.f < before
    }
}

fn flatten(traj: &DecisionTrajectory) -> Vec<f64> {
    traj.omega.iter().chain(&traj.beta).copied().collect()
}

#[inline]
fn set(traj: &mut DecisionTrajectory, k: usize, m: usize, v: f64) {
    if k < m {
        traj.omega[k] = v;
    } else {
        traj.beta[k - m] = v;
    }
}

#[inline]
fn get(traj: &DecisionTrajectory, k: usize, m: usize) -> f64 {
    if k < m {
        traj.omega[k]
    } else {
        traj.beta[k - m]
    }
}
