//! Receding-horizon optimization of rotor-speed and pitch trajectories.
//!
//! Over a look-ahead window the farm minimises
//!
//! ```text
//! α·(−Σ P_E·Δt)/E_base + (1−α)·Σ Σ_i (γ_t·g_i,t)²·Δt / C_base²
//! ```
//!
//! where `P_E` follows from the swing equation for the planned rotor
//! speeds and `g`, `γ` come from clearing the residual imbalance in the
//! regulation market at every step. The output bound
//! `0 ≤ P_E ≤ P_MPPT + P_K` enters as a quadratic penalty.

mod oracle;
mod solver;

use serde::{Deserialize, Serialize};

pub use oracle::{brute_force_oracle, OracleResult};
pub use solver::{solve_horizon, SolverConfig, SolverReport};

use crate::error::{Error, Result};
use crate::market::{step_mileage_penalty, AgcUnit, DispatchResult, MeritOrder};
use crate::turbine::{
    electrical_power, kinetic_headroom, mppt_reference, TurbineParams, TurbineState,
};

/// Default weight on the normalized squared output-bound violation.
pub const DEFAULT_PENALTY_WEIGHT: f64 = 1e3;

/// Exogenous series a horizon is cut from, sampled every `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Traces {
    /// Wind speed per turbine (m/s), `wind[i][k]`.
    pub wind: Vec<Vec<f64>>,
    /// `P_load − P_scheduled` excluding the wind farm (MW).
    pub imbalance: Vec<f64>,
    /// Scheduled farm output (MW); deviations from it must be regulated.
    pub schedule: Vec<f64>,
}

impl Traces {
    pub fn len(&self) -> usize {
        self.imbalance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.imbalance.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if self.wind.is_empty() {
            return Err(Error::Config("no wind series".into()));
        }
        if self.wind.iter().any(|w| w.len() != n) || self.schedule.len() != n {
            return Err(Error::Config("trace lengths differ".into()));
        }
        Ok(())
    }
}

/// One look-ahead optimization problem.
#[derive(Debug, Clone)]
pub struct HorizonProblem {
    /// Time of the state the window starts from (s).
    pub t0: f64,
    pub dt: f64,
    pub alpha: f64,
    pub params: TurbineParams,
    /// Wind per turbine over the window, `wind[i][t]`.
    pub wind: Vec<Vec<f64>>,
    /// Exogenous imbalance over the window (MW).
    pub imbalance: Vec<f64>,
    /// Farm schedule over the window (MW).
    pub schedule: Vec<f64>,
    pub initial_states: Vec<TurbineState>,
    pub units: Vec<AgcUnit>,
    /// Energy base (J).
    pub e_base: f64,
    /// Mileage cost base ($).
    pub c_base: f64,
    pub penalty_weight: f64,
    merit: MeritOrder,
    /// MPPT (ω, P) per step and turbine, step-major.
    mppt: Vec<(f64, f64)>,
}

impl HorizonProblem {
    /// Assembles a problem with the default normalization bases.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        t0: f64,
        dt: f64,
        alpha: f64,
        params: TurbineParams,
        wind: Vec<Vec<f64>>,
        imbalance: Vec<f64>,
        schedule: Vec<f64>,
        initial_states: Vec<TurbineState>,
        units: Vec<AgcUnit>,
    ) -> Result<Self> {
        let merit = MeritOrder::new(&units)?;
        let n = initial_states.len();
        let steps = imbalance.len();
        let e_base = n as f64 * params.rated_power * steps as f64 * dt;
        let c_base = merit.highest_price() * merit.total_capacity();
        let mut prob = HorizonProblem {
            t0,
            dt,
            alpha,
            params,
            wind,
            imbalance,
            schedule,
            initial_states,
            units,
            e_base,
            c_base,
            penalty_weight: DEFAULT_PENALTY_WEIGHT,
            merit,
            mppt: Vec::new(),
        };
        prob.validate()?;
        prob.mppt = (0..steps)
            .flat_map(|t| {
                let p = &prob;
                (0..n).map(move |i| {
                    let m = mppt_reference(p.wind[i][t], &p.params);
                    (m.omega, m.power)
                })
            })
            .collect();
        Ok(prob)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha {} outside [0, 1]", self.alpha));
        }
        if !(self.dt > 0.0) {
            return bad("dt must be positive".into());
        }
        let t = self.imbalance.len();
        if t == 0 {
            return bad("horizon must contain at least one step".into());
        }
        if self.initial_states.is_empty() || self.wind.len() != self.initial_states.len() {
            return bad("one wind series and initial state per turbine required".into());
        }
        if self.wind.iter().any(|w| w.len() != t) || self.schedule.len() != t {
            return bad("forecast lengths must equal the horizon".into());
        }
        if !(self.e_base > 0.0 && self.c_base > 0.0) {
            return bad("normalization bases must be positive".into());
        }
        self.params.validate()
    }

    pub fn steps(&self) -> usize {
        self.imbalance.len()
    }

    pub fn turbines(&self) -> usize {
        self.initial_states.len()
    }

    pub fn merit(&self) -> &MeritOrder {
        &self.merit
    }

    /// MPPT speed and power of turbine `i` at step `t`.
    #[inline]
    pub fn mppt(&self, t: usize, i: usize) -> (f64, f64) {
        self.mppt[t * self.turbines() + i]
    }

    /// Upper output bound `P_MPPT + P_K` for turbine `i` at step `t`.
    #[inline]
    pub fn output_bound(&self, t: usize, i: usize, omega_prev: f64) -> f64 {
        let (w_mpp, p_mpp) = self.mppt(t, i);
        p_mpp + kinetic_headroom(omega_prev, w_mpp, self.dt, self.params.inertia)
    }
}

/// Cuts the window `[start, start + horizon)` from `traces` and builds the
/// problem for the farm currently in `states` at time `t0`.
///
/// Windows running past the end of the traces are truncated.
#[allow(clippy::too_many_arguments)]
pub fn build_problem(
    states: &[TurbineState],
    traces: &Traces,
    start: usize,
    horizon: usize,
    t0: f64,
    dt: f64,
    alpha: f64,
    params: &TurbineParams,
    units: &[AgcUnit],
) -> Result<HorizonProblem> {
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least one step".into()));
    }
    let end = (start + horizon).min(traces.len());
    if start >= end {
        return Err(Error::Config(format!(
            "no forecast data from step {start} (trace has {})",
            traces.len()
        )));
    }
    if traces.wind.len() != states.len() {
        return Err(Error::Config("one wind series per turbine required".into()));
    }
    HorizonProblem::new(
        t0,
        dt,
        alpha,
        *params,
        traces.wind.iter().map(|w| w[start..end].to_vec()).collect(),
        traces.imbalance[start..end].to_vec(),
        traces.schedule[start..end].to_vec(),
        states.to_vec(),
        units.to_vec(),
    )
}

/// Planned rotor speed and pitch per step and turbine (step-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTrajectory {
    pub steps: usize,
    pub turbines: usize,
    /// Rotor speed (rad/s), index `t * turbines + i`.
    pub omega: Vec<f64>,
    /// Pitch (deg), index `t * turbines + i`.
    pub beta: Vec<f64>,
}

impl DecisionTrajectory {
    /// Every turbine at its MPPT speed and minimum pitch.
    pub fn mppt(prob: &HorizonProblem) -> Self {
        let (steps, turbines) = (prob.steps(), prob.turbines());
        let omega = (0..steps)
            .flat_map(|t| (0..turbines).map(move |i| (t, i)))
            .map(|(t, i)| prob.mppt(t, i).0)
            .collect();
        DecisionTrajectory {
            steps,
            turbines,
            omega,
            beta: vec![prob.params.beta_min; steps * turbines],
        }
    }

    #[inline]
    pub fn omega(&self, t: usize, i: usize) -> f64 {
        self.omega[t * self.turbines + i]
    }

    #[inline]
    pub fn beta(&self, t: usize, i: usize) -> f64 {
        self.beta[t * self.turbines + i]
    }

    /// Drops the first step and repeats the last one, resized to `steps`.
    pub fn shifted(&self, steps: usize) -> Self {
        let n = self.turbines;
        let pick = |v: &[f64]| -> Vec<f64> {
            (0..steps)
                .flat_map(|t| {
                    let src = (t + 1).min(self.steps - 1);
                    v[src * n..(src + 1) * n].to_vec()
                })
                .collect()
        };
        DecisionTrajectory {
            steps,
            turbines: n,
            omega: pick(&self.omega),
            beta: pick(&self.beta),
        }
    }

    fn fits(&self, prob: &HorizonProblem) -> bool {
        self.steps == prob.steps()
            && self.turbines == prob.turbines()
            && self.omega.len() == self.steps * self.turbines
            && self.beta.len() == self.steps * self.turbines
    }
}

/// Clamps every variable into its box and enforces the pitch-rate limit
/// with a forward sweep from the initial pitch.
pub fn project_feasible(traj: &mut DecisionTrajectory, prob: &HorizonProblem) {
    let p = &prob.params;
    let max_move = p.pitch_step(prob.dt);
    let n = traj.turbines;
    for w in traj.omega.iter_mut() {
        *w = p.clamp_omega(*w);
    }
    for i in 0..n {
        let mut prev = prob.initial_states[i].beta;
        for t in 0..traj.steps {
            let b = &mut traj.beta[t * n + i];
            *b = p.clamp_beta(b.clamp(prev - max_move, prev + max_move));
            prev = *b;
        }
    }
}

/// Scalar parts of the objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub objective: f64,
    /// Harvested energy over `E_base`.
    pub energy_term: f64,
    /// Integrated quadratic mileage penalty over `C_base²`.
    pub mileage_term: f64,
    /// Output-bound penalty contribution.
    pub penalty_term: f64,
    /// Largest output-bound violation (W).
    pub max_violation: f64,
}

/// Per-step quantities derived from a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDetail {
    /// Electrical output per step and turbine (W), step-major.
    pub p_e: Vec<f64>,
    /// Farm output per step (W).
    pub farm: Vec<f64>,
    pub dispatch: Vec<DispatchResult>,
    /// Output-bound violation per step and turbine (W).
    pub violation: Vec<f64>,
    pub value: ObjectiveValue,
}

/// Reusable buffers for repeated objective evaluation.
pub(crate) struct Evaluator<'a> {
    prob: &'a HorizonProblem,
    g: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    pub(crate) fn new(prob: &'a HorizonProblem) -> Self {
        Evaluator {
            prob,
            g: vec![0.0; prob.units.len()],
        }
    }

    pub(crate) fn value(&mut self, omega: &[f64], beta: &[f64]) -> ObjectiveValue {
        self.run(omega, beta, |_, _, _, _, _, _| {})
    }

    /// Evaluates the objective, reporting every step to `visit` as
    /// `(t, p_e row, violation row, farm W, g, clearing)`.
    fn run(
        &mut self,
        omega: &[f64],
        beta: &[f64],
        mut visit: impl FnMut(usize, &[f64], &[f64], f64, &[f64], crate::market::Clearing),
    ) -> ObjectiveValue {
        let prob = self.prob;
        let p = &prob.params;
        let n = prob.turbines();
        let dt = prob.dt;
        let mut energy = 0.0;
        let mut mileage = 0.0;
        let mut penalty = 0.0;
        let mut max_violation = 0.0_f64;
        let mut row = [0.0f64; 64];
        let mut viol = [0.0f64; 64];
        let mut row_vec;
        let mut viol_vec;
        let (row, viol): (&mut [f64], &mut [f64]) = if n <= 64 {
            (&mut row[..n], &mut viol[..n])
        } else {
            row_vec = vec![0.0; n];
            viol_vec = vec![0.0; n];
            (&mut row_vec[..], &mut viol_vec[..])
        };
        for t in 0..prob.steps() {
            let mut farm = 0.0;
            for i in 0..n {
                let k = t * n + i;
                let w_prev = if t == 0 {
                    prob.initial_states[i].omega
                } else {
                    omega[k - n]
                };
                let pe = electrical_power(prob.wind[i][t], w_prev, omega[k], beta[k], dt, p);
                let upper = prob.output_bound(t, i, w_prev);
                let v = (pe - upper).max(0.0) + (-pe).max(0.0);
                let vn = v / p.rated_power;
                penalty += vn * vn;
                max_violation = max_violation.max(v);
                row[i] = pe;
                viol[i] = v;
                farm += pe;
            }
            energy += farm * dt;
            let net = prob.imbalance[t] - (farm * 1e-6 - prob.schedule[t]);
            let clearing = prob.merit.dispatch_into(net, &mut self.g);
            mileage += step_mileage_penalty(clearing.gamma, &self.g) * dt;
            visit(t, row, viol, farm, &self.g, clearing);
        }
        let energy_term = energy / prob.e_base;
        let mileage_term = mileage / (prob.c_base * prob.c_base);
        let penalty_term = prob.penalty_weight * penalty;
        ObjectiveValue {
            objective: -prob.alpha * energy_term + (1.0 - prob.alpha) * mileage_term + penalty_term,
            energy_term,
            mileage_term,
            penalty_term,
            max_violation,
        }
    }
}

/// Evaluates the penalized objective of `traj`.
pub fn objective_eval(traj: &DecisionTrajectory, prob: &HorizonProblem) -> Result<ObjectiveValue> {
    if !traj.fits(prob) {
        return Err(Error::Config(
            "trajectory dimensions do not match the problem".into(),
        ));
    }
    Ok(Evaluator::new(prob).value(&traj.omega, &traj.beta))
}

/// Evaluates `traj` and keeps every per-step quantity.
pub fn trajectory_detail(
    traj: &DecisionTrajectory,
    prob: &HorizonProblem,
) -> Result<TrajectoryDetail> {
    if !traj.fits(prob) {
        return Err(Error::Config(
            "trajectory dimensions do not match the problem".into(),
        ));
    }
    let mut p_e = Vec::with_capacity(traj.omega.len());
    let mut violation = Vec::with_capacity(traj.omega.len());
    let mut farm = Vec::with_capacity(traj.steps);
    let mut dispatch = Vec::with_capacity(traj.steps);
    let value = Evaluator::new(prob).run(&traj.omega, &traj.beta, |_, row, viol, f, g, c| {
        p_e.extend_from_slice(row);
        violation.extend_from_slice(viol);
        farm.push(f);
        dispatch.push(DispatchResult {
            g: g.to_vec(),
            gamma: c.gamma,
            feasible: c.feasible,
            residual: c.residual,
        });
    });
    Ok(TrajectoryDetail {
        p_e,
        farm,
        dispatch,
        violation,
        value,
    })
}
