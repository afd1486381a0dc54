//! Scenario engine: trace preparation, the receding-horizon loop, the MPPT
//! baseline and end-of-run totals.

mod config;
mod output;
mod trace;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use config::{
    CpSource, ForecastConfig, OutputConfig, ScenarioConfig, ScheduleConfig, TraceSource,
    TurbineConfig,
};
pub use output::{records_csv, summary_json, write_records_csv, write_summary_json};
pub use trace::{load_imbalance_series, load_wind_series, resample, RawTrace};

use crate::cascade::{mppt_step, track_step_with, TrackingOutcome};
use crate::error::{Error, Result};
use crate::market::{step_mileage_penalty, step_movement_cost, AgcUnit, MeritOrder};
use crate::mpc::{build_problem, solve_horizon, trajectory_detail, DecisionTrajectory, Traces};
use crate::turbine::{mppt_reference, TurbineParams, TurbineState};

const W_PER_MW: f64 = 1e6;
const J_PER_KWH: f64 = 3.6e6;

/// Which controller produced a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Proposed,
    Mppt,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Proposed => "proposed",
            Mode::Mppt => "mppt",
        })
    }
}

/// Everything logged for one control cycle. Per-turbine vectors are in
/// turbine order, `g` in unit-list order.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub wind: Vec<f64>,
    pub omega: Vec<f64>,
    pub beta: Vec<f64>,
    pub p_e: Vec<f64>,
    /// Power command handed to the cascade (W).
    pub command: Vec<f64>,
    /// Rotor speed reached by rotor-only control, before any pitching.
    pub pre_pitch_omega: Vec<f64>,
    pub used_pitch: Vec<bool>,
    pub clamped: Vec<bool>,
    /// Farm output (W).
    pub farm_p_e: f64,
    /// Farm schedule (MW).
    pub schedule: f64,
    /// Exogenous load–schedule imbalance (MW).
    pub imbalance: f64,
    /// Imbalance left for regulation after the farm's deviation (MW).
    pub net_imbalance: f64,
    pub g: Vec<f64>,
    pub gamma: f64,
    pub dispatch_saturated: bool,
    /// Unmet regulation (MW), zero unless saturated.
    pub dispatch_residual: f64,
    /// Farm energy over the interval ending at `t` (J, trapezoidal).
    pub energy_j: f64,
    /// Movement settlement for this step ($).
    pub movement_cost: f64,
    /// Quadratic mileage penalty integrated over the step ($²·s).
    pub quadratic_penalty: f64,
    pub solver_iterations: usize,
    pub solver_converged: bool,
    /// Largest output-bound violation of the applied first plan step (W).
    pub plan_violation: f64,
    /// Largest output-bound violation anywhere in the solved plan (W).
    pub horizon_violation: f64,
    /// Wall-clock solve time (s). Not part of the deterministic outputs.
    pub solve_time: f64,
}

impl StepRecord {
    pub fn turbines(&self) -> usize {
        self.wind.len()
    }

    /// Power balance residual `net − Σg − unmet` (MW).
    pub fn balance_residual(&self) -> f64 {
        self.net_imbalance - self.g.iter().sum::<f64>() - self.dispatch_residual
    }
}

/// End-of-run totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub mode: Mode,
    pub alpha: Option<f64>,
    pub steps: usize,
    pub energy_kwh: f64,
    /// Movement-based settlement ($).
    pub mileage_settlement: f64,
    /// Integrated quadratic penalty ($²·s).
    pub mileage_quadratic: f64,
    /// Σ|ΔP| of the farm output (MW).
    pub total_variation_mw: f64,
    pub clamped_steps: usize,
    pub pitch_steps: usize,
    pub saturated_steps: usize,
    pub nonconverged_solves: usize,
    pub solver_iterations: usize,
    /// Largest output-bound violation of an applied plan step (W).
    pub max_plan_violation_w: f64,
    pub max_horizon_violation_w: f64,
    /// Steps whose applied plan step violated the output bound by more than 0.5% of
    /// rated power.
    pub plan_violation_steps: usize,
    /// Turbine-steps outside the speed/pitch boxes or the pitch rate.
    pub bound_violation_count: usize,
    /// Wall-clock statistics; excluded from the JSON document so that
    /// outputs stay reproducible.
    #[serde(skip)]
    pub mean_solve_time_s: f64,
    #[serde(skip)]
    pub max_solve_time_s: f64,
}

/// Plan violations above this fraction of rated power are counted.
pub const PLAN_VIOLATION_LIMIT: f64 = 5e-3;

/// Traces and parameters shared by the proposed run and the baseline.
#[derive(Debug, Clone)]
pub struct PreparedScenario {
    pub params: TurbineParams,
    pub units: Vec<AgcUnit>,
    /// Realized wind `[turbine][step]`.
    pub wind: Vec<Vec<f64>>,
    /// Wind seen by the optimizer.
    pub wind_forecast: Vec<Vec<f64>>,
    pub imbalance: Vec<f64>,
    pub schedule: Vec<f64>,
}

impl PreparedScenario {
    pub fn steps(&self) -> usize {
        self.imbalance.len()
    }

    pub fn turbines(&self) -> usize {
        self.wind.len()
    }
}

/// Loads or synthesizes every trace and builds the farm schedule.
pub fn prepare(cfg: &ScenarioConfig) -> Result<PreparedScenario> {
    cfg.validate()?;
    let params = cfg.turbine_params()?;
    let n = cfg.turbines;
    let synth_len = (cfg.duration_s / cfg.dt + 1e-9).floor() as usize + 1;

    let mut wind = match &cfg.wind {
        TraceSource::Csv { path, columns } => {
            load_wind_series(path, columns.as_deref(), cfg.dt, n)?
        }
        TraceSource::Ou(spec) => {
            // each turbine sees the same synthetic trace
            let w = spec.generate(synth_len, cfg.dt)?;
            vec![w; n]
        }
        TraceSource::Zero => unreachable!("rejected by validate"),
    };
    let wind_len = wind[0].len();
    let mut imbalance = match &cfg.imbalance {
        TraceSource::Csv { path, columns } => {
            load_imbalance_series(path, columns.as_deref(), cfg.dt)?
        }
        TraceSource::Ou(spec) => spec.generate(wind_len, cfg.dt)?,
        TraceSource::Zero => vec![0.0; wind_len],
    };
    let len = wind_len.min(imbalance.len());
    if len < 2 {
        return Err(Error::Config(
            "traces must cover at least two control steps".into(),
        ));
    }
    imbalance.truncate(len);
    for w in &mut wind {
        w.truncate(len);
        if w.iter().any(|v| *v < 0.0) {
            return Err(Error::Config("wind speeds must be non-negative".into()));
        }
    }

    let wind_forecast = if cfg.forecast.wind_noise_stdev > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.forecast.noise_seed);
        let noise = Normal::new(0.0, cfg.forecast.wind_noise_stdev)
            .map_err(|e| Error::Config(format!("forecast noise: {e}")))?;
        wind.iter()
            .map(|w| {
                w.iter()
                    .map(|v| (v + noise.sample(&mut rng)).max(0.0))
                    .collect()
            })
            .collect()
    } else {
        wind.clone()
    };

    let available: Vec<f64> = (0..len)
        .map(|k| {
            wind.iter()
                .map(|w| mppt_reference(w[k], &params).power)
                .sum::<f64>()
                / W_PER_MW
        })
        .collect();
    let half = (cfg.schedule.window_s / (2.0 * cfg.dt)).round() as usize;
    let schedule = centered_average(&available, half);

    Ok(PreparedScenario {
        params,
        units: cfg.units.clone(),
        wind,
        wind_forecast,
        imbalance,
        schedule,
    })
}

/// Moving average over `k − half ..= k + half`, shrunk at the ends.
pub fn centered_average(x: &[f64], half: usize) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    for v in x {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..x.len())
        .map(|k| {
            let lo = k.saturating_sub(half);
            let hi = (k + half + 1).min(x.len());
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Runs the receding-horizon controller over the whole trace.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<(Vec<StepRecord>, SimulationSummary)> {
    let prep = prepare(cfg)?;
    run_prepared(cfg, &prep, Mode::Proposed)
}

/// Runs the free MPPT farm over the same trace.
pub fn run_mppt_baseline(cfg: &ScenarioConfig) -> Result<(Vec<StepRecord>, SimulationSummary)> {
    let prep = prepare(cfg)?;
    run_prepared(cfg, &prep, Mode::Mppt)
}

/// Runs either controller on already prepared traces.
pub fn run_prepared(
    cfg: &ScenarioConfig,
    prep: &PreparedScenario,
    mode: Mode,
) -> Result<(Vec<StepRecord>, SimulationSummary)> {
    let mut sim = Loop::new(cfg, prep)?;
    let mut warm: Option<DecisionTrajectory> = None;
    for k in 1..prep.steps() {
        let (commands, plan) = match mode {
            Mode::Mppt => (None, PlanInfo::default()),
            Mode::Proposed => {
                let (cmd, info, traj) = sim.plan(k, warm.take())?;
                warm = Some(traj);
                (Some(cmd), info)
            }
        };
        sim.advance(k, commands.as_deref(), plan);
    }
    let alpha = (mode == Mode::Proposed).then_some(cfg.alpha);
    let summary = summarize(&sim.records, mode, alpha, &prep.params);
    Ok((sim.records, summary))
}

#[derive(Debug, Clone, Copy, Default)]
struct PlanInfo {
    iterations: usize,
    converged: bool,
    violation: f64,
    horizon_violation: f64,
    wall_time: f64,
}

struct Loop<'a> {
    cfg: &'a ScenarioConfig,
    prep: &'a PreparedScenario,
    merit: MeritOrder,
    states: Vec<TurbineState>,
    g_prev: Vec<f64>,
    farm_prev: f64,
    records: Vec<StepRecord>,
}

impl<'a> Loop<'a> {
    fn new(cfg: &'a ScenarioConfig, prep: &'a PreparedScenario) -> Result<Self> {
        let merit = MeritOrder::new(&prep.units)?;
        let p = &prep.params;
        let states: Vec<TurbineState> = prep
            .wind
            .iter()
            .map(|w| TurbineState::at_mppt(w[0], p))
            .collect();
        let mut sim = Loop {
            cfg,
            prep,
            merit,
            g_prev: vec![0.0; prep.units.len()],
            farm_prev: 0.0,
            states,
            records: Vec::with_capacity(prep.steps()),
        };
        // The initial operating point is logged as step zero; it covers no
        // interval, so only its regulation ramp from rest is charged.
        let outcomes: Vec<TrackingOutcome> = sim
            .states
            .iter()
            .map(|s| TrackingOutcome {
                new_state: *s,
                achieved_p_e: s.p_e,
                used_pitch: false,
                clamped: false,
                pre_pitch_omega: s.omega,
            })
            .collect();
        let commands: Vec<f64> = sim.states.iter().map(|s| s.p_e).collect();
        sim.farm_prev = commands.iter().sum();
        sim.log(0, &commands, &outcomes, PlanInfo::default(), 0.0);
        Ok(sim)
    }

    /// Solves the window starting at step `k` and returns the first-step
    /// commands.
    fn plan(
        &self,
        k: usize,
        warm: Option<DecisionTrajectory>,
    ) -> Result<(Vec<f64>, PlanInfo, DecisionTrajectory)> {
        let cfg = self.cfg;
        let prep = self.prep;
        let horizon = cfg.horizon_steps;
        let t0 = (k - 1) as f64 * cfg.dt;
        let traces = if cfg.forecast.persistence {
            let end = (k + horizon).min(prep.steps());
            Traces {
                wind: prep
                    .wind_forecast
                    .iter()
                    .map(|w| vec![w[k - 1]; end - k])
                    .collect(),
                imbalance: vec![prep.imbalance[k - 1]; end - k],
                schedule: prep.schedule[k..end].to_vec(),
            }
        } else {
            Traces {
                wind: prep.wind_forecast.iter().map(|w| w[k..].to_vec()).collect(),
                imbalance: prep.imbalance[k..].to_vec(),
                schedule: prep.schedule[k..].to_vec(),
            }
        };
        let prob = build_problem(
            &self.states,
            &traces,
            0,
            horizon,
            t0,
            cfg.dt,
            cfg.alpha,
            &prep.params,
            &prep.units,
        )?;
        let warm = warm.map(|w| w.shifted(prob.steps()));
        let (traj, report) = solve_horizon(&prob, warm.as_ref(), &cfg.solver)?;
        let detail = trajectory_detail(&traj, &prob)?;
        let n = prob.turbines();
        let commands = detail.p_e[..n].iter().map(|p| p.max(0.0)).collect();
        let info = PlanInfo {
            iterations: report.iterations,
            converged: report.converged,
            violation: detail.violation[..n]
                .iter()
                .fold(0.0, |a: f64, &b| a.max(b)),
            horizon_violation: report.constraint_violation,
            wall_time: report.wall_time,
        };
        Ok((commands, info, traj))
    }

    /// Applies `commands` (or MPPT when `None`) over the interval ending at
    /// step `k` and logs the result.
    fn advance(&mut self, k: usize, commands: Option<&[f64]>, plan: PlanInfo) {
        let prep = self.prep;
        let p = &prep.params;
        let dt = self.cfg.dt;
        let mut cmd = Vec::with_capacity(self.states.len());
        let mut outcomes = Vec::with_capacity(self.states.len());
        for (i, state) in self.states.iter_mut().enumerate() {
            let v = prep.wind[i][k];
            let out = match commands {
                Some(c) => {
                    cmd.push(c[i]);
                    track_step_with(c[i], state, v, dt, p, &self.cfg.cascade)
                }
                None => {
                    cmd.push(mppt_reference(v, p).power);
                    mppt_step(state, v, dt, p)
                }
            };
            *state = out.new_state;
            outcomes.push(out);
        }
        let farm: f64 = outcomes.iter().map(|o| o.achieved_p_e).sum();
        let energy = 0.5 * (self.farm_prev + farm) * dt;
        self.farm_prev = farm;
        self.log(k, &cmd, &outcomes, plan, energy);
    }

    fn log(
        &mut self,
        k: usize,
        commands: &[f64],
        outcomes: &[TrackingOutcome],
        plan: PlanInfo,
        energy_j: f64,
    ) {
        let prep = self.prep;
        let dt = self.cfg.dt;
        let farm: f64 = outcomes.iter().map(|o| o.achieved_p_e).sum();
        let schedule = prep.schedule[k];
        let imbalance = prep.imbalance[k];
        let net = imbalance - (farm / W_PER_MW - schedule);
        let mut g = vec![0.0; prep.units.len()];
        let clearing = self.merit.dispatch_into(net, &mut g);
        let movement_cost = step_movement_cost(clearing.gamma, &g, &self.g_prev);
        let quadratic_penalty = step_mileage_penalty(clearing.gamma, &g) * dt;
        self.g_prev.copy_from_slice(&g);
        self.records.push(StepRecord {
            t: k as f64 * dt,
            wind: prep.wind.iter().map(|w| w[k]).collect(),
            omega: outcomes.iter().map(|o| o.new_state.omega).collect(),
            beta: outcomes.iter().map(|o| o.new_state.beta).collect(),
            p_e: outcomes.iter().map(|o| o.achieved_p_e).collect(),
            command: commands.to_vec(),
            pre_pitch_omega: outcomes.iter().map(|o| o.pre_pitch_omega).collect(),
            used_pitch: outcomes.iter().map(|o| o.used_pitch).collect(),
            clamped: outcomes.iter().map(|o| o.clamped).collect(),
            farm_p_e: farm,
            schedule,
            imbalance,
            net_imbalance: net,
            g,
            gamma: clearing.gamma,
            dispatch_saturated: !clearing.feasible,
            dispatch_residual: clearing.residual,
            energy_j,
            movement_cost,
            quadratic_penalty,
            solver_iterations: plan.iterations,
            solver_converged: plan.converged,
            plan_violation: plan.violation,
            horizon_violation: plan.horizon_violation,
            solve_time: plan.wall_time,
        });
    }
}

/// Aggregates step records. Every total is a plain sum over records, so
/// summaries of consecutive chunks add up to the summary of the whole.
/// `params` supplies the bounds used for the violation counts.
pub fn summarize(
    records: &[StepRecord],
    mode: Mode,
    alpha: Option<f64>,
    params: &TurbineParams,
) -> SimulationSummary {
    let mut s = SimulationSummary {
        mode,
        alpha,
        steps: records.len(),
        energy_kwh: 0.0,
        mileage_settlement: 0.0,
        mileage_quadratic: 0.0,
        total_variation_mw: 0.0,
        clamped_steps: 0,
        pitch_steps: 0,
        saturated_steps: 0,
        nonconverged_solves: 0,
        solver_iterations: 0,
        max_plan_violation_w: 0.0,
        max_horizon_violation_w: 0.0,
        plan_violation_steps: 0,
        bound_violation_count: 0,
        mean_solve_time_s: 0.0,
        max_solve_time_s: 0.0,
    };
    let mut solves = 0usize;
    let mut solve_time = 0.0;
    let mut energy_j = 0.0;
    let plan_limit = PLAN_VIOLATION_LIMIT * params.rated_power;
    let rate = params.pitch_rate_max;
    for (k, r) in records.iter().enumerate() {
        energy_j += r.energy_j;
        s.mileage_settlement += r.movement_cost;
        s.mileage_quadratic += r.quadratic_penalty;
        if k > 0 {
            s.total_variation_mw += (r.farm_p_e - records[k - 1].farm_p_e).abs() / W_PER_MW;
        }
        s.clamped_steps += r.clamped.iter().any(|&c| c) as usize;
        s.pitch_steps += r.used_pitch.iter().any(|&c| c) as usize;
        s.saturated_steps += r.dispatch_saturated as usize;
        if r.solver_iterations > 0 {
            solves += 1;
            solve_time += r.solve_time;
            s.max_solve_time_s = s.max_solve_time_s.max(r.solve_time);
            s.nonconverged_solves += !r.solver_converged as usize;
            s.solver_iterations += r.solver_iterations;
        }
        s.max_plan_violation_w = s.max_plan_violation_w.max(r.plan_violation);
        s.max_horizon_violation_w = s.max_horizon_violation_w.max(r.horizon_violation);
        if r.plan_violation > plan_limit {
            s.plan_violation_steps += 1;
        }
        for i in 0..r.turbines() {
            let out_of_box = r.omega[i] < params.omega_min
                || r.omega[i] > params.omega_max
                || r.beta[i] < params.beta_min
                || r.beta[i] > params.beta_max;
            let too_fast = k > 0 && {
                let dt = r.t - records[k - 1].t;
                (r.beta[i] - records[k - 1].beta[i]).abs() > rate * dt + 1e-9
            };
            s.bound_violation_count += (out_of_box || too_fast) as usize;
        }
    }
    s.energy_kwh = energy_j / J_PER_KWH;
    if solves > 0 {
        s.mean_solve_time_s = solve_time / solves as f64;
    }
    s
}

#[cfg(test)]
mod tests;
