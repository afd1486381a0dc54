//! Real-time command tracking.
//!
//! Rotor speed is the first actuator: the rotor absorbs or releases kinetic
//! energy to follow the command. Pitch is engaged only when the rotor would
//! have to exceed its speed limit to absorb a surplus, and it relaxes back
//! toward its minimum as soon as rotor control alone suffices.

use serde::{Deserialize, Serialize};

use crate::cp::CpCoefficients;
use crate::turbine::{
    aero_power, electrical_power, inertial_power, step_rotor, SpeedLimit, TurbineParams,
    TurbineState,
};

/// Band below `omega_max` within which the rotor counts as saturated.
pub const SATURATION_BAND: f64 = 1e-3;

/// Result of tracking one command over one control cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingOutcome {
    pub new_state: TurbineState,
    pub achieved_p_e: f64,
    /// Pitch control was engaged to shed a surplus this cycle.
    pub used_pitch: bool,
    /// The command could not be met (rotor at a speed limit).
    pub clamped: bool,
    /// Rotor speed found by rotor-only control, before any pitch action.
    pub pre_pitch_omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeConfig {
    /// Inner sub-steps per control cycle.
    pub substeps: usize,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        CascadeConfig { substeps: 1 }
    }
}

/// Solution of the pitch inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchSolution {
    pub beta: f64,
    /// No pitch in range reproduces the target; `beta` is the nearest bound.
    pub out_of_range: bool,
}

/// Pitch angle in `[beta_min, beta_max]` giving `cp_target` at tip-speed
/// ratio `lambda`. Picks the smallest admissible root.
pub fn pitch_from_cp(
    cp_target: f64,
    lambda: f64,
    coeffs: &CpCoefficients,
    beta_min: f64,
    beta_max: f64,
) -> PitchSolution {
    let (a, b, c) = coeffs.beta_quadratic(lambda);
    let c = c - cp_target;
    let in_range = |x: f64| x >= beta_min - 1e-12 && x <= beta_max + 1e-12;

    let mut roots = [f64::NAN; 2];
    if a.abs() < 1e-14 * (b.abs() + c.abs()).max(1e-300) {
        if b != 0.0 {
            roots[0] = -c / b;
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            // numerically stable pair
            let q = -0.5 * (b + b.signum() * disc.sqrt());
            roots = [q / a, if q != 0.0 { c / q } else { -b / a }];
        }
    }
    let best = roots
        .iter()
        .copied()
        .filter(|r| r.is_finite() && in_range(*r))
        .min_by(f64::total_cmp);
    if let Some(beta) = best {
        return PitchSolution {
            beta: beta.clamp(beta_min, beta_max),
            out_of_range: false,
        };
    }

    // Unreachable target: compare with the polynomial's extremes on range.
    let f = |x: f64| (a * x + b) * x + c + cp_target;
    let mut hi = f(beta_min).max(f(beta_max));
    if a != 0.0 {
        let vertex = -b / (2.0 * a);
        if in_range(vertex) {
            hi = hi.max(f(vertex));
        }
    }
    let beta = if cp_target > hi { beta_min } else { beta_max };
    PitchSolution {
        beta,
        out_of_range: true,
    }
}

/// Tracks `command` (W) for one control cycle of length `dt`.
pub fn track_step(
    command: f64,
    state: &TurbineState,
    v: f64,
    dt: f64,
    params: &TurbineParams,
) -> TrackingOutcome {
    track_step_with(command, state, v, dt, params, &CascadeConfig::default())
}

/// [`track_step`] with explicit inner sub-stepping.
pub fn track_step_with(
    command: f64,
    state: &TurbineState,
    v: f64,
    dt: f64,
    params: &TurbineParams,
    cfg: &CascadeConfig,
) -> TrackingOutcome {
    let n = cfg.substeps.max(1);
    let h = dt / n as f64;
    let mut s = *state;
    let mut out = None::<TrackingOutcome>;
    let mut energy = 0.0;
    for _ in 0..n {
        let o = track_once(command, &s, v, h, params);
        energy += o.achieved_p_e * h;
        s = o.new_state;
        out = Some(match out {
            None => o,
            Some(prev) => TrackingOutcome {
                used_pitch: prev.used_pitch || o.used_pitch,
                clamped: prev.clamped || o.clamped,
                pre_pitch_omega: if o.used_pitch {
                    o.pre_pitch_omega
                } else {
                    prev.pre_pitch_omega
                },
                ..o
            },
        });
    }
    let mut out = out.expect("at least one sub-step");
    if n > 1 {
        out.achieved_p_e = energy / dt;
        out.new_state.p_e = out.achieved_p_e;
    }
    out
}

fn track_once(
    command: f64,
    state: &TurbineState,
    v: f64,
    dt: f64,
    params: &TurbineParams,
) -> TrackingOutcome {
    let command = command.max(0.0);
    let max_move = params.pitch_step(dt);
    let beta_relaxed = (state.beta - max_move).max(params.beta_min);

    // Stage 1: rotor speed only.
    let rotor = step_rotor(v, beta_relaxed, command, state.omega, dt, params);
    let pre_pitch_omega = rotor.omega;
    let (omega, beta, used_pitch) = match rotor.clamped {
        Some(SpeedLimit::Max) if v > 0.0 => {
            // Stage 2: hold the rotor at its limit and shed the surplus by
            // pitching.
            let omega = params.omega_max;
            let hold = inertial_power(state.omega, omega, dt, params);
            let cp_target = ((command + hold) / params.wind_power(v)).max(0.0);
            let lambda = omega * params.rotor_radius / v;
            let target = pitch_from_cp(
                cp_target,
                lambda,
                &params.cp,
                params.beta_min,
                params.beta_max,
            );
            let beta = target
                .beta
                .clamp(state.beta - max_move, state.beta + max_move)
                .clamp(params.beta_min, params.beta_max);
            let settled = step_rotor(v, beta, command, state.omega, dt, params);
            (settled.omega, beta, true)
        }
        _ => (rotor.omega, beta_relaxed, false),
    };

    let achieved = electrical_power(v, state.omega, omega, beta, dt, params);
    let clamped = (achieved - command).abs() > 1.0;
    let achieved = achieved.max(0.0);
    TrackingOutcome {
        new_state: TurbineState {
            omega,
            beta,
            p_e: achieved,
        },
        achieved_p_e: achieved,
        used_pitch,
        clamped,
        pre_pitch_omega,
    }
}

/// Free-running MPPT step: the rotor moves straight to its optimal speed
/// and the output follows from the swing equation. Above rating the
/// cascade caps the output at rated power.
pub fn mppt_step(state: &TurbineState, v: f64, dt: f64, params: &TurbineParams) -> TrackingOutcome {
    let m = crate::turbine::mppt_reference(v, params);
    let beta = (state.beta - params.pitch_step(dt)).max(params.beta_min);
    if aero_power(v, m.omega, beta, params) > params.rated_power {
        return track_step(m.power, state, v, dt, params);
    }
    let p = electrical_power(v, state.omega, m.omega, beta, dt, params);
    if p < 0.0 {
        return track_step(0.0, state, v, dt, params);
    }
    TrackingOutcome {
        new_state: TurbineState {
            omega: m.omega,
            beta,
            p_e: p,
        },
        achieved_p_e: p,
        used_pitch: false,
        clamped: false,
        pre_pitch_omega: m.omega,
    }
}
