//! Single-turbine physics: aerodynamic power, the discrete swing equation
//! linking rotor speed to electrical output, MPPT reference and the
//! kinetic-energy headroom of the rotor.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cp::{golden_section_max, CpCoefficients, BETZ_LIMIT};
use crate::error::{Error, Result};

/// Physical constants of one turbine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurbineParams {
    /// Air density (kg/m³).
    pub rho: f64,
    /// Rotor radius (m).
    pub rotor_radius: f64,
    /// Swept area (m²), always `π·rotor_radius²`.
    pub swept_area: f64,
    /// Equivalent inertia of blades and generator (kg·m²).
    pub inertia: f64,
    /// Rated electrical power (W).
    pub rated_power: f64,
    /// Rotor speed bounds (rad/s).
    pub omega_min: f64,
    pub omega_max: f64,
    /// Pitch bounds (deg).
    pub beta_min: f64,
    pub beta_max: f64,
    /// Pitch actuator rate limit (deg/s).
    pub pitch_rate_max: f64,
    pub cp: CpCoefficients,
}

impl TurbineParams {
    /// 5 MW class turbine with a 63 m rotor.
    pub fn reference(cp: CpCoefficients) -> Self {
        Self::with_radius(63.0, cp)
    }

    /// Reference constants with a different rotor radius; the swept area is
    /// derived from it.
    pub fn with_radius(rotor_radius: f64, cp: CpCoefficients) -> Self {
        TurbineParams {
            rho: 1.225,
            rotor_radius,
            swept_area: PI * rotor_radius * rotor_radius,
            inertia: 3.544e7,
            rated_power: 5.0e6,
            omega_min: 0.5,
            omega_max: 1.5,
            beta_min: 0.0,
            beta_max: 25.0,
            pitch_rate_max: 5.0,
            cp,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("turbine: {msg}")));
        if !(self.rho > 0.0) {
            return bad("air density must be positive");
        }
        if !(self.rotor_radius > 0.0) {
            return bad("rotor radius must be positive");
        }
        if !(self.inertia > 0.0) {
            return bad("inertia must be positive");
        }
        if !(self.rated_power > 0.0) {
            return bad("rated power must be positive");
        }
        if !(0.0 < self.omega_min && self.omega_min < self.omega_max) {
            return bad("rotor speed bounds must satisfy 0 < omega_min < omega_max");
        }
        if !(self.beta_min < self.beta_max) {
            return bad("pitch bounds must satisfy beta_min < beta_max");
        }
        if !(self.pitch_rate_max > 0.0) {
            return bad("pitch rate limit must be positive");
        }
        let area = PI * self.rotor_radius * self.rotor_radius;
        if ((self.swept_area - area) / area).abs() > 1e-9 {
            return bad("swept area must equal π·rotor_radius²");
        }
        let cp = &self.cp;
        if !(cp.cp_max > 0.0 && cp.cp_max < BETZ_LIMIT) {
            return bad("Cp maximum must lie in (0, Betz limit)");
        }
        if (cp.eval(cp.lambda_opt, self.beta_min) - cp.cp_max).abs() > 1e-9 {
            return bad("Cp optimum does not match the coefficients at beta_min");
        }
        Ok(())
    }

    #[inline]
    pub fn clamp_omega(&self, omega: f64) -> f64 {
        omega.clamp(self.omega_min, self.omega_max)
    }

    #[inline]
    pub fn clamp_beta(&self, beta: f64) -> f64 {
        beta.clamp(self.beta_min, self.beta_max)
    }

    /// Largest pitch change over one step of length `dt`.
    #[inline]
    pub fn pitch_step(&self, dt: f64) -> f64 {
        self.pitch_rate_max * dt
    }

    /// Power in the wind crossing the rotor, `0.5·ρ·A·v³` (W).
    #[inline]
    pub fn wind_power(&self, v: f64) -> f64 {
        0.5 * self.rho * self.swept_area * v * v * v
    }
}

/// Evolving operating point of one turbine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurbineState {
    /// Rotor speed (rad/s).
    pub omega: f64,
    /// Pitch angle (deg).
    pub beta: f64,
    /// Last electrical output (W).
    pub p_e: f64,
}

impl TurbineState {
    /// Steady MPPT operation at wind speed `v`.
    pub fn at_mppt(v: f64, params: &TurbineParams) -> Self {
        let m = mppt_reference(v, params);
        TurbineState {
            omega: m.omega,
            beta: params.beta_min,
            p_e: m.power,
        }
    }
}

/// Aerodynamic rotor power (W). Zero wind yields exactly zero.
#[inline]
pub fn aero_power(v: f64, omega: f64, beta: f64, params: &TurbineParams) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    let lambda = omega * params.rotor_radius / v;
    if lambda <= 0.0 {
        return 0.0;
    }
    params.wind_power(v) * params.cp.eval(lambda, beta)
}

/// Electrical output from the backward-difference swing equation:
/// aerodynamic power minus `J·ω(t)·(ω(t) − ω(t−1))/Δt`.
#[inline]
pub fn electrical_power(
    v: f64,
    omega_prev: f64,
    omega_now: f64,
    beta: f64,
    dt: f64,
    params: &TurbineParams,
) -> f64 {
    aero_power(v, omega_now, beta, params) - inertial_power(omega_prev, omega_now, dt, params)
}

/// Power absorbed by the rotor when moving from `omega_prev` to `omega_now`
/// over `dt` (negative when kinetic energy is released).
#[inline]
pub fn inertial_power(omega_prev: f64, omega_now: f64, dt: f64, params: &TurbineParams) -> f64 {
    params.inertia * omega_now * (omega_now - omega_prev) / dt
}

/// Maximum power convertible from stored rotor energy when slowing from
/// `omega_prev` to the MPPT speed within one step. Negative below MPPT
/// speed.
#[inline]
pub fn kinetic_headroom(omega_prev: f64, omega_mpp: f64, dt: f64, inertia: f64) -> f64 {
    0.5 * inertia * (omega_prev * omega_prev - omega_mpp * omega_mpp) / dt
}

/// MPPT operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpptPoint {
    pub omega: f64,
    pub power: f64,
}

/// Optimal rotor speed and capped power at wind speed `v`.
pub fn mppt_reference(v: f64, params: &TurbineParams) -> MpptPoint {
    if v <= 0.0 {
        return MpptPoint {
            omega: params.omega_min,
            power: 0.0,
        };
    }
    let omega = params.clamp_omega(params.cp.lambda_opt * v / params.rotor_radius);
    let power = aero_power(v, omega, params.beta_min, params).min(params.rated_power);
    MpptPoint { omega, power }
}

/// Which rotor-speed bound a solution was clamped to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpeedLimit {
    Min,
    Max,
}

/// Outcome of inverting the swing equation for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorStep {
    pub omega: f64,
    /// Set when the unconstrained solution left `[omega_min, omega_max]`.
    pub clamped: Option<SpeedLimit>,
    /// Set when no root exists inside the widened search bracket.
    pub infeasible: bool,
}

const BRACKET_MARGIN: f64 = 0.5;
const MAX_ITER: usize = 50;
const SCAN_POINTS: usize = 32;
const RESIDUAL_TOL: f64 = 1e-6;

/// Rotor speed at which the turbine delivers `p_command` over the next
/// step, found by safeguarded Newton iteration on the swing equation and
/// clamped into the speed bounds.
///
/// When several speeds deliver the command the largest is returned; the
/// output falls with speed there, so the operating point is stable.
pub fn step_rotor(
    v: f64,
    beta: f64,
    p_command: f64,
    omega_prev: f64,
    dt: f64,
    params: &TurbineParams,
) -> RotorStep {
    let residual = |w: f64| electrical_power(v, omega_prev, w, beta, dt, params) - p_command;
    let lo = (params.omega_min - BRACKET_MARGIN).max(1e-6);
    let hi = params.omega_max + BRACKET_MARGIN;

    // Sample the residual, adding every local peak refined to precision: a
    // command close to a peak is met only on a sliver of speeds that can
    // fall between samples.
    let step = (hi - lo) / SCAN_POINTS as f64;
    let grid: Vec<(f64, f64)> = (0..=SCAN_POINTS)
        .map(|k| {
            let w = lo + step * k as f64;
            (w, residual(w))
        })
        .collect();
    let mut samples = grid.clone();
    for k in 0..=SCAN_POINTS {
        let below = if k > 0 {
            grid[k - 1].1
        } else {
            f64::NEG_INFINITY
        };
        let above = if k < SCAN_POINTS {
            grid[k + 1].1
        } else {
            f64::NEG_INFINITY
        };
        if grid[k].1 >= below && grid[k].1 >= above && grid[k].1 < 0.0 {
            let (a, b) = ((grid[k].0 - step).max(lo), (grid[k].0 + step).min(hi));
            let peak = golden_section_max(residual, a, b, 1e-12);
            samples.push((peak, residual(peak)));
        }
    }
    samples.sort_by(|x, y| x.0.total_cmp(&y.0));
    let f_hi = grid[SCAN_POINTS].1;

    // The highest +→− sign change brackets the largest root.
    let bracket = samples
        .windows(2)
        .rev()
        .find(|p| p[0].1 >= 0.0 && p[1].1 <= 0.0)
        .map(|p| (p[0].0, p[1].0, p[0].1, p[1].1));

    let Some((mut a, mut b, fa, fb)) = bracket else {
        // Output exceeds the command even at the top of the bracket, or
        // falls short everywhere.
        let limit = if f_hi > 0.0 {
            SpeedLimit::Max
        } else {
            SpeedLimit::Min
        };
        let omega = match limit {
            SpeedLimit::Max => params.omega_max,
            SpeedLimit::Min => params.omega_min,
        };
        return RotorStep {
            omega,
            clamped: Some(limit),
            infeasible: true,
        };
    };

    let omega = if fa == 0.0 {
        a
    } else if fb == 0.0 {
        b
    } else {
        let mut w = omega_prev.clamp(a, b);
        for _ in 0..MAX_ITER {
            let f = residual(w);
            if f.abs() <= RESIDUAL_TOL {
                break;
            }
            if f > 0.0 {
                a = w;
            } else {
                b = w;
            }
            let h = 1e-7 * w.max(1.0);
            let slope = (residual(w + h) - residual(w - h)) / (2.0 * h);
            let newton = w - f / slope;
            w = if slope < 0.0 && newton > a && newton < b {
                newton
            } else {
                0.5 * (a + b)
            };
            if b - a < 1e-14 {
                break;
            }
        }
        w
    };

    let clamped = if omega < params.omega_min {
        Some(SpeedLimit::Min)
    } else if omega > params.omega_max {
        Some(SpeedLimit::Max)
    } else {
        None
    };
    RotorStep {
        omega: params.clamp_omega(omega),
        clamped,
        infeasible: false,
    }
}
