use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cascade::CascadeConfig;
use crate::cp::{fit_cp, CpCoefficients, CpGrid};
use crate::error::{Error, Result};
use crate::market::{reference_units, AgcUnit};
use crate::mpc::SolverConfig;
use crate::signal::OuSpec;
use crate::turbine::TurbineParams;

/// Complete description of one simulation run. Serialized as a single JSON
/// document; every field except the traces has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub turbine: TurbineConfig,
    /// Number of identical turbines in the farm.
    pub turbines: usize,
    pub units: Vec<AgcUnit>,
    pub alpha: f64,
    /// Control cycle (s).
    pub dt: f64,
    pub horizon_steps: usize,
    /// Length of synthetic traces (s); CSV traces set their own length.
    pub duration_s: f64,
    pub wind: TraceSource,
    pub imbalance: TraceSource,
    pub schedule: ScheduleConfig,
    pub forecast: ForecastConfig,
    pub solver: SolverConfig,
    pub cascade: CascadeConfig,
    pub output: OutputConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            turbine: TurbineConfig::default(),
            turbines: 4,
            units: reference_units(),
            alpha: 0.3,
            dt: 4.0,
            horizon_steps: 10,
            duration_s: 3600.0,
            wind: TraceSource::Ou(OuSpec {
                mean: 9.0,
                stdev: 1.5,
                correlation_s: 60.0,
                seed: 42,
                floor: Some(0.0),
            }),
            imbalance: TraceSource::Ou(OuSpec {
                mean: 0.0,
                stdev: 1.0,
                correlation_s: 30.0,
                seed: 7,
                floor: None,
            }),
            schedule: ScheduleConfig::default(),
            forecast: ForecastConfig::default(),
            solver: SolverConfig::default(),
            cascade: CascadeConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl ScenarioConfig {
    /// Reads a JSON configuration. Relative trace paths resolve against the
    /// file's directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ScenarioConfig = serde_json::from_str(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for src in [&mut self.wind, &mut self.imbalance] {
            if let TraceSource::Csv { path, .. } = src {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.turbines == 0 {
            return bad("at least one turbine is required");
        }
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if self.horizon_steps == 0 {
            return bad("horizon_steps must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha must lie in [0, 1]");
        }
        if self.units.is_empty() {
            return bad("at least one AGC unit is required");
        }
        for u in &self.units {
            u.validate()?;
        }
        for src in [&self.wind, &self.imbalance] {
            match src {
                TraceSource::Ou(spec) => spec.validate()?,
                TraceSource::Csv { path, .. } => {
                    if !path.exists() {
                        return Err(Error::io(
                            path,
                            std::io::Error::new(std::io::ErrorKind::NotFound, "trace not found"),
                        ));
                    }
                }
                TraceSource::Zero => {}
            }
        }
        if matches!(self.wind, TraceSource::Zero) {
            return bad("a wind trace is required");
        }
        if !(self.schedule.window_s >= 0.0) {
            return bad("schedule window must be non-negative");
        }
        if !(self.forecast.wind_noise_stdev >= 0.0) {
            return bad("forecast noise must be non-negative");
        }
        self.solver.validate()?;
        Ok(())
    }

    /// Turbine parameters, fitting the Cp surface when requested.
    pub fn turbine_params(&self) -> Result<TurbineParams> {
        let t = &self.turbine;
        let cp = match &t.cp {
            CpSource::Fit(grid) => fit_cp(grid)?.coeffs,
            CpSource::Coefficients(c) => *c,
        };
        let params = TurbineParams {
            rho: t.rho,
            rotor_radius: t.rotor_radius,
            swept_area: std::f64::consts::PI * t.rotor_radius * t.rotor_radius,
            inertia: t.inertia,
            rated_power: t.rated_power,
            omega_min: t.omega_min,
            omega_max: t.omega_max,
            beta_min: t.beta_min,
            beta_max: t.beta_max,
            pitch_rate_max: t.pitch_rate_max,
            cp,
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TurbineConfig {
    pub rho: f64,
    pub rotor_radius: f64,
    pub inertia: f64,
    pub rated_power: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    pub pitch_rate_max: f64,
    pub cp: CpSource,
}

impl Default for TurbineConfig {
    fn default() -> Self {
        TurbineConfig {
            rho: 1.225,
            rotor_radius: 63.0,
            inertia: 3.544e7,
            rated_power: 5.0e6,
            omega_min: 0.5,
            omega_max: 1.5,
            beta_min: 0.0,
            beta_max: 25.0,
            pitch_rate_max: 5.0,
            cp: CpSource::Fit(CpGrid::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CpSource {
    /// Fit the polynomial to the reference surface on this grid.
    Fit(CpGrid),
    Coefficients(CpCoefficients),
}

/// Where an exogenous series comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceSource {
    /// CSV with a `t_s` column. `columns` selects value columns by header
    /// name; all non-time columns are used when omitted.
    Csv {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        columns: Option<Vec<String>>,
    },
    Ou(OuSpec),
    Zero,
}

/// Farm schedule: centred moving average of the MPPT-available farm power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    /// Averaging window (s); 0 schedules the available power itself.
    pub window_s: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig { window_s: 300.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastConfig {
    /// Hold the last measured wind and imbalance over the window instead
    /// of using the realized traces.
    pub persistence: bool,
    /// Gaussian noise added to the wind forecast (m/s).
    pub wind_noise_stdev: f64,
    pub noise_seed: u64,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig {
            persistence: false,
            wind_noise_stdev: 0.0,
            noise_seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}
