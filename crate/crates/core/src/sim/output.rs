//! Step-record CSV and summary JSON writers.
//!
//! Both outputs are reproducible byte for byte: floats use the shortest
//! round-trip representation and wall-clock timings are left out.

use std::path::Path;

use super::{SimulationSummary, StepRecord};
use crate::error::{Error, Result};

fn header(n: usize, units: usize) -> Vec<String> {
    let mut h = vec!["t_s".to_string()];
    let per_turbine = [
        "v",
        "omega",
        "beta",
        "p_e",
        "command",
        "pre_pitch_omega",
        "used_pitch",
        "clamped",
    ];
    for name in per_turbine {
        h.extend((1..=n).map(|i| format!("{name}_t{i}")));
    }
    h.extend(
        [
            "farm_p_e_w",
            "schedule_mw",
            "imbalance_mw",
            "net_imbalance_mw",
        ]
        .map(String::from),
    );
    h.extend((1..=units).map(|u| format!("g_u{u}")));
    h.extend(
        [
            "gamma",
            "dispatch_saturated",
            "dispatch_residual_mw",
            "energy_j",
            "movement_cost",
            "quadratic_penalty",
            "solver_iterations",
            "solver_converged",
            "plan_violation_w",
            "horizon_violation_w",
        ]
        .map(String::from),
    );
    h
}

fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

fn row(r: &StepRecord) -> Vec<String> {
    let f = |x: &f64| x.to_string();
    let mut out = vec![f(&r.t)];
    for v in [
        &r.wind,
        &r.omega,
        &r.beta,
        &r.p_e,
        &r.command,
        &r.pre_pitch_omega,
    ] {
        out.extend(v.iter().map(f));
    }
    out.extend(r.used_pitch.iter().map(|&b| flag(b)));
    out.extend(r.clamped.iter().map(|&b| flag(b)));
    out.extend(
        [r.farm_p_e, r.schedule, r.imbalance, r.net_imbalance]
            .iter()
            .map(f),
    );
    out.extend(r.g.iter().map(f));
    out.push(f(&r.gamma));
    out.push(flag(r.dispatch_saturated));
    out.extend(
        [
            r.dispatch_residual,
            r.energy_j,
            r.movement_cost,
            r.quadratic_penalty,
        ]
        .iter()
        .map(f),
    );
    out.push(r.solver_iterations.to_string());
    out.push(flag(r.solver_converged));
    out.push(f(&r.plan_violation));
    out.push(f(&r.horizon_violation));
    out
}

/// Renders records as CSV text with one column per field, flattened per
/// turbine (`_t1..`) and per unit (`_u1..`).
pub fn records_csv(records: &[StepRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let (n, units) = records
        .first()
        .map_or((0, 0), |r| (r.turbines(), r.g.len()));
    w.write_record(header(n, units))?;
    for r in records {
        w.write_record(row(r))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Config(format!("CSV buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV output is ASCII"))
}

pub fn write_records_csv(path: &Path, records: &[StepRecord]) -> Result<()> {
    let text = records_csv(records)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Flat JSON document with keys in declaration order.
pub fn summary_json(summary: &SimulationSummary) -> Result<String> {
    let mut s = serde_json::to_string_pretty(summary)?;
    s.push('\n');
    Ok(s)
}

pub fn write_summary_json(path: &Path, summary: &SimulationSummary) -> Result<()> {
    let text = summary_json(summary)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
