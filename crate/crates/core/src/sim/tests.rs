use super::*;
use crate::market::{settlement_mileage_cost, DispatchResult};
use crate::signal::OuSpec;

fn constant_wind(v: f64, duration_s: f64) -> ScenarioConfig {
    ScenarioConfig {
        wind: TraceSource::Ou(OuSpec {
            mean: v,
            stdev: 0.0,
            correlation_s: 60.0,
            seed: 1,
            floor: Some(0.0),
        }),
        imbalance: TraceSource::Zero,
        duration_s,
        ..ScenarioConfig::default()
    }
}

fn short_ou(duration_s: f64) -> ScenarioConfig {
    ScenarioConfig {
        duration_s,
        imbalance: TraceSource::Ou(OuSpec {
            mean: 0.0,
            stdev: 1.0,
            correlation_s: 30.0,
            seed: 3,
            floor: None,
        }),
        ..ScenarioConfig::default()
    }
}

fn record(farm: f64, energy_j: f64, g: Vec<f64>, gamma: f64) -> StepRecord {
    StepRecord {
        t: 0.0,
        wind: vec![9.0],
        omega: vec![1.0],
        beta: vec![0.0],
        p_e: vec![farm],
        command: vec![farm],
        pre_pitch_omega: vec![1.0],
        used_pitch: vec![false],
        clamped: vec![false],
        farm_p_e: farm,
        schedule: 0.0,
        imbalance: 0.0,
        net_imbalance: g.iter().sum(),
        movement_cost: 0.0,
        quadratic_penalty: step_mileage_penalty(gamma, &g),
        g,
        gamma,
        dispatch_saturated: false,
        dispatch_residual: 0.0,
        energy_j,
        solver_iterations: 0,
        solver_converged: false,
        plan_violation: 0.0,
        horizon_violation: 0.0,
        solve_time: 0.0,
    }
}

fn params() -> TurbineParams {
    ScenarioConfig::default().turbine_params().unwrap()
}

#[test]
fn one_record_rectangle_is_one_kwh() {
    let s = summarize(
        &[record(3.6e6, 3.6e6 * 1.0, vec![0.0; 3], 1.0)],
        Mode::Mppt,
        None,
        &params(),
    );
    assert!((s.energy_kwh - 1.0).abs() < 1e-12);
    assert_eq!(s.steps, 1);
}

#[test]
fn zero_regulation_costs_nothing() {
    let recs: Vec<_> = (0..5)
        .map(|_| record(1e6, 4e6, vec![0.0; 3], 2.79))
        .collect();
    let s = summarize(&recs, Mode::Proposed, Some(0.5), &params());
    assert_eq!(s.mileage_settlement, 0.0);
    assert_eq!(s.mileage_quadratic, 0.0);
}

#[test]
fn centered_average_edges() {
    let x = [1.0, 2.0, 3.0, 4.0, 5.0];
    assert_eq!(centered_average(&x, 0), x.to_vec());
    assert_eq!(centered_average(&x, 1), vec![1.5, 2.0, 3.0, 4.0, 4.5]);
    assert_eq!(centered_average(&x, 10), vec![3.0; 5]);
}

#[test]
fn too_short_trace_is_config_error() {
    let cfg = ScenarioConfig {
        duration_s: 2.0,
        ..constant_wind(9.0, 0.0)
    };
    assert!(matches!(run_scenario(&cfg), Err(Error::Config(_))));
    assert!(matches!(run_mppt_baseline(&cfg), Err(Error::Config(_))));
}

#[test]
fn invalid_configs_rejected() {
    let base = ScenarioConfig::default();
    for cfg in [
        ScenarioConfig {
            turbines: 0,
            ..base.clone()
        },
        ScenarioConfig {
            dt: 0.0,
            ..base.clone()
        },
        ScenarioConfig {
            alpha: 1.5,
            ..base.clone()
        },
        ScenarioConfig {
            horizon_steps: 0,
            ..base.clone()
        },
        ScenarioConfig {
            wind: TraceSource::Zero,
            ..base.clone()
        },
    ] {
        assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{cfg:?}");
    }
    let missing = ScenarioConfig {
        wind: TraceSource::Csv {
            path: "/nonexistent/wind.csv".into(),
            columns: None,
        },
        ..base
    };
    assert!(missing.validate().unwrap_err().is_io());
}

#[test]
fn config_json_round_trip_and_strictness() {
    let cfg = short_ou(120.0);
    let text = serde_json::to_string(&cfg).unwrap();
    let back: ScenarioConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(cfg, back);
    let partial: ScenarioConfig = serde_json::from_str(r#"{"alpha": 0.7}"#).unwrap();
    assert_eq!(partial.alpha, 0.7);
    assert_eq!(partial.turbines, 4);
    assert!(serde_json::from_str::<ScenarioConfig>(r#"{"alpah": 0.7}"#).is_err());
}

#[test]
fn baseline_constant_wind_is_constant() {
    let cfg = constant_wind(8.0, 80.0);
    let (recs, s) = run_mppt_baseline(&cfg).unwrap();
    let p = params();
    let expected = 4.0 * mppt_reference(8.0, &p).power;
    for r in &recs {
        assert!(
            (r.farm_p_e - expected).abs() < 1e-6 * expected,
            "{}",
            r.farm_p_e
        );
        assert_eq!(r.solve_time, 0.0);
        assert_eq!(r.solver_iterations, 0);
    }
    assert_eq!(s.mean_solve_time_s, 0.0);
    assert!(s.total_variation_mw < 1e-9);
}

#[test]
fn energy_only_constant_wind_tracks_mppt() {
    // alpha = 1: regulation is irrelevant and the farm harvests MPPT power;
    // the units carry the raw imbalance.
    let cfg = ScenarioConfig {
        alpha: 1.0,
        imbalance: short_ou(0.0).imbalance,
        ..constant_wind(8.0, 80.0)
    };
    let (recs, _) = run_scenario(&cfg).unwrap();
    let p = params();
    let p_mpp = mppt_reference(8.0, &p).power;
    let merit = MeritOrder::new(&cfg.units).unwrap();
    for r in &recs {
        for &pe in &r.p_e {
            assert!((pe - p_mpp).abs() < 0.01 * p_mpp, "{pe} vs {p_mpp}");
        }
        let raw = merit.dispatch(r.imbalance);
        for (a, b) in r.g.iter().zip(&raw.g) {
            assert!((a - b).abs() < 0.05 * 4.0 * p_mpp / 1e6 + 1e-9);
        }
    }
}

#[test]
fn nothing_to_regulate_costs_nothing() {
    // With any weight on regulation the farm holds its schedule exactly; an
    // energy-only farm may borrow a little rotor energy off schedule.
    for (alpha, tol) in [(0.0, 1e-3), (0.3, 1e-3), (1.0, 1.0)] {
        let cfg = ScenarioConfig {
            alpha,
            ..constant_wind(9.0, 60.0)
        };
        let (_, s) = run_scenario(&cfg).unwrap();
        assert!(
            s.mileage_settlement < tol,
            "{alpha}: {}",
            s.mileage_settlement
        );
        assert!(
            s.mileage_quadratic < tol,
            "{alpha}: {}",
            s.mileage_quadratic
        );
    }
}

#[test]
fn settlement_matches_market_totals_and_balance_holds() {
    let cfg = short_ou(200.0);
    let (recs, s) = run_scenario(&cfg).unwrap();
    let series: Vec<DispatchResult> = recs
        .iter()
        .map(|r| DispatchResult {
            g: r.g.clone(),
            gamma: r.gamma,
            feasible: !r.dispatch_saturated,
            residual: r.dispatch_residual,
        })
        .collect();
    let m = settlement_mileage_cost(&series, cfg.dt).unwrap();
    assert!((m.settlement - s.mileage_settlement).abs() < 1e-9 * m.settlement.max(1.0));
    assert!((m.quadratic - s.mileage_quadratic).abs() < 1e-9 * m.quadratic.max(1.0));
    for r in &recs {
        assert!(r.balance_residual().abs() <= 1e-9);
        let farm: f64 = r.p_e.iter().sum();
        assert!((farm - r.farm_p_e).abs() < 1e-6);
    }
    assert_eq!(s.bound_violation_count, 0);
    assert_eq!(recs.len(), 51);
    assert_eq!(recs[0].t, 0.0);
    assert_eq!(recs[50].t, 200.0);
}

#[test]
fn summaries_are_additive() {
    let cfg = short_ou(120.0);
    let (recs, whole) = run_scenario(&cfg).unwrap();
    let p = params();
    let (a, b) = recs.split_at(13);
    let sa = summarize(a, Mode::Proposed, Some(0.3), &p);
    let sb = summarize(b, Mode::Proposed, Some(0.3), &p);
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(1.0);
    assert!(close(sa.energy_kwh + sb.energy_kwh, whole.energy_kwh));
    assert!(close(
        sa.mileage_settlement + sb.mileage_settlement,
        whole.mileage_settlement
    ));
    assert!(close(
        sa.mileage_quadratic + sb.mileage_quadratic,
        whole.mileage_quadratic
    ));
    assert_eq!(sa.steps + sb.steps, whole.steps);
}

#[test]
fn runs_are_reproducible() {
    let cfg = short_ou(100.0);
    let (r1, s1) = run_scenario(&cfg).unwrap();
    let (r2, s2) = run_scenario(&cfg).unwrap();
    assert_eq!(records_csv(&r1).unwrap(), records_csv(&r2).unwrap());
    assert_eq!(summary_json(&s1).unwrap(), summary_json(&s2).unwrap());
}

#[test]
fn proposed_energy_within_mppt_ceiling() {
    let cfg = short_ou(300.0);
    let prep = prepare(&cfg).unwrap();
    let (_, p) = run_prepared(&cfg, &prep, Mode::Proposed).unwrap();
    let (_, b) = run_prepared(&cfg, &prep, Mode::Mppt).unwrap();
    assert!(
        p.energy_kwh <= b.energy_kwh * 1.001,
        "{} vs {}",
        p.energy_kwh,
        b.energy_kwh
    );
}

#[test]
fn csv_layout() {
    let cfg = short_ou(8.0);
    let (recs, s) = run_scenario(&cfg).unwrap();
    let text = records_csv(&recs).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[0], "t_s");
    assert!(header.contains(&"v_t4") && !header.contains(&"v_t5"));
    assert!(header.contains(&"g_u3") && !header.contains(&"g_u4"));
    for line in lines {
        assert_eq!(line.split(',').count(), header.len());
    }
    let json: serde_json::Value = serde_json::from_str(&summary_json(&s).unwrap()).unwrap();
    let keys: Vec<&String> = json.as_object().unwrap().keys().collect();
    assert_eq!(keys[0], "mode");
    assert_eq!(keys[1], "alpha");
    assert!(!json.as_object().unwrap().contains_key("mean_solve_time_s"));
}

#[test]
fn csv_traces_drive_the_run() {
    let dir = std::env::temp_dir().join(format!("ws-sim-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("wind.csv"), "t_s,v1\n0,8\n40,10\n").unwrap();
    std::fs::write(dir.join("imb.csv"), "t_s,imbalance_mw\n0,0.5\n40,-0.5\n").unwrap();
    let cfg_text = r#"{"wind": {"csv": {"path": "wind.csv"}},
                       "imbalance": {"csv": {"path": "imb.csv"}},
                       "turbines": 2}"#;
    std::fs::write(dir.join("s.json"), cfg_text).unwrap();
    let cfg = ScenarioConfig::from_path(&dir.join("s.json")).unwrap();
    let prep = prepare(&cfg).unwrap();
    assert_eq!(prep.steps(), 11);
    assert_eq!(prep.turbines(), 2);
    assert!((prep.wind[1][5] - 9.0).abs() < 1e-12);
    assert!((prep.imbalance[5]).abs() < 1e-12);
    std::fs::remove_dir_all(&dir).ok();
}
