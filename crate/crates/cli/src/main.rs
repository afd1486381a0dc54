//! `windsmooth` — run smoothing scenarios, MPPT baselines, α sweeps, Cp
//! fits and plots from the command line.

mod plot;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use windsmooth::cp::fit_cp;
use windsmooth::sim::{
    prepare, records_csv, run_prepared, summary_json, CpSource, Mode, PreparedScenario,
    ScenarioConfig, SimulationSummary, StepRecord, TraceSource,
};

const THREADS_ENV: &str = "MILEAGE_SMOOTH_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "windsmooth",
    version,
    about = "Mileage-aware wind farm power smoothing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the optimizer and the MPPT baseline on the same traces.
    Run(ScenarioArgs),
    /// Run the free MPPT farm only.
    Baseline(ScenarioArgs),
    /// Sweep the energy/mileage weight and write the trade-off front.
    Pareto(ParetoArgs),
    /// Fit the Cp polynomial and print coefficients and diagnostics.
    FitCp(FitCpArgs),
    /// Render a step-record CSV as SVG line charts.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Scenario JSON; the built-in reference scenario when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Energy weight α ∈ [0, 1].
    #[arg(long)]
    alpha: Option<f64>,
    /// Look-ahead window length in control steps.
    #[arg(long)]
    horizon: Option<usize>,
    /// Seed of the synthetic wind trace.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for step records and summaries.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ParetoArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Comma-separated α values.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    alphas: Vec<f64>,
}

#[derive(Debug, Args)]
struct FitCpArgs {
    /// Scenario JSON whose fitting grid is used.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the JSON here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// Step-record CSV of the controlled run.
    #[arg(long)]
    input: PathBuf,
    /// Step-record CSV of the MPPT baseline.
    #[arg(long)]
    baseline: Option<PathBuf>,
    /// Output SVG file.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for filesystem failures, 1 for everything else.
fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<windsmooth::Error>() {
            if err.is_io() {
                return 2;
            }
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    1
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Baseline(args) => cmd_baseline(&args),
        Command::Pareto(args) => cmd_pareto(&args),
        Command::FitCp(args) => cmd_fit_cp(&args),
        Command::Plot(args) => cmd_plot(&args),
    }
}

/// Loads the scenario and applies flag overrides. Overrides edit the same
/// fields a config file would, so results are identical either way.
fn load_config(args: &ScenarioArgs) -> Result<ScenarioConfig> {
    let mut cfg = match &args.config {
        Some(path) => ScenarioConfig::from_path(path)
            .with_context(|| format!("loading scenario {}", path.display()))?,
        None => ScenarioConfig::default(),
    };
    if let Some(alpha) = args.alpha {
        cfg.alpha = alpha;
    }
    if let Some(h) = args.horizon {
        cfg.horizon_steps = h;
    }
    if let Some(seed) = args.seed {
        match &mut cfg.wind {
            TraceSource::Ou(spec) => spec.seed = seed,
            _ => bail!("--seed needs a synthetic wind trace"),
        }
    }
    if let Some(out) = &args.out {
        cfg.output.dir = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output_dir(cfg: &ScenarioConfig) -> Result<Option<PathBuf>> {
    match &cfg.output.dir {
        None => Ok(None),
        Some(dir) => {
            std::fs::create_dir_all(dir)
                .with_context(|| format!("creating output directory {}", dir.display()))?;
            Ok(Some(dir.clone()))
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_run(
    dir: &Path,
    tag: &str,
    records: &[StepRecord],
    summary: &SimulationSummary,
) -> Result<()> {
    write_file(
        &dir.join(format!("records_{tag}.csv")),
        &records_csv(records)?,
    )?;
    write_file(
        &dir.join(format!("summary_{tag}.json")),
        &summary_json(summary)?,
    )
}

/// Wall-clock timings live apart from the reproducible outputs.
fn timing_json(summary: &SimulationSummary) -> String {
    let v = serde_json::json!({
        "mode": summary.mode,
        "alpha": summary.alpha,
        "mean_solve_time_s": summary.mean_solve_time_s,
        "max_solve_time_s": summary.max_solve_time_s,
    });
    format!(
        "{}\n",
        serde_json::to_string_pretty(&v).expect("plain JSON")
    )
}

fn comparison_table(rows: &[&SimulationSummary]) -> String {
    let mut s = format!(
        "{:<10} {:>30} {:>18} {:>26} {:>16}\n",
        "Method",
        "Wind energy production (kWh)",
        "Mileage cost ($)",
        "Quadratic mileage ($^2 s)",
        "Mean solve (s)"
    );
    for r in rows {
        let name = match r.mode {
            Mode::Proposed => "Proposed",
            Mode::Mppt => "MPPT",
        };
        s.push_str(&format!(
            "{:<10} {:>30.1} {:>18.2} {:>26.4e} {:>16.4}\n",
            name, r.energy_kwh, r.mileage_settlement, r.mileage_quadratic, r.mean_solve_time_s
        ));
    }
    s
}

fn cmd_run(args: &ScenarioArgs) -> Result<()> {
    let cfg = load_config(args)?;
    let prep = prepare(&cfg)?;
    let (records, summary) = run_prepared(&cfg, &prep, Mode::Proposed)?;
    let (base_records, base_summary) = run_prepared(&cfg, &prep, Mode::Mppt)?;
    if let Some(dir) = output_dir(&cfg)? {
        write_run(&dir, "proposed", &records, &summary)?;
        write_run(&dir, "mppt", &base_records, &base_summary)?;
        write_file(&dir.join("timing.json"), &timing_json(&summary))?;
    }
    let mut out = std::io::stdout().lock();
    write!(out, "{}", summary_json(&summary)?)?;
    writeln!(out)?;
    write!(out, "{}", comparison_table(&[&summary, &base_summary]))?;
    Ok(())
}

fn cmd_baseline(args: &ScenarioArgs) -> Result<()> {
    let cfg = load_config(args)?;
    let prep = prepare(&cfg)?;
    let (records, summary) = run_prepared(&cfg, &prep, Mode::Mppt)?;
    if let Some(dir) = output_dir(&cfg)? {
        write_run(&dir, "mppt", &records, &summary)?;
    }
    print!("{}", summary_json(&summary)?);
    Ok(())
}

fn thread_cap() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .with_context(|| format!("{THREADS_ENV} must be a positive integer, got `{v}`"))?;
            if n == 0 {
                bail!("{THREADS_ENV} must be at least 1");
            }
            Ok(n)
        }
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Runs every α on shared traces, at most `threads` at a time. Results
/// come back in input order regardless of scheduling.
fn sweep(
    cfg: &ScenarioConfig,
    prep: &PreparedScenario,
    alphas: &[f64],
    threads: usize,
) -> Result<Vec<(Vec<StepRecord>, SimulationSummary)>> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<windsmooth::Result<_>>>> =
        alphas.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..threads.min(alphas.len()) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&alpha) = alphas.get(k) else { break };
                let point = ScenarioConfig {
                    alpha,
                    ..cfg.clone()
                };
                let result = run_prepared(&point, prep, Mode::Proposed);
                *slots[k].lock().expect("sweep slot") = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| {
            let result = slot.into_inner().expect("sweep slot").expect("every α ran");
            Ok(result?)
        })
        .collect()
}

fn front_csv(rows: &[&SimulationSummary]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "alpha",
        "energy_kwh",
        "mileage_settlement",
        "mileage_quadratic",
        "total_variation_mw",
    ])?;
    for s in rows {
        w.write_record([
            s.alpha.map_or(String::new(), |a| a.to_string()),
            s.energy_kwh.to_string(),
            s.mileage_settlement.to_string(),
            s.mileage_quadratic.to_string(),
            s.total_variation_mw.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn cmd_pareto(args: &ParetoArgs) -> Result<()> {
    let cfg = load_config(&args.scenario)?;
    let mut alphas = args.alphas.clone();
    if let Some(a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        bail!("alpha {a} outside [0, 1]");
    }
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    let threads = thread_cap()?;
    let prep = prepare(&cfg)?;
    let results = sweep(&cfg, &prep, &alphas, threads)?;
    let summaries: Vec<&SimulationSummary> = results.iter().map(|(_, s)| s).collect();
    let front = front_csv(&summaries)?;
    if let Some(dir) = output_dir(&cfg)? {
        for (alpha, (records, summary)) in alphas.iter().zip(&results) {
            write_run(&dir, &format!("alpha_{alpha}"), records, summary)?;
        }
        write_file(&dir.join("pareto_front.csv"), &front)?;
    }
    print!("{front}");
    Ok(())
}

fn cmd_fit_cp(args: &FitCpArgs) -> Result<()> {
    let grid = match &args.config {
        None => Default::default(),
        Some(path) => {
            let cfg = ScenarioConfig::from_path(path)
                .with_context(|| format!("loading scenario {}", path.display()))?;
            match cfg.turbine.cp {
                CpSource::Fit(grid) => grid,
                CpSource::Coefficients(_) => {
                    bail!(
                        "{} gives fixed Cp coefficients; nothing to fit",
                        path.display()
                    )
                }
            }
        }
    };
    let fit = fit_cp(&grid)?;
    let doc = serde_json::json!({ "grid": grid, "fit": fit });
    let text = format!("{}\n", serde_json::to_string_pretty(&doc)?);
    match &args.out {
        Some(path) => write_file(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_plot(args: &PlotArgs) -> Result<()> {
    let read =
        |p: &Path| std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()));
    let main = read(&args.input)?;
    let base = args.baseline.as_deref().map(read).transpose()?;
    let svg = plot::render(&main, base.as_deref())
        .with_context(|| format!("plotting {}", args.input.display()))?;
    write_file(&args.out, &svg)
}
