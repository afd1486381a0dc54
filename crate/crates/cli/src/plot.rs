//! Minimal SVG line charts for step-record CSVs.

use std::fmt::Write as _;

use anyhow::{bail, Context, Result};

const WIDTH: f64 = 960.0;
const PANEL_HEIGHT: f64 = 220.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const PANEL_GAP: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Columns of a step-record CSV, keyed by header.
struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn parse(text: &str) -> Result<Table> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .with_context(|| format!("line {}: non-numeric field", i + 2))?;
            rows.push(row);
        }
        if rows.is_empty() {
            bail!("no step records");
        }
        Ok(Table { headers, rows })
    }

    fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.headers.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    fn require(&self, name: &str) -> Result<Vec<f64>> {
        self.column(name)
            .with_context(|| format!("missing column `{name}`"))
    }

    /// All columns named `{prefix}{n}` for n = 0, 1, … in order.
    fn family(&self, prefix: &str) -> Vec<Vec<f64>> {
        (0..)
            .map_while(|n| self.column(&format!("{prefix}{n}")))
            .collect()
    }
}

struct Series {
    label: String,
    y: Vec<f64>,
    dashed: bool,
}

struct Panel {
    title: &'static str,
    unit: &'static str,
    series: Vec<Series>,
}

/// Renders the controlled run (and optionally the MPPT baseline) as three
/// stacked panels: farm power, AGC dispatch and rotor speeds.
pub fn render(main_csv: &str, baseline_csv: Option<&str>) -> Result<String> {
    let main = Table::parse(main_csv)?;
    let t = main.require("t_s")?;

    let mw = |v: Vec<f64>| v.into_iter().map(|x| x / 1e6).collect::<Vec<_>>();
    let mut power = vec![Series {
        label: "farm output".into(),
        y: mw(main.require("farm_p_e_w")?),
        dashed: false,
    }];
    let commands = main.family("command_t");
    if !commands.is_empty() {
        let total = (0..t.len())
            .map(|k| commands.iter().map(|c| c[k]).sum::<f64>() / 1e6)
            .collect();
        power.push(Series {
            label: "summed command".into(),
            y: total,
            dashed: true,
        });
    }
    if let Some(s) = main.column("schedule_mw") {
        power.push(Series {
            label: "schedule".into(),
            y: s,
            dashed: true,
        });
    }
    if let Some(text) = baseline_csv {
        let base = Table::parse(text).context("baseline")?;
        let y = mw(base.require("farm_p_e_w")?);
        if y.len() != t.len() {
            bail!("baseline has {} records, run has {}", y.len(), t.len());
        }
        power.push(Series {
            label: "MPPT baseline".into(),
            y,
            dashed: false,
        });
    }

    let dispatch = main
        .family("g_u")
        .into_iter()
        .enumerate()
        .map(|(u, y)| Series {
            label: format!("unit {u}"),
            y,
            dashed: false,
        })
        .collect();
    let speeds = main
        .family("omega_t")
        .into_iter()
        .enumerate()
        .map(|(i, y)| Series {
            label: format!("turbine {i}"),
            y,
            dashed: false,
        })
        .collect();

    let panels = [
        Panel {
            title: "Farm power",
            unit: "MW",
            series: power,
        },
        Panel {
            title: "AGC dispatch",
            unit: "MW",
            series: dispatch,
        },
        Panel {
            title: "Rotor speed",
            unit: "rad/s",
            series: speeds,
        },
    ];
    Ok(draw(&t, &panels))
}

fn draw(t: &[f64], panels: &[Panel]) -> String {
    let height = MARGIN_TOP + panels.len() as f64 * (PANEL_HEIGHT + PANEL_GAP);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (t0, t1) = bounds(t.iter().copied());
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    for (n, panel) in panels.iter().enumerate() {
        let top = MARGIN_TOP + n as f64 * (PANEL_HEIGHT + PANEL_GAP);
        let (y0, y1) = bounds(panel.series.iter().flat_map(|s| s.y.iter().copied()));
        let x = |v: f64| MARGIN_LEFT + (v - t0) / (t1 - t0) * plot_w;
        let y = |v: f64| top + PANEL_HEIGHT - (v - y0) / (y1 - y0) * PANEL_HEIGHT;

        let _ = writeln!(
            svg,
            r##"<rect x="{MARGIN_LEFT}" y="{top}" width="{plot_w}" height="{PANEL_HEIGHT}" fill="none" stroke="#444"/>"##
        );
        let _ = writeln!(
            svg,
            r#"<text x="{MARGIN_LEFT}" y="{:.1}" font-weight="bold">{} ({})</text>"#,
            top - 8.0,
            panel.title,
            panel.unit
        );
        for (v, anchor) in [(y0, top + PANEL_HEIGHT), (y1, top + 4.0)] {
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                MARGIN_LEFT - 6.0,
                anchor,
                tick(v)
            );
        }
        if n + 1 == panels.len() {
            for (v, anchor) in [(t0, "start"), (t1, "end")] {
                let _ = writeln!(
                    svg,
                    r#"<text x="{:.1}" y="{:.1}" text-anchor="{anchor}">{} s</text>"#,
                    x(v),
                    top + PANEL_HEIGHT + 16.0,
                    tick(v)
                );
            }
        }

        for (i, s) in panel.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let mut points = String::new();
            for (tk, yk) in t.iter().zip(&s.y) {
                let _ = write!(points, "{:.1},{:.1} ", x(*tk), y(*yk));
            }
            let dash = if s.dashed {
                r#" stroke-dasharray="5,3""#
            } else {
                ""
            };
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.2"{dash} points="{}"/>"#,
                points.trim_end()
            );
            let ly = top + 14.0 + 14.0 * i as f64;
            let lx = WIDTH - MARGIN_RIGHT - 130.0;
            let _ = writeln!(
                svg,
                r#"<line x1="{lx}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.1}" y="{ly}">{}</text>"#,
                ly - 4.0,
                lx + 18.0,
                ly - 4.0,
                lx + 22.0,
                s.label
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Data range, padded so flat series still get a visible band.
fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        let pad = lo.abs().max(1.0) * 0.05;
        return (lo - pad, hi + pad);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}
