//! CSV trace ingestion.
//!
//! Files carry a header `t_s,<col>[,<col>...]` followed by strictly
//! increasing timestamps. Values are resampled onto a uniform `dt` grid
//! starting at the first timestamp by linear interpolation.

use std::path::Path;

use crate::error::{Error, Result};

/// A parsed trace file: timestamps plus one column per named series.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTrace {
    pub names: Vec<String>,
    pub t: Vec<f64>,
    /// `columns[c][row]`
    pub columns: Vec<Vec<f64>>,
}

impl RawTrace {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Parses CSV text; `origin` only labels error messages.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let fail = |line: usize, message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(text.as_bytes());

        let mut rows = reader.records();
        let header = match rows.next() {
            None => return Err(fail(1, "empty file".into())),
            Some(r) => r?,
        };
        let line_of = |r: &csv::StringRecord, fallback: usize| {
            r.position().map_or(fallback, |p| p.line() as usize)
        };
        let names: Vec<String> = header.iter().map(str::to_string).collect();
        if names.first().map(String::as_str) != Some("t_s") {
            return Err(fail(1, "first column must be `t_s`".into()));
        }
        if names.len() < 2 {
            return Err(fail(1, "at least one value column is required".into()));
        }
        let names = names[1..].to_vec();

        let mut t = Vec::new();
        let mut columns = vec![Vec::new(); names.len()];
        for (k, rec) in rows.enumerate() {
            let rec = rec?;
            let line = line_of(&rec, k + 2);
            if rec.iter().all(str::is_empty) {
                continue;
            }
            if rec.len() != names.len() + 1 {
                return Err(fail(
                    line,
                    format!("expected {} fields, found {}", names.len() + 1, rec.len()),
                ));
            }
            let mut cells = rec.iter().map(|cell| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| fail(line, format!("not a number: `{cell}`")))
            });
            let ts = cells.next().expect("length checked")?;
            if let Some(&last) = t.last() {
                if ts <= last {
                    return Err(fail(line, format!("timestamp {ts} does not increase")));
                }
            }
            t.push(ts);
            for (col, cell) in columns.iter_mut().zip(cells) {
                col.push(cell?);
            }
        }
        if t.is_empty() {
            return Err(fail(2, "no data rows".into()));
        }
        Ok(RawTrace { names, t, columns })
    }

    /// Selects columns by name; `None` keeps them all.
    pub fn select(&self, wanted: Option<&[String]>, origin: &Path) -> Result<Vec<&[f64]>> {
        match wanted {
            None => Ok(self.columns.iter().map(Vec::as_slice).collect()),
            Some(names) => names
                .iter()
                .map(|n| {
                    self.names
                        .iter()
                        .position(|h| h == n)
                        .map(|c| self.columns[c].as_slice())
                        .ok_or_else(|| Error::Parse {
                            path: origin.to_path_buf(),
                            line: 1,
                            message: format!("no column named `{n}`"),
                        })
                })
                .collect(),
        }
    }
}

/// Linearly interpolates `(t, x)` onto `t[0], t[0] + dt, …` up to the last
/// timestamp.
pub fn resample(t: &[f64], x: &[f64], dt: f64) -> Vec<f64> {
    debug_assert_eq!(t.len(), x.len());
    if t.is_empty() {
        return Vec::new();
    }
    let span = t[t.len() - 1] - t[0];
    // tolerate rounding in the timestamps
    let n = (span / dt + 1e-9).floor() as usize + 1;
    let mut out = Vec::with_capacity(n);
    let mut j = 0;
    for k in 0..n {
        let tk = t[0] + k as f64 * dt;
        while j + 2 < t.len() && t[j + 1] < tk {
            j += 1;
        }
        if j + 1 >= t.len() {
            out.push(x[j]);
            continue;
        }
        let (t0, t1) = (t[j], t[j + 1]);
        let w = ((tk - t0) / (t1 - t0)).clamp(0.0, 1.0);
        out.push(x[j] + w * (x[j + 1] - x[j]));
    }
    out
}

/// Per-turbine wind speed series resampled to `dt`. A single selected
/// column is shared by all `turbines`; otherwise one column per turbine is
/// required.
pub fn load_wind_series(
    path: &Path,
    columns: Option<&[String]>,
    dt: f64,
    turbines: usize,
) -> Result<Vec<Vec<f64>>> {
    let raw = RawTrace::read(path)?;
    let cols = raw.select(columns, path)?;
    let series: Vec<Vec<f64>> = cols.iter().map(|c| resample(&raw.t, c, dt)).collect();
    match series.len() {
        1 => Ok(vec![series[0].clone(); turbines]),
        n if n == turbines => Ok(series),
        n => Err(Error::Config(format!(
            "{}: {n} wind columns for {turbines} turbines",
            path.display()
        ))),
    }
}

/// Imbalance series (MW) from a single-column trace resampled to `dt`.
pub fn load_imbalance_series(path: &Path, columns: Option<&[String]>, dt: f64) -> Result<Vec<f64>> {
    let raw = RawTrace::read(path)?;
    let cols = raw.select(columns, path)?;
    if cols.len() != 1 {
        return Err(Error::Config(format!(
            "{}: imbalance trace needs exactly one value column",
            path.display()
        )));
    }
    Ok(resample(&raw.t, cols[0], dt))
}
