//! Report and series files. Every file is written to a temporary name and
//! renamed into place.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use super::report::{Report, SeriesTable};
use crate::error::{Error, Result};

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn csv_bytes(header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(io_err)?;
    for row in rows {
        w.write_record(row.iter().map(|v| format!("{v:.16e}"))).map_err(io_err)?;
    }
    w.into_inner().map_err(io_err)
}

/// Writes `header` and `rows` as CSV at `path`.
pub fn write_rows(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    write_atomic(path, &csv_bytes(&header, rows.iter().cloned())?)
}

pub fn series_csv(table: &SeriesTable) -> Result<Vec<u8>> {
    let rows = (0..table.t.len()).map(|i| {
        let mut row = vec![table.t[i]];
        row.extend(table.columns.iter().map(|c| c[i]));
        row
    });
    csv_bytes(&table.header(), rows)
}

/// Reads a `t,value,...` table back. Empty cells and `NaN` become NaN.
pub fn read_series(path: &Path) -> Result<SeriesTable> {
    let mut r = csv::Reader::from_path(path).map_err(io_err)?;
    let width = r.headers().map_err(io_err)?.len();
    if width < 2 {
        return Err(Error::Io(format!("{}: expected at least two columns", path.display())));
    }
    let mut table = SeriesTable::new(width - 1);
    for rec in r.records() {
        let rec = rec.map_err(io_err)?;
        let vals = rec
            .iter()
            .map(|c| if c.is_empty() { Ok(f64::NAN) } else { c.trim().parse::<f64>() })
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(io_err)?;
        table.push(vals[0], &vals[1..]);
    }
    Ok(table)
}

#[derive(Serialize)]
struct Meta<'a> {
    id: &'a str,
    written_unix_seconds: u64,
    crate_version: &'static str,
}

/// Paths produced by [`write_report`].
#[derive(Debug, Clone)]
pub struct Written {
    pub report: PathBuf,
    pub series: Option<PathBuf>,
    pub meta: PathBuf,
}

/// Writes `<id>_series.csv`, `<id>_report.json` and `<id>_meta.json` into `dir`.
///
/// The report itself holds no timestamp, so reruns reproduce it byte for byte.
pub fn write_report(dir: &Path, report: &Report) -> Result<Written> {
    fs::create_dir_all(dir)?;
    let mut report = report.clone();
    let series = if report.series.t.is_empty() {
        None
    } else {
        let name = format!("{}_series.csv", report.id);
        let path = dir.join(&name);
        write_atomic(&path, &series_csv(&report.series)?)?;
        report.series_file = Some(name);
        Some(path)
    };
    let path = dir.join(format!("{}_report.json", report.id));
    let mut json = serde_json::to_vec_pretty(&report).map_err(io_err)?;
    json.push(b'\n');
    write_atomic(&path, &json)?;
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let meta = dir.join(format!("{}_meta.json", report.id));
    let body = Meta { id: &report.id, written_unix_seconds: secs, crate_version: env!("CARGO_PKG_VERSION") };
    write_atomic(&meta, &serde_json::to_vec_pretty(&body).map_err(io_err)?)?;
    Ok(Written { report: path, series, meta })
}

/// Reads a report and its series and re-evaluates the verdict from the CSV.
pub fn reload_report(path: &Path) -> Result<(Report, SeriesTable)> {
    let text = fs::read_to_string(path)?;
    let report: Report = serde_json::from_str(&text).map_err(io_err)?;
    let table = match &report.series_file {
        Some(name) => read_series(&path.parent().unwrap_or(Path::new(".")).join(name))?,
        None => SeriesTable::default(),
    };
    Ok((report, table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::report::{Rule, Verdict};

    fn scratch(name: &str) -> PathBuf {
        let d = std::env::temp_dir().join(format!("shl-io-{}-{name}", std::process::id()));
        let _ = fs::remove_dir_all(&d);
        d
    }

    #[test]
    fn round_trip_recomputes_verdict() {
        let dir = scratch("rt");
        let mut table = SeriesTable::new(2);
        for t in crate::harness::fit::log_times(10.0, 1e4, 12) {
            table.push(t, &[t.powf(-2.5), f64::NAN]);
        }
        let r = Report::new("demo", "demo")
            .with_series(&["sup", "unused"], table)
            .rule("slope", Rule::Slope { column: 0, window: (10.0, 1e4), target: -2.5, rel_tol: 0.1, max_rms: 0.1 })
            .finish();
        assert_eq!(r.verdict, Verdict::Pass);
        let w = write_report(&dir, &r).unwrap();
        let (back, t) = reload_report(&w.report).unwrap();
        assert_eq!(back.recompute(&t), Verdict::Pass);
        assert_eq!(t.t.len(), 12);
        assert!((t.columns[0][3] - r.series.columns[0][3]).abs() <= 1e-15 * r.series.columns[0][3]);
        assert!(t.columns[1][0].is_nan());
        let head = fs::read_to_string(w.series.unwrap()).unwrap();
        assert!(head.starts_with("t,value,value2\n"));
        // no stray temporary files
        assert!(fs::read_dir(&dir).unwrap().all(|e| !e.unwrap().file_name().to_string_lossy().ends_with(".tmp")));
        fs::remove_dir_all(&dir).unwrap();
    }
}
