//! CSV and JSON writers.
//!
//! CSV files are comma separated with a header row and every number written
//! in scientific notation with 17 significant digits, so values round-trip
//! exactly. JSON keys appear in declaration order.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::fieldsim::Trajectory;
use crate::robustness::{ExperimentReport, TrialResult};
use crate::spectral::SpatialGrid;
use crate::wavelet::ZoomResult;

/// `v` with 17 significant digits.
pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn finish(w: BufWriter<File>) -> Result<()> {
    let file = w.into_inner().map_err(|e| e.into_error())?;
    file.sync_all()?;
    Ok(())
}

/// Write pre-formatted cells under `header`.
pub fn write_records<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = create(path)?;
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        writeln!(w, "{}", row.join(","))?;
    }
    finish(w)
}

/// Write numeric rows under `header`.
pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: AsRef<[f64]>,
{
    let rows = rows
        .into_iter()
        .map(|row| row.as_ref().iter().map(|&v| format_number(v)).collect());
    write_records(path, header, rows)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    finish(w)
}

/// Long-format trajectory: one `t,x,activity` row per grid point and sample.
pub fn write_trajectory_csv(path: &Path, trajectory: &Trajectory) -> Result<()> {
    let rows = trajectory.states.iter().flat_map(|st| {
        let grid = *st.activity.grid();
        st.activity
            .samples()
            .iter()
            .enumerate()
            .map(move |(i, &a)| [st.t, grid.x(i), a])
    });
    write_csv(path, &["t", "x", "activity"], rows)
}

/// `u,s,raw,normalized` rows for each result in turn.
pub fn write_zoom_csv(path: &Path, results: &[ZoomResult]) -> Result<()> {
    let rows = results.iter().flat_map(|r| {
        r.u_grid
            .iter()
            .zip(&r.transform_values)
            .zip(&r.normalized_values)
            .map(move |((&u, &raw), &norm)| [u, r.s, raw, norm])
    });
    write_csv(path, &["u", "s", "raw", "normalized"], rows)
}

/// File name `trial_<scale>_<index>.csv`.
pub fn trial_file_name(s: f64, index: usize) -> String {
    format!("trial_{s}_{index}.csv")
}

/// `x,kernel,response` for one trial. Failed trials produce a header-only file.
pub fn write_trial_csv(dir: &Path, grid: &SpatialGrid, trial: &TrialResult) -> Result<PathBuf> {
    let path = dir.join(trial_file_name(trial.s, trial.index));
    let rows = trial
        .kernel
        .iter()
        .zip(&trial.response)
        .enumerate()
        .map(|(i, (&k, &r))| [grid.x(i), k, r]);
    write_csv(&path, &["x", "kernel", "response"], rows)?;
    Ok(path)
}

/// Per-trial CSV files plus `summary.json`; returns every path written.
pub fn write_experiment(dir: &Path, report: &ExperimentReport) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for run in &report.scales {
        for trial in &run.trials {
            written.push(write_trial_csv(dir, &report.grid, trial)?);
        }
    }
    let summary = dir.join("summary.json");
    write_json(&summary, report)?;
    written.push(summary);
    Ok(written)
}
