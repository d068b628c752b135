//! Experiment orchestration and output: spec files in, CSV table, JSON
//! summary and SVG charts out.

pub mod csv;
mod experiment;
pub mod json;
pub mod spec;
pub mod svg;

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub use experiment::{
    curves_from_rows, run_experiment, CurveSet, ExperimentResults, ResultRow, Summary, WorkloadKey,
    WorstCase,
};
pub use json::JsonReport;
pub use spec::{Backend, ExperimentSpec, HwSpec, InterferenceSpec};

pub const CSV_FILE: &str = "results.csv";
pub const JSON_FILE: &str = "results.json";

/// Writes `results.csv`, `results.json` and the charts into `dir`, creating it
/// if needed. Returns every path written.
pub fn write_outputs(spec: &ExperimentSpec, results: &ExperimentResults, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(CSV_FILE);
    csv::write_file(&csv_path, &results.rows)?;
    let json_path = dir.join(JSON_FILE);
    JsonReport::new(spec, results).write(&json_path)?;
    let mut written = vec![csv_path, json_path];
    written.extend(svg::write_charts(&results.curves, dir)?);
    Ok(written)
}

/// Redraws the charts from a results CSV.
///
/// Without an explicit baseline, the first READ_MISS task in the file is used,
/// which matches the default of the run that wrote it.
pub fn plot_csv(csv_path: &Path, dir: &Path, baseline: Option<WorkloadKey>) -> Result<Vec<PathBuf>> {
    let rows = csv::read_file(csv_path)?;
    if rows.is_empty() {
        return Err(Error::NothingToPlot(format!("{} has no rows", csv_path.display())));
    }
    let baseline = baseline
        .or_else(|| {
            rows.iter()
                .find(|r| r.task.pattern == crate::workload::TrafficPattern::ReadMiss)
                .map(|r| r.task)
        })
        .unwrap_or(rows[0].task);
    let curves = curves_from_rows(&rows, baseline)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    svg::write_charts(&curves, dir)
}
