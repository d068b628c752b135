use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::RegionClass;
use crate::error::{Error, Result};
use crate::hw::MeasuredReport;
use crate::report::experiment::{ExperimentResults, Summary, WorkloadKey};
use crate::report::spec::{Backend, ExperimentSpec};
use crate::sim::PlatformConfig;

/// `[thr_pct, value]` pairs.
pub type Series = Vec<(u32, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonCurve {
    pub task: WorkloadKey,
    pub is_baseline: bool,
    pub region: RegionClass,
    pub slowdown: Series,
    pub rf: Option<Series>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonGroup {
    pub interference: WorkloadKey,
    pub curves: Vec<JsonCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonReport {
    pub name: String,
    pub backend: Backend,
    pub seed: u64,
    pub thr_grid: Vec<u32>,
    pub baseline: WorkloadKey,
    /// Simulator parameters; absent for hardware runs.
    pub platform: Option<PlatformConfig>,
    pub interference_count: usize,
    pub groups: Vec<JsonGroup>,
    pub summary: Summary,
    /// Set when hardware counters were unavailable and RF is missing.
    pub degraded: Option<String>,
    pub measurements: Vec<MeasuredReport>,
}

impl JsonReport {
    pub fn new(spec: &ExperimentSpec, results: &ExperimentResults) -> Self {
        let mut groups: Vec<JsonGroup> = Vec::new();
        for c in &results.curves {
            let curve = JsonCurve {
                task: c.task,
                is_baseline: c.is_baseline,
                region: c.region,
                slowdown: c.slowdown.points.iter().map(|p| (p.thr_pct, p.value)).collect(),
                rf: c
                    .rf
                    .as_ref()
                    .map(|rf| rf.points.iter().map(|p| (p.thr_pct, p.value)).collect()),
            };
            match groups.iter_mut().find(|g| g.interference == c.interference) {
                Some(g) => g.curves.push(curve),
                None => groups.push(JsonGroup {
                    interference: c.interference,
                    curves: vec![curve],
                }),
            }
        }
        let interference_count = match results.backend {
            Backend::Sim => spec.interference_count,
            Backend::Hw => spec.hw.assignment.interference_cores.len(),
        };
        JsonReport {
            name: results.name.clone(),
            backend: results.backend,
            seed: results.seed,
            thr_grid: results.thr_grid.clone(),
            baseline: results.baseline,
            platform: (results.backend == Backend::Sim).then_some(spec.platform),
            interference_count,
            groups,
            summary: results.summary.clone(),
            degraded: (!results.degraded.is_empty()).then(|| results.degraded.join("; ")),
            measurements: results.measurements.clone(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(f), self)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
    }
}
