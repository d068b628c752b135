use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    classify_region, rf_metric, slowdown, CurvePoint, InterferenceCurve, MetricKind, Observables,
    RegionClass,
};
use crate::error::{Error, Result};
use crate::hw::{run_measured, MeasuredReport, RunOptions};
use crate::report::spec::{format_size, Backend, ExperimentSpec};
use crate::sim::co_run;
use crate::workload::{TrafficPattern, WorkloadConfig};

/// A workload as it appears in result rows: pattern plus footprint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WorkloadKey {
    pub pattern: TrafficPattern,
    pub fp_bytes: u64,
}

impl WorkloadKey {
    pub fn of(w: &WorkloadConfig) -> Self {
        WorkloadKey {
            pattern: w.pattern,
            fp_bytes: w.footprint_bytes,
        }
    }

    /// Compact form used in labels and file names, e.g. `READ_MISS_512KB`.
    pub fn slug(&self) -> String {
        format!("{}_{}", self.pattern, format_size(self.fp_bytes))
    }
}

impl fmt::Display for WorkloadKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.pattern, format_size(self.fp_bytes))
    }
}

impl std::str::FromStr for WorkloadKey {
    type Err = String;

    /// Accepts `PATTERN:SIZE`, e.g. `READ_MISS:2MB`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (p, fp) = s
            .split_once(':')
            .ok_or_else(|| format!("expected PATTERN:SIZE, got `{s}`"))?;
        Ok(WorkloadKey {
            pattern: p.parse()?,
            fp_bytes: crate::report::spec::parse_size(fp)
                .ok_or_else(|| format!("cannot parse size `{fp}`"))?,
        })
    }
}

/// One CSV row: the task under test against one interference configuration
/// at one THR%.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub backend: Backend,
    pub task: WorkloadKey,
    pub interference: WorkloadKey,
    pub thr_pct: u32,
    /// Cycles on the simulator, seconds on hardware.
    pub elapsed: f64,
    pub mem_accesses: u64,
    /// Missing when hardware counters were unavailable.
    pub llc_refills: Option<u64>,
    pub slowdown: f64,
    /// Missing when refills are unknown or the metric is undefined.
    pub rf: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSet {
    pub task: WorkloadKey,
    pub interference: WorkloadKey,
    pub is_baseline: bool,
    pub slowdown: InterferenceCurve,
    pub rf: Option<InterferenceCurve>,
    /// Slowdown region against the baseline task under the same interference.
    pub region: RegionClass,
}

/// The cell with the largest slowdown.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    pub task: WorkloadKey,
    pub interference: WorkloadKey,
    pub thr_pct: u32,
    pub slowdown: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub worst: WorstCase,
    /// Peak slowdown of the baseline task under READ_MISS interference: what a
    /// READ_MISS-only characterization would report.
    pub read_miss_reference: Option<f64>,
    /// `worst.slowdown / read_miss_reference`.
    pub underestimation_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub name: String,
    pub backend: Backend,
    pub seed: u64,
    pub thr_grid: Vec<u32>,
    pub baseline: WorkloadKey,
    /// Ordered by task, then interference, then THR% ascending.
    pub rows: Vec<ResultRow>,
    pub curves: Vec<CurveSet>,
    pub summary: Summary,
    /// Reasons hardware runs fell back to timing only, deduplicated.
    pub degraded: Vec<String>,
    /// Full hardware measurements, parallel to `rows`; empty on the simulator.
    pub measurements: Vec<MeasuredReport>,
}

struct CellObs {
    elapsed: f64,
    mem_accesses: u64,
    llc_refills: Option<u64>,
}

impl<T: Observables> From<&T> for CellObs {
    fn from(r: &T) -> Self {
        CellObs {
            elapsed: r.elapsed(),
            mem_accesses: r.mem_accesses(),
            llc_refills: Some(r.llc_refills()),
        }
    }
}

fn cells(spec: &ExperimentSpec) -> Vec<(usize, usize, u32)> {
    let mut out = Vec::new();
    for t in 0..spec.tasks.len() {
        for i in 0..spec.interference.len() {
            for &thr in &spec.thr_grid {
                out.push((t, i, thr));
            }
        }
    }
    out
}

fn interference_workload(spec: &ExperimentSpec, i: usize, thr: u32) -> WorkloadConfig {
    spec.interference[i].workload(spec.platform.cache.line_bytes, thr)
}

/// Runs every (task, interference, THR%) cell of the matrix.
///
/// Simulator cells run in parallel and are merged back in matrix order, so
/// output is identical for any thread count. Hardware cells run one at a
/// time.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResults> {
    spec.validate()?;
    let cells = cells(spec);
    let mut degraded = Vec::new();
    let mut measurements = Vec::new();
    let observed: Vec<CellObs> = match spec.backend {
        Backend::Sim => cells
            .par_iter()
            .map(|&(t, i, thr)| {
                let interf = interference_workload(spec, i, thr);
                let report = co_run(
                    &spec.platform,
                    &spec.tasks[t],
                    Some(&interf),
                    spec.interference_count,
                    &spec.extra_initiators,
                    spec.seed,
                )?;
                Ok(CellObs::from(report.task()))
            })
            .collect::<Result<_>>()?,
        Backend::Hw => {
            let options = RunOptions {
                warmup_runs: spec.hw.warmup_runs,
                repetitions: spec.hw.repetitions,
                seed: spec.seed,
                ..RunOptions::default()
            };
            let mut out = Vec::with_capacity(cells.len());
            for &(t, i, thr) in &cells {
                let interf = interference_workload(spec, i, thr);
                let m = run_measured(
                    &spec.hw.assignment,
                    &spec.tasks[t],
                    &interf,
                    &spec.hw.counters,
                    &options,
                )?;
                if let Some(reason) = &m.degraded {
                    if !degraded.contains(reason) {
                        degraded.push(reason.clone());
                    }
                }
                let mut obs = CellObs::from(&m);
                if !m.counters_available {
                    obs.llc_refills = None;
                }
                out.push(obs);
                measurements.push(m);
            }
            out
        }
    };

    let mut rows = Vec::with_capacity(cells.len());
    for (group_cells, group_obs) in cells
        .chunks(spec.thr_grid.len())
        .zip(observed.chunks(spec.thr_grid.len()))
    {
        let (t, i, _) = group_cells[0];
        let base = &group_obs[0];
        for (&(_, _, thr), obs) in group_cells.iter().zip(group_obs) {
            let rf = match (obs.llc_refills, base.llc_refills) {
                (Some(r), Some(r0)) => rf_metric(r, r0, obs.mem_accesses).ok(),
                _ => None,
            };
            rows.push(ResultRow {
                backend: spec.backend,
                task: WorkloadKey::of(&spec.tasks[t]),
                interference: WorkloadKey::of(&interference_workload(spec, i, thr)),
                thr_pct: thr,
                elapsed: obs.elapsed,
                mem_accesses: obs.mem_accesses,
                llc_refills: obs.llc_refills,
                slowdown: slowdown(obs.elapsed, base.elapsed)?,
                rf,
            });
        }
    }

    let baseline = WorkloadKey::of(&spec.tasks[spec.baseline_task]);
    let curves = curves_from_rows(&rows, baseline)?;
    let summary = summarize(&rows, &curves, baseline)?;
    Ok(ExperimentResults {
        name: spec.name.clone(),
        backend: spec.backend,
        seed: spec.seed,
        thr_grid: spec.thr_grid.clone(),
        baseline,
        rows,
        curves,
        summary,
        degraded,
        measurements,
    })
}

/// Groups rows into per-(task, interference) curves and classifies each
/// slowdown curve against the baseline task under the same interference.
///
/// Groups keep the order in which they first appear in `rows`.
pub fn curves_from_rows(rows: &[ResultRow], baseline: WorkloadKey) -> Result<Vec<CurveSet>> {
    let mut order: Vec<(WorkloadKey, WorkloadKey)> = Vec::new();
    let mut groups: BTreeMap<(WorkloadKey, WorkloadKey), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        let key = (r.task, r.interference);
        let g = groups.entry(key).or_default();
        if g.is_empty() {
            order.push(key);
        }
        g.push(r);
    }

    let mut built: BTreeMap<(WorkloadKey, WorkloadKey), (InterferenceCurve, Option<InterferenceCurve>)> =
        BTreeMap::new();
    for (&key, g) in &groups {
        let slow = InterferenceCurve::from_unsorted(
            MetricKind::Slowdown,
            g.iter()
                .map(|r| CurvePoint {
                    thr_pct: r.thr_pct,
                    value: r.slowdown,
                })
                .collect(),
        )?;
        let rf_points: Option<Vec<CurvePoint>> = g
            .iter()
            .map(|r| {
                r.rf.map(|value| CurvePoint {
                    thr_pct: r.thr_pct,
                    value,
                })
            })
            .collect();
        let rf = rf_points
            .map(|p| InterferenceCurve::from_unsorted(MetricKind::Rf, p))
            .transpose()?;
        built.insert(key, (slow, rf));
    }

    order
        .into_iter()
        .map(|(task, interference)| {
            let (slow, rf) = built[&(task, interference)].clone();
            let (base, _) = built.get(&(baseline, interference)).ok_or_else(|| {
                Error::NothingToPlot(format!(
                    "no baseline curve for {baseline} under {interference}"
                ))
            })?;
            let region = classify_region(&slow, base)?;
            Ok(CurveSet {
                task,
                interference,
                is_baseline: task == baseline,
                slowdown: slow,
                rf,
                region,
            })
        })
        .collect()
}

fn summarize(rows: &[ResultRow], curves: &[CurveSet], baseline: WorkloadKey) -> Result<Summary> {
    let worst = rows
        .iter()
        .max_by(|a, b| a.slowdown.total_cmp(&b.slowdown))
        .map(|r| WorstCase {
            task: r.task,
            interference: r.interference,
            thr_pct: r.thr_pct,
            slowdown: r.slowdown,
        })
        .ok_or_else(|| Error::NothingToPlot("experiment produced no rows".into()))?;
    let read_miss_reference = curves
        .iter()
        .find(|c| c.task == baseline && c.interference.pattern == TrafficPattern::ReadMiss)
        .and_then(|c| c.slowdown.max_value());
    Ok(Summary {
        worst,
        read_miss_reference,
        underestimation_ratio: read_miss_reference.map(|r| worst.slowdown / r),
    })
}
