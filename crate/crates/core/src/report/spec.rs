//! Experiment spec files.
//!
//! A spec is a TOML document of flat sections with dotted keys:
//!
//! ```toml
//! name = "zu9eg-like"
//! backend = "sim"              # or "hw"
//! seed = 1
//! output_dir = "results/zu9eg"
//! thr_grid = [0, 20, 40, 60, 80, 100]
//!
//! [platform]
//! preset = "zu9eg-like"        # optional starting point
//! cache.capacity_bytes = 1048576
//! cache.associativity = 2
//! dram.write_cost = 200
//! interference_count = 3
//!
//! [[task]]
//! pattern = "READ_MISS"
//! fp_bytes = "2MB"
//! sweeps = 8
//!
//! [[interference]]
//! pattern = "MEMSET"
//! fp_bytes = "512KB"
//! ```
//!
//! See the README for every key.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::hw::{CoreAssignment, CounterSpec};
use crate::sim::{Arbitration, PlatformConfig, Preset};
use crate::workload::{
    AccessOrder, TrafficPattern, WorkloadConfig, DEFAULT_LINE_BYTES, DEFAULT_TASK_SWEEPS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Sim,
    Hw,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Sim => "sim",
            Backend::Hw => "hw",
        }
    }
}

impl FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sim" => Ok(Backend::Sim),
            "hw" => Ok(Backend::Hw),
            _ => Err(format!("unknown backend `{s}` (expected sim or hw)")),
        }
    }
}

/// One column of the interference matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InterferenceSpec {
    pub pattern: TrafficPattern,
    pub footprint_bytes: u64,
    pub order: AccessOrder,
}

impl InterferenceSpec {
    pub fn workload(&self, line_bytes: u64, throttle_pct: u32) -> WorkloadConfig {
        WorkloadConfig::interference(self.pattern, self.footprint_bytes, throttle_pct)
            .with_line_bytes(line_bytes)
            .with_order(self.order)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HwSpec {
    pub assignment: CoreAssignment,
    pub counters: CounterSpec,
    pub repetitions: usize,
    pub warmup_runs: usize,
}

impl Default for HwSpec {
    fn default() -> Self {
        let cores = crate::hw::affinity::allowed_cores();
        HwSpec {
            assignment: CoreAssignment {
                task_core: cores.first().copied().unwrap_or(0),
                interference_cores: cores.iter().skip(1).take(3).copied().collect(),
            },
            counters: CounterSpec::for_host(),
            repetitions: 5,
            warmup_runs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub backend: Backend,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub thr_grid: Vec<u32>,
    pub platform: PlatformConfig,
    /// Interference initiators co-running with the task (CPU cores).
    pub interference_count: usize,
    /// Fixed-rate extra initiators (accelerator-style streams), sim only.
    pub extra_initiators: Vec<WorkloadConfig>,
    pub hw: HwSpec,
    pub tasks: Vec<WorkloadConfig>,
    pub interference: Vec<InterferenceSpec>,
    /// Index into `tasks` of the READ_MISS baseline curve.
    pub baseline_task: usize,
}

pub fn default_thr_grid() -> Vec<u32> {
    (0..=100).step_by(10).collect()
}

/// Parses sizes such as `524288`, `"512KB"`, `"2MB"`, `"1MiB"`, `"64B"`.
/// KB/MB/GB are binary multiples.
pub fn parse_size(s: &str) -> Option<u64> {
    let s = s.trim();
    let split = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let n: u64 = num.parse().ok()?;
    let mult = match unit.trim().to_ascii_uppercase().as_str() {
        "" | "B" => 1,
        "K" | "KB" | "KIB" => 1 << 10,
        "M" | "MB" | "MIB" => 1 << 20,
        "G" | "GB" | "GIB" => 1 << 30,
        _ => return None,
    };
    n.checked_mul(mult)
}

/// `524288` → `512KB`, `2097152` → `2MB`.
pub fn format_size(bytes: u64) -> String {
    if bytes >= 1 << 20 && bytes.is_multiple_of(1 << 20) {
        format!("{}MB", bytes >> 20)
    } else if bytes >= 1 << 10 && bytes.is_multiple_of(1 << 10) {
        format!("{}KB", bytes >> 10)
    } else {
        format!("{bytes}B")
    }
}

/// Typed reads from a TOML table that remember the dotted path for errors and
/// reject keys nobody asked for.
struct Section<'a> {
    path: String,
    table: &'a Table,
    seen: BTreeSet<String>,
}

impl<'a> Section<'a> {
    fn new(path: impl Into<String>, table: &'a Table) -> Self {
        Section {
            path: path.into(),
            table,
            seen: BTreeSet::new(),
        }
    }

    fn key_path(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_owned()
        } else if key.is_empty() {
            self.path.clone()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    /// Looks up `a.b.c` through nested tables.
    fn get(&mut self, key: &str) -> Option<&'a Value> {
        let mut parts = key.split('.');
        let first = parts.next()?;
        let mut v = self.table.get(first)?;
        self.seen.insert(first.to_owned());
        for p in parts {
            v = v.as_table()?.get(p)?;
        }
        Some(v)
    }

    fn err(&self, key: &str, msg: impl Into<String>) -> Error {
        Error::spec(self.key_path(key), msg)
    }

    fn u64(&mut self, key: &str) -> Result<Option<u64>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(_) => Err(self.err(key, "expected a non-negative integer")),
        }
    }

    fn size(&mut self, key: &str) -> Result<Option<u64>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i > 0 => Ok(Some(*i as u64)),
            Some(Value::String(s)) => parse_size(s)
                .map(Some)
                .ok_or_else(|| self.err(key, format!("cannot parse size `{s}`"))),
            Some(_) => Err(self.err(key, "expected a positive byte count or a size like \"512KB\"")),
        }
    }

    fn string(&mut self, key: &str) -> Result<Option<&'a str>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.as_str())),
            Some(_) => Err(self.err(key, "expected a string")),
        }
    }

    fn parsed<T: FromStr<Err = String>>(&mut self, key: &str) -> Result<Option<T>> {
        match self.string(key)? {
            None => Ok(None),
            Some(s) => s.parse().map(Some).map_err(|e| self.err(key, e)),
        }
    }

    fn u64_list(&mut self, key: &str) -> Result<Option<Vec<u64>>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::Integer(i) if *i >= 0 => Ok(*i as u64),
                    _ => Err(self.err(key, "expected a list of non-negative integers")),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(_) => Err(self.err(key, "expected a list")),
        }
    }

    fn array_of_tables(&mut self, key: &str) -> Result<Vec<&'a Table>> {
        match self.get(key) {
            None => Ok(Vec::new()),
            Some(Value::Array(items)) => items
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    v.as_table()
                        .ok_or_else(|| self.err(&format!("{key}[{i}]"), "expected a table"))
                })
                .collect(),
            Some(_) => Err(self.err(key, "expected an array of tables ([[...]])")),
        }
    }

    fn table(&mut self, key: &str) -> Result<Option<&'a Table>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Table(t)) => Ok(Some(t)),
            Some(_) => Err(self.err(key, "expected a section")),
        }
    }

    fn finish(self) -> Result<()> {
        match self.table.keys().find(|k| !self.seen.contains(*k)) {
            Some(k) => Err(self.err(k, "unknown key")),
            None => Ok(()),
        }
    }
}

fn parse_workload(
    mut s: Section<'_>,
    line_bytes: u64,
    make: impl Fn(TrafficPattern, u64) -> WorkloadConfig,
) -> Result<WorkloadConfig> {
    let pattern: TrafficPattern = s
        .parsed("pattern")?
        .ok_or_else(|| s.err("pattern", "missing"))?;
    let fp = s
        .size("fp_bytes")?
        .ok_or_else(|| s.err("fp_bytes", "missing"))?;
    let mut w = make(pattern, fp).with_line_bytes(line_bytes);
    if let Some(order) = s.parsed::<AccessOrder>("order")? {
        w = w.with_order(order);
    }
    let sweeps = s.u64("sweeps")?;
    let accesses = s.u64("accesses")?;
    match (sweeps, accesses) {
        (Some(_), Some(_)) => return Err(s.err("accesses", "give either sweeps or accesses, not both")),
        (Some(n), None) => w = w.with_sweeps(n),
        (None, Some(n)) => w = w.with_total_accesses(n),
        (None, None) => {}
    }
    if let Some(thr) = s.u64("thr_pct")? {
        w = w.with_throttle(thr.min(u64::from(u32::MAX)) as u32);
    }
    w.validate().map_err(|e| s.err("", e.to_string()))?;
    s.finish()?;
    Ok(w)
}

impl ExperimentSpec {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let root: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::spec("<file>", e.to_string()))?;
        let mut top = Section::new("", &root);

        let name = top.string("name")?.unwrap_or("experiment").to_owned();
        let backend = top.parsed("backend")?.unwrap_or(Backend::Sim);
        let seed = top.u64("seed")?.unwrap_or(0);
        let output_dir = PathBuf::from(top.string("output_dir")?.unwrap_or("results"));
        let thr_grid = match top.u64_list("thr_grid")? {
            Some(v) => v
                .into_iter()
                .map(|t| u32::try_from(t).map_err(|_| Error::spec("thr_grid", "value too large")))
                .collect::<Result<Vec<_>>>()?,
            None => default_thr_grid(),
        };

        let platform_table = top.table("platform")?;
        let empty = Table::new();
        let mut ps = Section::new("platform", platform_table.unwrap_or(&empty));
        let preset: Preset = ps.parsed("preset")?.unwrap_or(Preset::Zu9egLike);
        let mut platform = preset.platform(1);
        if let Some(v) = ps.u64("cache.capacity_bytes")? {
            platform.cache.capacity_bytes = v;
        }
        if let Some(v) = ps.u64("cache.associativity")? {
            platform.cache.associativity = v;
        }
        if let Some(v) = ps.u64("cache.line_bytes")? {
            platform.cache.line_bytes = v;
        }
        if let Some(v) = ps.u64("dram.read_cost")? {
            platform.dram.read_cost = v;
        }
        if let Some(v) = ps.u64("dram.write_cost")? {
            platform.dram.write_cost = v;
        }
        if let Some(v) = ps.u64("dram.turnaround_penalty")? {
            platform.dram.turnaround_penalty = v;
        }
        if let Some(v) = ps.parsed::<Arbitration>("dram.arbitration")? {
            platform.dram.arbitration = v;
        }
        if let Some(v) = ps.u64("hit_cost")? {
            platform.hit_cost = v;
        }
        if let Some(v) = ps.u64("epoch_len")? {
            platform.epoch_len = v;
        }
        let interference_count = ps.u64("interference_count")?.unwrap_or(3) as usize;
        check_nested(&ps, "cache", &["capacity_bytes", "associativity", "line_bytes"])?;
        check_nested(
            &ps,
            "dram",
            &["read_cost", "write_cost", "turnaround_penalty", "arbitration"],
        )?;
        ps.finish()?;
        platform
            .validate()
            .map_err(|e| Error::spec("platform", e.to_string()))?;
        let line_bytes = if platform.cache.line_bytes > 0 {
            platform.cache.line_bytes
        } else {
            DEFAULT_LINE_BYTES
        };

        let mut hw = HwSpec::default();
        if let Some(t) = top.table("hw")? {
            let mut hs = Section::new("hw", t);
            if let Some(c) = hs.u64("task_core")? {
                hw.assignment.task_core = c as usize;
            }
            if let Some(c) = hs.u64_list("interference_cores")? {
                hw.assignment.interference_cores = c.into_iter().map(|c| c as usize).collect();
            }
            if let Some(e) = hs.string("counters.refill")? {
                hw.counters.refill_event = e.to_owned();
            }
            if let Some(e) = hs.string("counters.access")? {
                hw.counters.access_event = e.to_owned();
            }
            if let Some(e) = hs.string("counters.cycles")? {
                hw.counters.cycles_event = e.to_owned();
            }
            if let Some(n) = hs.u64("repetitions")? {
                hw.repetitions = n as usize;
            }
            if let Some(n) = hs.u64("warmup")? {
                hw.warmup_runs = n as usize;
            }
            check_nested(&hs, "counters", &["refill", "access", "cycles"])?;
            hs.finish()?;
            hw.assignment
                .validate()
                .map_err(|e| Error::spec("hw.interference_cores", e.to_string()))?;
            if hw.repetitions < 5 {
                return Err(Error::spec("hw.repetitions", "must be at least 5"));
            }
            if hw.warmup_runs < 1 {
                return Err(Error::spec("hw.warmup", "must be at least 1"));
            }
        }

        let mut tasks = Vec::new();
        for (i, t) in top.array_of_tables("task")?.into_iter().enumerate() {
            let sec = Section::new(format!("task[{i}]"), t);
            let w = parse_workload(sec, line_bytes, |p, fp| {
                WorkloadConfig::task(p, fp).with_sweeps(DEFAULT_TASK_SWEEPS)
            })?;
            tasks.push(w);
        }
        let mut interference = Vec::new();
        for (i, t) in top.array_of_tables("interference")?.into_iter().enumerate() {
            let mut sec = Section::new(format!("interference[{i}]"), t);
            let pattern: TrafficPattern = sec
                .parsed("pattern")?
                .ok_or_else(|| sec.err("pattern", "missing"))?;
            let footprint_bytes = sec
                .size("fp_bytes")?
                .ok_or_else(|| sec.err("fp_bytes", "missing"))?;
            let order = sec.parsed("order")?.unwrap_or_default();
            sec.finish()?;
            let spec = InterferenceSpec {
                pattern,
                footprint_bytes,
                order,
            };
            spec.workload(line_bytes, 100)
                .validate()
                .map_err(|e| Error::spec(format!("interference[{i}]"), e.to_string()))?;
            interference.push(spec);
        }
        let mut extra_initiators = Vec::new();
        for (i, t) in top.array_of_tables("extra_initiator")?.into_iter().enumerate() {
            let mut sec = Section::new(format!("extra_initiator[{i}]"), t);
            let count = sec.u64("count")?.unwrap_or(1);
            let w = parse_workload(sec, line_bytes, |p, fp| {
                WorkloadConfig::interference(p, fp, 100)
            })?;
            extra_initiators.extend(std::iter::repeat_n(w, count as usize));
        }

        let baseline_task = match top.u64("baseline_task")? {
            Some(i) => i as usize,
            None => tasks
                .iter()
                .position(|t| t.pattern == TrafficPattern::ReadMiss)
                .unwrap_or(0),
        };
        top.finish()?;

        let spec = ExperimentSpec {
            name,
            backend,
            seed,
            output_dir,
            thr_grid,
            platform,
            interference_count,
            extra_initiators,
            hw,
            tasks,
            interference,
            baseline_task,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.thr_grid.first() != Some(&0) {
            return Err(Error::spec("thr_grid", "must start at 0 (the uncontended baseline)"));
        }
        if self.thr_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::spec("thr_grid", "must be strictly increasing"));
        }
        if let Some(t) = self.thr_grid.iter().find(|&&t| t > 100) {
            return Err(Error::spec("thr_grid", format!("{t} is outside [0, 100]")));
        }
        if self.tasks.is_empty() {
            return Err(Error::spec("task", "at least one [[task]] is required"));
        }
        if self.interference.is_empty() {
            return Err(Error::spec("interference", "at least one [[interference]] is required"));
        }
        if self.baseline_task >= self.tasks.len() {
            return Err(Error::spec("baseline_task", "index out of range"));
        }
        let mut keys = BTreeSet::new();
        for (i, t) in self.tasks.iter().enumerate() {
            if !keys.insert((t.pattern, t.footprint_bytes)) {
                return Err(Error::spec(
                    format!("task[{i}]"),
                    "duplicate (pattern, fp_bytes) pair",
                ));
            }
        }
        let mut keys = BTreeSet::new();
        for (i, s) in self.interference.iter().enumerate() {
            if !keys.insert((s.pattern, s.footprint_bytes)) {
                return Err(Error::spec(
                    format!("interference[{i}]"),
                    "duplicate (pattern, fp_bytes) pair",
                ));
            }
        }
        if self.backend == Backend::Hw && !self.extra_initiators.is_empty() {
            return Err(Error::spec(
                "extra_initiator",
                "extra initiators are only modeled by the sim backend",
            ));
        }
        if self.backend == Backend::Sim && self.interference_count == 0 {
            return Err(Error::spec("platform.interference_count", "must be at least 1"));
        }
        Ok(())
    }
}

fn check_nested(section: &Section<'_>, key: &str, allowed: &[&str]) -> Result<()> {
    if let Some(Value::Table(t)) = section.table.get(key) {
        if let Some(k) = t.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(section.err(&format!("{key}.{k}"), "unknown key"));
        }
    }
    Ok(())
}
