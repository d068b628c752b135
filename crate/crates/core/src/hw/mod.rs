//! Real-hardware co-run: task under test pinned to one core, interference
//! generators on the others, per-thread hardware counters around the task.

pub mod affinity;
pub mod native;
pub mod perf;
mod runner;

use serde::{Deserialize, Serialize};

use crate::analysis::Observables;

pub use runner::{calibrate_max_rate, run_measured, RunOptions};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreAssignment {
    pub task_core: usize,
    pub interference_cores: Vec<usize>,
}

impl CoreAssignment {
    pub fn solo(task_core: usize) -> Self {
        CoreAssignment {
            task_core,
            interference_cores: Vec::new(),
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        let mut all = self.interference_cores.clone();
        all.push(self.task_core);
        all.sort_unstable();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(crate::Error::spec(
                "hw.interference_cores",
                "core ids must be distinct and exclude the task core",
            ));
        }
        Ok(())
    }
}

/// Platform event names for the three logical counters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterSpec {
    pub refill_event: String,
    pub access_event: String,
    pub cycles_event: String,
}

impl CounterSpec {
    /// ARM PMU events on aarch64; elsewhere perf's generic LLC miss/reference
    /// events stand in for refills and accesses.
    pub fn for_host() -> Self {
        if cfg!(target_arch = "aarch64") {
            CounterSpec {
                refill_event: "L2D_CACHE_REFILL".into(),
                access_event: "MEM_ACCESS".into(),
                cycles_event: "CPU_CYCLES".into(),
            }
        } else {
            CounterSpec {
                refill_event: "cache-misses".into(),
                access_event: "cache-references".into(),
                cycles_event: "cycles".into(),
            }
        }
    }
}

impl Default for CounterSpec {
    fn default() -> Self {
        Self::for_host()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HostInfo {
    pub arch: String,
    pub core_count: usize,
    pub llc_bytes: Option<u64>,
}

impl HostInfo {
    pub fn detect() -> Self {
        HostInfo {
            arch: std::env::consts::ARCH.to_owned(),
            core_count: std::thread::available_parallelism().map_or(1, |n| n.get()),
            llc_bytes: detect_llc_bytes(),
        }
    }
}

fn parse_cache_size(s: &str) -> Option<u64> {
    let s = s.trim();
    let (num, mult) = match s.chars().last()? {
        'K' | 'k' => (&s[..s.len() - 1], 1 << 10),
        'M' | 'm' => (&s[..s.len() - 1], 1 << 20),
        'G' | 'g' => (&s[..s.len() - 1], 1 << 30),
        _ => (s, 1),
    };
    num.parse::<u64>().ok().map(|n| n * mult)
}

/// Size of the highest-level cache visible to cpu0.
pub fn detect_llc_bytes() -> Option<u64> {
    let dir = std::fs::read_dir("/sys/devices/system/cpu/cpu0/cache").ok()?;
    dir.flatten()
        .filter(|e| e.file_name().to_string_lossy().starts_with("index"))
        .filter_map(|e| {
            let level: u32 = std::fs::read_to_string(e.path().join("level"))
                .ok()?
                .trim()
                .parse()
                .ok()?;
            let size = parse_cache_size(&std::fs::read_to_string(e.path().join("size")).ok()?)?;
            Some((level, size))
        })
        .max()
        .map(|(_, size)| size)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl Spread {
    /// Median is the middle sample (lower middle for even counts).
    pub fn of(values: &[f64]) -> Option<Spread> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Spread {
            min: v[0],
            median: v[(v.len() - 1) / 2],
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub wall_time: f64,
    pub cycles: Option<u64>,
    pub mem_accesses: u64,
    pub llc_refills: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredReport {
    pub host: HostInfo,
    pub counters: CounterSpec,
    pub counters_available: bool,
    /// Why the run fell back to timing only, when it did.
    pub degraded: Option<String>,
    pub warmup_runs: usize,
    pub repetitions: usize,
    pub samples: Vec<Sample>,
    pub wall_time: Spread,
    pub cycles: Option<Spread>,
    pub mem_accesses: Spread,
    pub llc_refills: Option<Spread>,
    /// Logical loads and stores the task performs per repetition.
    pub reads: u64,
    pub writes: u64,
    /// Accesses issued by all interference generators over the whole run.
    pub interference_accesses: u64,
}

impl MeasuredReport {
    pub fn refill_ratio(&self) -> Option<f64> {
        let refills = self.llc_refills?.median;
        Some(refills / self.mem_accesses.median)
    }
}

impl Observables for MeasuredReport {
    fn elapsed(&self) -> f64 {
        self.wall_time.median
    }

    fn mem_accesses(&self) -> u64 {
        self.mem_accesses.median as u64
    }

    fn llc_refills(&self) -> u64 {
        self.llc_refills.map_or(0, |s| s.median as u64)
    }
}
