//! Discrete-event co-run of N initiators over the shared LLC and DRAM controller.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::cache::{CacheOutcome, CacheState};
use crate::sim::config::PlatformConfig;
use crate::sim::dram::DramController;
use crate::workload::{
    AccessGenerator, AccessKind, DutyCycle, Role, Slot, TrafficPattern, WorkloadConfig,
};

/// Observables of one initiator over a run.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InitiatorReport {
    pub role: Role,
    pub pattern: TrafficPattern,
    pub elapsed_cycles: u64,
    pub mem_accesses: u64,
    pub llc_hits: u64,
    pub llc_refills: u64,
    pub reads: u64,
    pub writes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RunReport {
    pub task_index: usize,
    pub initiators: Vec<InitiatorReport>,
}

impl RunReport {
    pub fn task(&self) -> &InitiatorReport {
        &self.initiators[self.task_index]
    }
}

/// Per-initiator seed for pointer-chase permutations.
fn initiator_seed(seed: u64, initiator_id: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ (initiator_id as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Initiator {
    generator: AccessGenerator,
    duty: DutyCycle,
    /// Cycle of the next issue opportunity; `None` while blocked on DRAM.
    ready_at: Option<u64>,
    completed: u64,
    stats: InitiatorReport,
}

/// Runs the workloads together until the task under test has completed
/// `total_accesses` accesses.
///
/// Initiator `i` is `workloads[i]`. Each initiator keeps at most one access
/// outstanding, walks its throttle duty cycle one issue slot at a time, and
/// starts its stream `i` accesses in so that identical generators are not
/// phase-locked. Idle slots cost `hit_cost` cycles each.
pub fn simulate(
    platform: &PlatformConfig,
    workloads: &[WorkloadConfig],
    seed: u64,
) -> Result<RunReport> {
    if workloads.is_empty() {
        return Err(Error::NoWorkloads);
    }
    platform.validate()?;
    let tasks: Vec<usize> = workloads
        .iter()
        .enumerate()
        .filter(|(_, w)| w.role == Role::TaskUnderTest)
        .map(|(i, _)| i)
        .collect();
    if tasks.len() != 1 {
        return Err(Error::TaskUnderTestCount(tasks.len()));
    }
    if workloads.len() != platform.initiator_count {
        return Err(Error::InitiatorCountMismatch {
            expected: platform.initiator_count,
            actual: workloads.len(),
        });
    }
    let task_index = tasks[0];
    for w in workloads {
        w.validate()?;
        if w.line_bytes != platform.cache.line_bytes {
            return Err(Error::InvalidWorkload(format!(
                "workload line size {} differs from the cache line size {}",
                w.line_bytes, platform.cache.line_bytes
            )));
        }
    }

    let mut cache = CacheState::new(platform.cache)?;
    let mut dram = DramController::new(platform.dram, workloads.len());
    let hit_cost = platform.hit_cost;

    let mut initiators = workloads
        .iter()
        .enumerate()
        .map(|(id, w)| {
            let mut generator = AccessGenerator::new(w, id, initiator_seed(seed, id))?;
            generator.advance(id as u64);
            Ok(Initiator {
                generator,
                duty: DutyCycle::new(w.throttle_pct, platform.epoch_len)?,
                ready_at: Some(0),
                completed: 0,
                stats: InitiatorReport {
                    role: w.role,
                    pattern: w.pattern,
                    elapsed_cycles: 0,
                    mem_accesses: 0,
                    llc_hits: 0,
                    llc_refills: 0,
                    reads: 0,
                    writes: 0,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let task_total = workloads[task_index].total_accesses;

    let end = loop {
        let next_issue = initiators
            .iter()
            .enumerate()
            .filter_map(|(id, ini)| ini.ready_at.map(|t| (t, id)))
            .min();
        let next_dispatch = dram.next_dispatch_time();

        let issue_first = match (next_issue, next_dispatch) {
            (Some((t, _)), Some(d)) => t <= d,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => unreachable!("every initiator blocked with an empty DRAM queue"),
        };

        if issue_first {
            let (now, id) = next_issue.unwrap();
            let ini = &mut initiators[id];
            match ini.duty.next_slot() {
                Slot::Idle(slots) => ini.ready_at = Some(now + slots * hit_cost),
                Slot::Active => {
                    let access = ini.generator.next_access();
                    ini.stats.mem_accesses += 1;
                    match access.kind {
                        AccessKind::Read => ini.stats.reads += 1,
                        AccessKind::Write => ini.stats.writes += 1,
                    }
                    match cache.access(&access) {
                        CacheOutcome::Hit => {
                            ini.stats.llc_hits += 1;
                            ini.completed += 1;
                            let done_at = now + hit_cost;
                            ini.ready_at = Some(done_at);
                            if id == task_index && ini.completed == task_total {
                                break done_at;
                            }
                        }
                        CacheOutcome::Miss { .. } => {
                            ini.stats.llc_refills += 1;
                            ini.ready_at = None;
                            dram.enqueue(id, access.kind, now + hit_cost);
                        }
                    }
                }
            }
        } else {
            let done = dram.dispatch().expect("dispatch time implies a pending request");
            let ini = &mut initiators[done.initiator_id];
            ini.completed += 1;
            ini.ready_at = Some(done.completion);
            if done.initiator_id == task_index && ini.completed == task_total {
                break done.completion;
            }
        }
    };

    let initiators = initiators
        .into_iter()
        .map(|mut ini| {
            ini.stats.elapsed_cycles = end;
            ini.stats
        })
        .collect();
    Ok(RunReport {
        task_index,
        initiators,
    })
}

/// Convenience for the common topology: one task under test plus identical
/// interference generators, followed by any extra fixed-rate initiators.
pub fn co_run(
    platform: &PlatformConfig,
    task: &WorkloadConfig,
    interference: Option<&WorkloadConfig>,
    interference_count: usize,
    extra: &[WorkloadConfig],
    seed: u64,
) -> Result<RunReport> {
    let mut workloads = Vec::with_capacity(1 + interference_count + extra.len());
    workloads.push(task.clone());
    if let Some(interf) = interference {
        workloads.extend(std::iter::repeat_n(interf.clone(), interference_count));
    }
    workloads.extend(extra.iter().cloned());
    let platform = PlatformConfig {
        initiator_count: workloads.len(),
        ..*platform
    };
    simulate(&platform, &workloads, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::Preset;

    const KB: u64 = 1024;

    fn platform(n: usize) -> PlatformConfig {
        Preset::Tx2Like.platform(n)
    }

    #[test]
    fn rejects_malformed_runs() {
        let p = platform(1);
        assert!(matches!(simulate(&p, &[], 0), Err(Error::NoWorkloads)));
        let i = WorkloadConfig::interference(TrafficPattern::ReadMiss, 4 * KB, 50);
        assert!(matches!(
            simulate(&p, std::slice::from_ref(&i), 0),
            Err(Error::TaskUnderTestCount(0))
        ));
        let t = WorkloadConfig::task(TrafficPattern::ReadMiss, 4 * KB);
        assert!(matches!(
            simulate(&platform(2), &[t.clone(), t.clone()], 0),
            Err(Error::TaskUnderTestCount(2))
        ));
        assert!(matches!(
            simulate(&p, &[t.clone(), i], 0),
            Err(Error::InitiatorCountMismatch { .. })
        ));
        let t128 = t.with_line_bytes(128);
        assert!(simulate(&p, &[t128], 0).is_err());
    }

    #[test]
    fn solo_task_fitting_in_cache_only_cold_misses() {
        let t = WorkloadConfig::task(TrafficPattern::ReadMiss, 512 * KB).with_sweeps(10);
        let r = simulate(&platform(1), &[t], 3).unwrap();
        let task = r.task();
        assert_eq!(task.llc_refills, 8192);
        assert_eq!(task.mem_accesses, 81920);
        // cold misses are uncontended reads; the rest are hits
        assert_eq!(task.elapsed_cycles, 8192 * (10 + 40) + (81920 - 8192) * 10);
    }

    #[test]
    fn solo_streaming_task_always_misses() {
        let t = WorkloadConfig::task(TrafficPattern::Memcpy, 2048 * KB).with_sweeps(3);
        let r = simulate(&platform(1), &[t], 3).unwrap();
        let task = r.task();
        assert_eq!(task.llc_refills, task.mem_accesses);
        assert_eq!(task.reads, task.writes);
    }

    #[test]
    fn idle_interferers_do_not_disturb_task() {
        let t = WorkloadConfig::task(TrafficPattern::ReadMiss, 256 * KB);
        let solo = simulate(&platform(1), std::slice::from_ref(&t), 9).unwrap();
        let i = WorkloadConfig::interference(TrafficPattern::Memset, 512 * KB, 0);
        let r = co_run(&platform(1), &t, Some(&i), 3, &[], 9).unwrap();
        assert_eq!(r.task(), solo.task());
        for other in &r.initiators[1..] {
            assert_eq!(other.mem_accesses, 0);
        }
    }

    #[test]
    fn interference_slows_task() {
        let t = WorkloadConfig::task(TrafficPattern::ReadMiss, 2048 * KB).with_sweeps(2);
        let i = WorkloadConfig::interference(TrafficPattern::ReadMiss, 512 * KB, 100);
        let solo = co_run(&platform(1), &t, None, 0, &[], 1).unwrap();
        let r = co_run(&platform(1), &t, Some(&i), 3, &[], 1).unwrap();
        assert!(r.task().elapsed_cycles > solo.task().elapsed_cycles);
        assert_eq!(r.task().mem_accesses, t.total_accesses);
    }
}
