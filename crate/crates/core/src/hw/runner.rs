use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Barrier, Mutex};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::hw::affinity::{allowed_cores, pin_current_thread};
use crate::hw::native::{AlignedBuffer, HwThrottle, NativeLoop};
use crate::hw::perf::{CounterSet, CounterValues};
use crate::hw::{CoreAssignment, CounterSpec, HostInfo, MeasuredReport, Sample, Spread};
use crate::workload::{AccessKind, AccessGenerator, AccessOrder, TrafficPattern, WorkloadConfig};

const MIN_CALIBRATION: Duration = Duration::from_millis(100);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub warmup_runs: usize,
    pub repetitions: usize,
    pub epoch_target: Duration,
    pub seed: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            warmup_runs: 1,
            repetitions: 5,
            epoch_target: Duration::from_millis(1),
            seed: 0,
        }
    }
}

/// Unthrottled access rate (accesses per second) of a pattern on the calling
/// thread. The measured run is lengthened until it lasts at least 100ms.
pub fn calibrate_max_rate(pattern: TrafficPattern, footprint_bytes: u64, order: AccessOrder) -> Result<f64> {
    let config = WorkloadConfig::interference(pattern, footprint_bytes, 100).with_order(order);
    calibrate_config(&config, 0)
}

fn calibrate_config(config: &WorkloadConfig, seed: u64) -> Result<f64> {
    let mut buf = AlignedBuffer::new(config.footprint_bytes as usize)?;
    let mut nl = NativeLoop::new(config, buf.as_mut_slice(), seed)?;
    let sweep = nl.lines_per_sweep() as u64;
    nl.run(sweep);
    let mut n = sweep.max(1024);
    loop {
        let t = Instant::now();
        nl.run(n);
        let el = t.elapsed();
        if el >= MIN_CALIBRATION {
            return Ok(n as f64 / el.as_secs_f64());
        }
        let scale = (MIN_CALIBRATION.as_secs_f64() * 1.2 / el.as_secs_f64().max(1e-6)).clamp(2.0, 1000.0);
        n = (n as f64 * scale) as u64;
    }
}

fn logical_mix(config: &WorkloadConfig) -> (u64, u64) {
    let mut generator = AccessGenerator::new(config, 0, 0).expect("validated config");
    let sweep = generator.lines_per_sweep();
    let (mut reads, mut writes) = (0, 0);
    for a in generator.by_ref().take(sweep as usize) {
        match a.kind {
            AccessKind::Read => reads += 1,
            AccessKind::Write => writes += 1,
        }
    }
    let sweeps = config.total_accesses / sweep;
    let rest = config.total_accesses % sweep;
    let (mut r, mut w) = (reads * sweeps, writes * sweeps);
    let mut tail = AccessGenerator::new(config, 0, 0).expect("validated config");
    for a in tail.by_ref().take(rest as usize) {
        match a.kind {
            AccessKind::Read => r += 1,
            AccessKind::Write => w += 1,
        }
    }
    (r, w)
}

struct TaskOutcome {
    samples: Vec<Sample>,
    counters_available: bool,
    degraded: Option<String>,
}

/// Co-runs `task` on `assignment.task_core` against copies of `interference`
/// on every interference core.
///
/// Interference generators start before the first warmup run and stop after
/// the last measured repetition. Counters that cannot be opened degrade the
/// run to timing only, flagged in the report; affinity failures abort.
pub fn run_measured(
    assignment: &CoreAssignment,
    task: &WorkloadConfig,
    interference: &WorkloadConfig,
    counters: &CounterSpec,
    options: &RunOptions,
) -> Result<MeasuredReport> {
    assignment.validate()?;
    task.validate()?;
    interference.validate()?;
    if options.repetitions < 5 || options.warmup_runs < 1 {
        return Err(Error::spec(
            "hw.repetitions",
            "need at least 5 repetitions after at least 1 warmup run",
        ));
    }
    let allowed = allowed_cores();
    for &core in std::iter::once(&assignment.task_core).chain(&assignment.interference_cores) {
        if !allowed.contains(&core) {
            return Err(Error::Affinity {
                core,
                source: std::io::Error::other("core not available to this process"),
            });
        }
    }

    let active_interferers: &[usize] = if interference.throttle_pct == 0 {
        &[]
    } else {
        &assignment.interference_cores
    };
    let throttle = match active_interferers.first() {
        Some(&core) => {
            let cfg = interference.clone();
            let rate = std::thread::scope(|s| {
                s.spawn(|| {
                    pin_current_thread(core)?;
                    calibrate_config(&cfg.clone().with_throttle(100), options.seed)
                })
                .join()
                .expect("calibration thread panicked")
            })?;
            Some(HwThrottle::new(interference.throttle_pct, rate, options.epoch_target)?)
        }
        None => None,
    };

    let stop = AtomicBool::new(false);
    let failed = AtomicBool::new(false);
    let first_error: Mutex<Option<Error>> = Mutex::new(None);
    let interference_accesses = AtomicU64::new(0);
    let barrier = Barrier::new(active_interferers.len() + 1);
    let fail = |e: Error| {
        failed.store(true, Ordering::SeqCst);
        first_error.lock().unwrap().get_or_insert(e);
    };

    let outcome = std::thread::scope(|s| {
        for (k, &core) in active_interferers.iter().enumerate() {
            let (stop, barrier, fail, throttle) = (&stop, &barrier, &fail, throttle.unwrap());
            let interference_accesses = &interference_accesses;
            s.spawn(move || {
                let setup = pin_current_thread(core).and_then(|_| {
                    AlignedBuffer::new(interference.footprint_bytes as usize)
                });
                let mut buf = match setup {
                    Ok(buf) => buf,
                    Err(e) => {
                        fail(e);
                        barrier.wait();
                        return;
                    }
                };
                let seed = options.seed.wrapping_add(k as u64 + 1);
                let mut nl = match NativeLoop::new(interference, buf.as_mut_slice(), seed) {
                    Ok(nl) => nl,
                    Err(e) => {
                        fail(e);
                        barrier.wait();
                        return;
                    }
                };
                barrier.wait();
                let done = nl.run_throttled(&throttle, stop, None);
                interference_accesses.fetch_add(done, Ordering::Relaxed);
            });
        }

        let task_thread = s.spawn(|| -> Result<TaskOutcome> {
            let prepared = pin_current_thread(assignment.task_core)
                .and_then(|_| AlignedBuffer::new(task.footprint_bytes as usize));
            let mut buf = match prepared {
                Ok(b) => b,
                Err(e) => {
                    barrier.wait();
                    return Err(e);
                }
            };
            let mut nl = match NativeLoop::new(task, buf.as_mut_slice(), options.seed) {
                Ok(nl) => nl,
                Err(e) => {
                    barrier.wait();
                    return Err(e);
                }
            };
            let (mut set, degraded) = match CounterSet::open(
                &counters.refill_event,
                &counters.access_event,
                &counters.cycles_event,
            ) {
                Ok(set) => (Some(set), None),
                Err(e) => (None, Some(e.to_string())),
            };
            barrier.wait();
            if failed.load(Ordering::SeqCst) {
                return Err(Error::CounterUnavailable("aborted: interference setup failed".into()));
            }
            for _ in 0..options.warmup_runs {
                nl.run(task.total_accesses);
            }
            let mut samples = Vec::with_capacity(options.repetitions);
            for _ in 0..options.repetitions {
                let before = match set.as_mut() {
                    Some(c) => Some(c.read()?),
                    None => None,
                };
                let t = Instant::now();
                nl.run(task.total_accesses);
                let wall = t.elapsed().as_secs_f64();
                let delta = match (set.as_mut(), before) {
                    (Some(c), Some(b)) => Some(c.read()?.delta_since(&b)),
                    _ => None,
                };
                samples.push(sample_from(wall, delta, task.total_accesses));
            }
            Ok(TaskOutcome {
                counters_available: set.is_some(),
                degraded,
                samples,
            })
        });

        let out = task_thread.join().expect("task thread panicked");
        stop.store(true, Ordering::SeqCst);
        out
    });

    if let Some(e) = first_error.into_inner().unwrap() {
        return Err(e);
    }
    let outcome = outcome?;
    let samples = outcome.samples;
    let col = |f: &dyn Fn(&Sample) -> Option<f64>| -> Option<Spread> {
        let v: Option<Vec<f64>> = samples.iter().map(f).collect();
        v.and_then(|v| Spread::of(&v))
    };
    let (reads, writes) = logical_mix(task);
    Ok(MeasuredReport {
        host: HostInfo::detect(),
        counters: counters.clone(),
        counters_available: outcome.counters_available,
        degraded: outcome.degraded,
        warmup_runs: options.warmup_runs,
        repetitions: options.repetitions,
        wall_time: col(&|s| Some(s.wall_time)).expect("at least one sample"),
        cycles: col(&|s| s.cycles.map(|c| c as f64)),
        mem_accesses: col(&|s| Some(s.mem_accesses as f64)).expect("at least one sample"),
        llc_refills: col(&|s| s.llc_refills.map(|c| c as f64)),
        samples,
        reads,
        writes,
        interference_accesses: interference_accesses.into_inner(),
    })
}

fn sample_from(wall_time: f64, delta: Option<CounterValues>, logical_accesses: u64) -> Sample {
    match delta {
        Some(d) => Sample {
            wall_time,
            cycles: Some(d.cycles),
            mem_accesses: d.access,
            llc_refills: Some(d.refill),
        },
        None => Sample {
            wall_time,
            cycles: None,
            mem_accesses: logical_accesses,
            llc_refills: None,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logical_mix_counts_reads_and_writes() {
        let t = WorkloadConfig::task(TrafficPattern::Memcpy, 64 * 8).with_total_accesses(21);
        assert_eq!(logical_mix(&t), (11, 10));
        let t = WorkloadConfig::task(TrafficPattern::Memset, 64 * 8);
        assert_eq!(logical_mix(&t), (0, t.total_accesses));
    }

    #[test]
    fn rejects_too_few_repetitions() {
        let t = WorkloadConfig::task(TrafficPattern::ReadMiss, 4096);
        let i = WorkloadConfig::interference(TrafficPattern::ReadMiss, 4096, 0);
        let opts = RunOptions {
            repetitions: 3,
            ..RunOptions::default()
        };
        assert!(run_measured(&CoreAssignment::solo(0), &t, &i, &CounterSpec::for_host(), &opts).is_err());
    }

    #[test]
    fn unavailable_core_aborts() {
        let t = WorkloadConfig::task(TrafficPattern::ReadMiss, 4096);
        let i = WorkloadConfig::interference(TrafficPattern::ReadMiss, 4096, 50);
        let assignment = CoreAssignment {
            task_core: 0,
            interference_cores: vec![4000],
        };
        let r = run_measured(&assignment, &t, &i, &CounterSpec::for_host(), &RunOptions::default());
        assert!(matches!(r, Err(Error::Affinity { core: 4000, .. })));
    }

    #[test]
    fn bogus_counters_degrade_to_timing_only() {
        let t = WorkloadConfig::task(TrafficPattern::ReadMiss, 64 << 10);
        let i = WorkloadConfig::interference(TrafficPattern::ReadMiss, 64 << 10, 0);
        let spec = CounterSpec {
            refill_event: "bogus".into(),
            access_event: "bogus".into(),
            cycles_event: "bogus".into(),
        };
        let core = allowed_cores()[0];
        let r = run_measured(&CoreAssignment::solo(core), &t, &i, &spec, &RunOptions::default()).unwrap();
        assert!(!r.counters_available);
        assert!(r.degraded.is_some());
        assert_eq!(r.samples.len(), 5);
        assert!(r.llc_refills.is_none());
        assert_eq!(r.mem_accesses.median as u64, t.total_accesses);
        assert!(r.wall_time.min <= r.wall_time.median && r.wall_time.median <= r.wall_time.max);
    }
}
