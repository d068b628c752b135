#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use memcontend::report::ExperimentSpec;
use memcontend::sim::{CacheConfig, CacheState};
use memcontend::workload::{AccessKind, MemAccess};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn spec_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("specs").join(name)
}

pub fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden").join(name)
}

pub fn shipped_spec(name: &str) -> ExperimentSpec {
    ExperimentSpec::from_file(&spec_path(name)).expect("shipped spec parses")
}

/// Timestamp LRU: each resident line remembers when it was last touched and
/// the victim is the oldest. Lines are keyed by (initiator, line number) and
/// regions of different initiators start on set 0.
pub struct ReferenceLru {
    sets: u64,
    ways: usize,
    line_bytes: u64,
    clock: u64,
    resident: HashMap<u64, Vec<((usize, u64), u64)>>,
}

impl ReferenceLru {
    pub fn new(sets: u64, ways: usize, line_bytes: u64) -> Self {
        ReferenceLru {
            sets,
            ways,
            line_bytes,
            clock: 0,
            resident: HashMap::new(),
        }
    }

    /// True on a hit.
    pub fn access(&mut self, initiator: usize, address: u64) -> bool {
        self.clock += 1;
        let line = address / self.line_bytes;
        let set = self.resident.entry(line % self.sets).or_default();
        if let Some(entry) = set.iter_mut().find(|(k, _)| *k == (initiator, line)) {
            entry.1 = self.clock;
            return true;
        }
        if set.len() == self.ways {
            let oldest = (0..set.len()).min_by_key(|&i| set[i].1).unwrap();
            set.swap_remove(oldest);
        }
        set.push(((initiator, line), self.clock));
        false
    }
}

pub struct TraceCase {
    pub config: CacheConfig,
    pub trace: Vec<MemAccess>,
}

/// A random cache with at most 8 sets and 4 ways, and a trace of at most 1000
/// accesses drawn from a small address range so sets conflict often.
pub fn random_trace(seed: u64) -> TraceCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sets = 1u64 << rng.gen_range(0..=3);
    let ways = rng.gen_range(1..=4u64);
    let line = [16u64, 32, 64][rng.gen_range(0..3)];
    let initiators = rng.gen_range(1..=3usize);
    let lines_in_range = rng.gen_range(1..=4 * sets * ways);
    let len = rng.gen_range(1..=1000);
    let trace = (0..len)
        .map(|_| MemAccess {
            initiator_id: rng.gen_range(0..initiators),
            address: rng.gen_range(0..lines_in_range) * line + rng.gen_range(0..line),
            kind: if rng.gen_bool(0.5) {
                AccessKind::Read
            } else {
                AccessKind::Write
            },
        })
        .map(|mut a| {
            a.address -= a.address % line;
            a
        })
        .collect();
    TraceCase {
        config: CacheConfig::new(sets * ways * line, ways, line),
        trace,
    }
}

/// Runs a trace through both caches. Returns the refill counts, or the index
/// of the first access on which they disagree.
pub fn compare_with_oracle(case: &TraceCase) -> Result<(u64, u64), usize> {
    let mut cache = CacheState::new(case.config).expect("valid cache");
    let mut oracle = ReferenceLru::new(
        case.config.num_sets(),
        case.config.associativity as usize,
        case.config.line_bytes,
    );
    let (mut ours, mut theirs) = (0, 0);
    for (i, a) in case.trace.iter().enumerate() {
        let hit = cache.access(a).is_hit();
        let oracle_hit = oracle.access(a.initiator_id, a.address);
        if hit != oracle_hit {
            return Err(i);
        }
        ours += u64::from(!hit);
        theirs += u64::from(!oracle_hit);
    }
    Ok((ours, theirs))
}
