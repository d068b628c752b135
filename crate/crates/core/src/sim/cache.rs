//! Shared set-associative LLC with true LRU replacement.

use crate::error::Result;
use crate::sim::config::CacheConfig;
use crate::workload::MemAccess;

/// log2 of the number of lines reserved for each initiator's private range.
/// Large enough that no footprint can reach the next initiator's range, and a
/// multiple of any power-of-two set count so every range starts at set 0.
const REGION_SHIFT: u32 = 36;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvictedLine {
    pub initiator_id: usize,
    pub address: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheOutcome {
    Hit,
    Miss { evicted: Option<EvictedLine> },
}

impl CacheOutcome {
    pub fn is_hit(&self) -> bool {
        matches!(self, CacheOutcome::Hit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Way {
    tag: u64,
    initiator_id: usize,
}

/// Per-set recency lists. Position in a set's vector is the line's LRU rank:
/// index 0 is most recently used, the last element is the next victim.
#[derive(Debug, Clone)]
pub struct CacheState {
    config: CacheConfig,
    set_mask: u64,
    set_bits: u32,
    sets: Vec<Vec<Way>>,
}

impl CacheState {
    pub fn new(config: CacheConfig) -> Result<Self> {
        config.validate()?;
        let num_sets = config.num_sets();
        let ways = config.associativity as usize;
        Ok(CacheState {
            config,
            set_mask: num_sets - 1,
            set_bits: num_sets.trailing_zeros(),
            sets: (0..num_sets).map(|_| Vec::with_capacity(ways)).collect(),
        })
    }

    pub fn config(&self) -> &CacheConfig {
        &self.config
    }

    /// Line address in the shared global space.
    pub fn global_line(&self, initiator_id: usize, address: u64) -> u64 {
        ((initiator_id as u64) << REGION_SHIFT) + address / self.config.line_bytes
    }

    pub fn set_index(&self, global_line: u64) -> usize {
        (global_line & self.set_mask) as usize
    }

    pub fn access(&mut self, access: &MemAccess) -> CacheOutcome {
        debug_assert_eq!(access.address % self.config.line_bytes, 0);
        let line = self.global_line(access.initiator_id, access.address);
        let set_idx = self.set_index(line);
        let tag = line >> self.set_bits;
        let ways = self.config.associativity as usize;
        let set = &mut self.sets[set_idx];

        if let Some(pos) = set.iter().position(|w| w.tag == tag) {
            set[..=pos].rotate_right(1);
            return CacheOutcome::Hit;
        }

        let evicted = if set.len() == ways {
            set.pop().map(|victim| {
                let victim_line = (victim.tag << self.set_bits) | set_idx as u64;
                let base = (victim.initiator_id as u64) << REGION_SHIFT;
                EvictedLine {
                    initiator_id: victim.initiator_id,
                    address: (victim_line - base) * self.config.line_bytes,
                }
            })
        } else {
            None
        };
        set.insert(
            0,
            Way {
                tag,
                initiator_id: access.initiator_id,
            },
        );
        CacheOutcome::Miss { evicted }
    }

    pub fn occupancy(&self, set_idx: usize) -> usize {
        self.sets[set_idx].len()
    }

    /// Lines of `initiator_id` currently resident.
    pub fn resident_lines(&self, initiator_id: usize) -> usize {
        self.sets
            .iter()
            .flatten()
            .filter(|w| w.initiator_id == initiator_id)
            .count()
    }

    /// LRU rank of a resident line (0 = most recent).
    pub fn lru_rank(&self, initiator_id: usize, address: u64) -> Option<usize> {
        let line = self.global_line(initiator_id, address);
        let tag = line >> self.set_bits;
        self.sets[self.set_index(line)]
            .iter()
            .position(|w| w.tag == tag)
    }
}
