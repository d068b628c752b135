//! Synthetic traffic patterns and the THR% duty-cycle throttle.
//!
//! A [`WorkloadConfig`] describes one initiator: which pattern it runs, over how
//! large a buffer, and how hard it is throttled. An [`AccessGenerator`] turns a
//! config into an endless, line-granular access stream that the simulator
//! consumes; the hardware runner realizes the same pattern natively (see
//! [`crate::hw::native`]).

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_LINE_BYTES: u64 = 64;
pub const DEFAULT_EPOCH_LEN: u64 = 1024;
/// Sweeps performed by a task under test when no explicit volume is given.
pub const DEFAULT_TASK_SWEEPS: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TrafficPattern {
    /// Loads only.
    ReadMiss,
    /// Stores only.
    Memset,
    /// Alternating load from a source half and store to a destination half.
    Memcpy,
}

impl TrafficPattern {
    pub const ALL: [TrafficPattern; 3] = [
        TrafficPattern::ReadMiss,
        TrafficPattern::Memset,
        TrafficPattern::Memcpy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TrafficPattern::ReadMiss => "READ_MISS",
            TrafficPattern::Memset => "MEMSET",
            TrafficPattern::Memcpy => "MEMCPY",
        }
    }
}

impl fmt::Display for TrafficPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TrafficPattern {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "READ_MISS" => Ok(TrafficPattern::ReadMiss),
            "MEMSET" => Ok(TrafficPattern::Memset),
            "MEMCPY" => Ok(TrafficPattern::Memcpy),
            _ => Err(format!(
                "unknown traffic pattern `{s}` (expected READ_MISS, MEMSET or MEMCPY)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AccessKind {
    Read,
    Write,
}

impl AccessKind {
    pub fn opposite(self) -> AccessKind {
        match self {
            AccessKind::Read => AccessKind::Write,
            AccessKind::Write => AccessKind::Read,
        }
    }
}

/// Order in which a sweep visits the lines of the footprint.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessOrder {
    /// Ascending line addresses.
    #[default]
    Sequential,
    /// A fixed pseudo-random permutation of the lines, identical every sweep.
    PointerChase,
}

impl FromStr for AccessOrder {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "sequential" => Ok(AccessOrder::Sequential),
            "pointer_chase" | "chase" => Ok(AccessOrder::PointerChase),
            _ => Err(format!(
                "unknown access order `{s}` (expected sequential or pointer_chase)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Role {
    TaskUnderTest,
    Interference,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WorkloadConfig {
    pub pattern: TrafficPattern,
    pub footprint_bytes: u64,
    pub line_bytes: u64,
    /// THR%: share of issue slots the initiator actually uses.
    pub throttle_pct: u32,
    pub total_accesses: u64,
    pub role: Role,
    pub order: AccessOrder,
}

impl WorkloadConfig {
    /// An unthrottled task under test performing [`DEFAULT_TASK_SWEEPS`] sweeps.
    pub fn task(pattern: TrafficPattern, footprint_bytes: u64) -> Self {
        WorkloadConfig {
            pattern,
            footprint_bytes,
            line_bytes: DEFAULT_LINE_BYTES,
            throttle_pct: 100,
            total_accesses: DEFAULT_TASK_SWEEPS * (footprint_bytes / DEFAULT_LINE_BYTES),
            role: Role::TaskUnderTest,
            order: AccessOrder::Sequential,
        }
    }

    /// A background interference generator. Its volume only matters on
    /// hardware; in the simulator it runs until the task under test finishes.
    pub fn interference(pattern: TrafficPattern, footprint_bytes: u64, throttle_pct: u32) -> Self {
        WorkloadConfig {
            pattern,
            footprint_bytes,
            line_bytes: DEFAULT_LINE_BYTES,
            throttle_pct,
            total_accesses: footprint_bytes / DEFAULT_LINE_BYTES,
            role: Role::Interference,
            order: AccessOrder::Sequential,
        }
    }

    /// Changes the line size, keeping the number of sweeps the same.
    pub fn with_line_bytes(mut self, line_bytes: u64) -> Self {
        let sweeps = self.total_accesses / self.lines_per_sweep().max(1);
        self.line_bytes = line_bytes;
        self.total_accesses = sweeps.max(1) * (self.footprint_bytes / line_bytes.max(1));
        self
    }

    pub fn with_total_accesses(mut self, total_accesses: u64) -> Self {
        self.total_accesses = total_accesses;
        self
    }

    pub fn with_sweeps(mut self, sweeps: u64) -> Self {
        self.total_accesses = sweeps * self.lines_per_sweep();
        self
    }

    pub fn with_order(mut self, order: AccessOrder) -> Self {
        self.order = order;
        self
    }

    pub fn with_throttle(mut self, throttle_pct: u32) -> Self {
        self.throttle_pct = throttle_pct;
        self
    }

    /// Accesses in one complete sweep of the footprint.
    pub fn lines_per_sweep(&self) -> u64 {
        if self.line_bytes == 0 {
            0
        } else {
            self.footprint_bytes / self.line_bytes
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidWorkload(msg));
        if self.line_bytes == 0 {
            return bad("line_bytes must be positive".into());
        }
        if self.footprint_bytes == 0 {
            return bad("footprint_bytes must be positive".into());
        }
        if !self.footprint_bytes.is_multiple_of(self.line_bytes) {
            return bad(format!(
                "footprint of {} bytes is not a multiple of the {}-byte line",
                self.footprint_bytes, self.line_bytes
            ));
        }
        let lines = self.lines_per_sweep();
        if self.pattern == TrafficPattern::Memcpy && !lines.is_multiple_of(2) {
            return bad(format!(
                "MEMCPY needs an even number of lines to split into source and destination, got {lines}"
            ));
        }
        if lines > u64::from(u32::MAX) {
            return bad(format!("footprint of {lines} lines is too large"));
        }
        if self.throttle_pct > 100 {
            return Err(Error::ThrottleOutOfRange(self.throttle_pct));
        }
        if self.role == Role::TaskUnderTest && self.throttle_pct != 100 {
            return bad(format!(
                "a task under test runs unthrottled, but THR% is {}",
                self.throttle_pct
            ));
        }
        if self.total_accesses < lines {
            return bad(format!(
                "total_accesses {} is less than one sweep ({lines} lines)",
                self.total_accesses
            ));
        }
        Ok(())
    }
}

/// One line-granular access, addressed within the initiator's private range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MemAccess {
    pub initiator_id: usize,
    pub address: u64,
    pub kind: AccessKind,
}

/// Sweep order over `lines` lines: the identity for sequential sweeps, a
/// seeded shuffle for pointer-chase sweeps.
pub fn sweep_permutation(lines: u64, order: AccessOrder, seed: u64) -> Vec<u32> {
    let mut perm: Vec<u32> = (0..lines as u32).collect();
    if order == AccessOrder::PointerChase {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        perm.shuffle(&mut rng);
    }
    perm
}

/// Endless cyclic access stream for one initiator.
#[derive(Debug, Clone)]
pub struct AccessGenerator {
    initiator_id: usize,
    pattern: TrafficPattern,
    line_bytes: u64,
    lines: u64,
    /// Line order within the swept region; `None` means sequential.
    perm: Option<Vec<u32>>,
    /// Position within the current sweep, in accesses.
    pos: u64,
}

impl AccessGenerator {
    pub fn new(config: &WorkloadConfig, initiator_id: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let lines = config.lines_per_sweep();
        let swept = match config.pattern {
            TrafficPattern::Memcpy => lines / 2,
            _ => lines,
        };
        let perm = match config.order {
            AccessOrder::Sequential => None,
            AccessOrder::PointerChase => Some(sweep_permutation(swept, config.order, seed)),
        };
        Ok(AccessGenerator {
            initiator_id,
            pattern: config.pattern,
            line_bytes: config.line_bytes,
            lines,
            perm,
            pos: 0,
        })
    }

    /// Skips `n` accesses of the stream.
    pub fn advance(&mut self, n: u64) {
        self.pos = (self.pos + n % self.lines) % self.lines;
    }

    pub fn lines_per_sweep(&self) -> u64 {
        self.lines
    }

    fn line_of(&self, slot: u64) -> u64 {
        match &self.perm {
            Some(perm) => u64::from(perm[slot as usize]),
            None => slot,
        }
    }

    pub fn next_access(&mut self) -> MemAccess {
        let pos = self.pos;
        self.pos += 1;
        if self.pos == self.lines {
            self.pos = 0;
        }
        let (line, kind) = match self.pattern {
            TrafficPattern::ReadMiss => (self.line_of(pos), AccessKind::Read),
            TrafficPattern::Memset => (self.line_of(pos), AccessKind::Write),
            TrafficPattern::Memcpy => {
                let half = self.lines / 2;
                let line = self.line_of(pos / 2);
                if pos.is_multiple_of(2) {
                    (line, AccessKind::Read)
                } else {
                    (half + line, AccessKind::Write)
                }
            }
        };
        MemAccess {
            initiator_id: self.initiator_id,
            address: line * self.line_bytes,
            kind,
        }
    }
}

impl Iterator for AccessGenerator {
    type Item = MemAccess;

    fn next(&mut self) -> Option<MemAccess> {
        Some(self.next_access())
    }
}

/// Splits an epoch of `epoch_len` issue slots into `(active, idle)` slots for
/// the given THR%.
pub fn throttle_schedule(throttle_pct: u32, epoch_len: u64) -> Result<(u64, u64)> {
    if throttle_pct > 100 {
        return Err(Error::ThrottleOutOfRange(throttle_pct));
    }
    if epoch_len < 100 {
        return Err(Error::EpochTooShort(epoch_len));
    }
    // round half up
    let active = (u64::from(throttle_pct) * epoch_len + 50) / 100;
    Ok((active, epoch_len - active))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Active,
    /// Start of an idle stretch of the given number of slots.
    Idle(u64),
}

/// Walks the duty cycle produced by [`throttle_schedule`]: each epoch starts
/// with its active slots, followed by its idle slots.
#[derive(Debug, Clone)]
pub struct DutyCycle {
    active: u64,
    epoch_len: u64,
    slot: u64,
}

impl DutyCycle {
    pub fn new(throttle_pct: u32, epoch_len: u64) -> Result<Self> {
        let (active, _) = throttle_schedule(throttle_pct, epoch_len)?;
        Ok(DutyCycle {
            active,
            epoch_len,
            slot: 0,
        })
    }

    pub fn active_slots(&self) -> u64 {
        self.active
    }

    pub fn epoch_len(&self) -> u64 {
        self.epoch_len
    }

    /// Consumes either one active slot or the whole remaining idle stretch of
    /// the current epoch.
    pub fn next_slot(&mut self) -> Slot {
        if self.slot < self.active {
            self.slot += 1;
            if self.slot == self.epoch_len {
                self.slot = 0;
            }
            Slot::Active
        } else {
            let idle = self.epoch_len - self.slot;
            self.slot = 0;
            Slot::Idle(idle)
        }
    }
}
