use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CacheConfig {
    pub capacity_bytes: u64,
    pub associativity: u64,
    pub line_bytes: u64,
}

impl CacheConfig {
    pub fn new(capacity_bytes: u64, associativity: u64, line_bytes: u64) -> Self {
        CacheConfig {
            capacity_bytes,
            associativity,
            line_bytes,
        }
    }

    pub fn num_sets(&self) -> u64 {
        self.capacity_bytes / (self.associativity * self.line_bytes)
    }

    pub fn validate(&self) -> Result<()> {
        if self.capacity_bytes == 0 || self.associativity == 0 || self.line_bytes == 0 {
            return Err(Error::InvalidPlatform(
                "cache capacity, associativity and line size must be positive".into(),
            ));
        }
        let way_bytes = self.associativity * self.line_bytes;
        if !self.capacity_bytes.is_multiple_of(way_bytes) {
            return Err(Error::InvalidPlatform(format!(
                "cache capacity {} is not a multiple of associativity x line ({way_bytes})",
                self.capacity_bytes
            )));
        }
        if !self.num_sets().is_power_of_two() {
            return Err(Error::InvalidPlatform(format!(
                "number of cache sets ({}) is not a power of two",
                self.num_sets()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arbitration {
    #[default]
    RoundRobin,
    Fifo,
}

impl FromStr for Arbitration {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "round_robin" | "rr" => Ok(Arbitration::RoundRobin),
            "fifo" => Ok(Arbitration::Fifo),
            _ => Err(format!(
                "unknown arbitration `{s}` (expected round_robin or fifo)"
            )),
        }
    }
}

impl fmt::Display for Arbitration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arbitration::RoundRobin => "round_robin",
            Arbitration::Fifo => "fifo",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DramConfig {
    pub read_cost: u64,
    pub write_cost: u64,
    /// Extra cycles whenever the controller switches between reads and writes.
    pub turnaround_penalty: u64,
    pub arbitration: Arbitration,
}

impl DramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.read_cost == 0 || self.write_cost == 0 {
            return Err(Error::InvalidPlatform(
                "DRAM read and write costs must be at least one cycle".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlatformConfig {
    pub cache: CacheConfig,
    pub dram: DramConfig,
    pub hit_cost: u64,
    pub initiator_count: usize,
    /// Issue slots per throttle epoch.
    pub epoch_len: u64,
}

/// Named platform presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// Symmetric read/write cost with an expensive bus turnaround.
    Tx2Like,
    /// Writes far costlier than reads, cheap turnaround.
    Zu9egLike,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Tx2Like => "tx2-like",
            Preset::Zu9egLike => "zu9eg-like",
        }
    }

    pub fn dram(self) -> DramConfig {
        match self {
            Preset::Tx2Like => DramConfig {
                read_cost: 40,
                write_cost: 40,
                turnaround_penalty: 60,
                arbitration: Arbitration::RoundRobin,
            },
            Preset::Zu9egLike => DramConfig {
                read_cost: 40,
                write_cost: 200,
                turnaround_penalty: 4,
                arbitration: Arbitration::RoundRobin,
            },
        }
    }

    /// Preset platform with a 1MB 2-way LLC and `initiator_count` initiators.
    pub fn platform(self, initiator_count: usize) -> PlatformConfig {
        PlatformConfig {
            cache: CacheConfig::new(1 << 20, 2, 64),
            dram: self.dram(),
            hit_cost: 10,
            initiator_count,
            epoch_len: crate::workload::DEFAULT_EPOCH_LEN,
        }
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "tx2-like" | "tx2" => Ok(Preset::Tx2Like),
            "zu9eg-like" | "zu9eg" => Ok(Preset::Zu9egLike),
            _ => Err(format!(
                "unknown platform preset `{s}` (expected tx2-like or zu9eg-like)"
            )),
        }
    }
}

impl PlatformConfig {
    pub fn validate(&self) -> Result<()> {
        self.cache.validate()?;
        self.dram.validate()?;
        if self.initiator_count == 0 {
            return Err(Error::InvalidPlatform(
                "at least one initiator is required".into(),
            ));
        }
        if self.hit_cost == 0 || self.hit_cost >= self.dram.read_cost {
            return Err(Error::InvalidPlatform(format!(
                "hit cost must be in [1, read_cost), got {} with read_cost {}",
                self.hit_cost, self.dram.read_cost
            )));
        }
        if self.epoch_len < 100 {
            return Err(Error::EpochTooShort(self.epoch_len));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for p in [Preset::Tx2Like, Preset::Zu9egLike] {
            p.platform(4).validate().unwrap();
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert_eq!(Preset::Tx2Like.platform(4).cache.num_sets(), 8192);
    }

    #[test]
    fn rejects_bad_geometry_and_costs() {
        assert!(CacheConfig::new(3 * 64 * 4, 4, 64).validate().is_err());
        assert!(CacheConfig::new(1000, 4, 64).validate().is_err());
        assert!(CacheConfig::new(8 * 64 * 2, 2, 64).validate().is_ok());

        let mut p = Preset::Tx2Like.platform(4);
        p.hit_cost = p.dram.read_cost;
        assert!(p.validate().is_err());
        let mut p = Preset::Tx2Like.platform(0);
        assert!(p.validate().is_err());
        p.initiator_count = 1;
        p.dram.write_cost = 0;
        assert!(p.validate().is_err());
    }
}
