//! Deterministic model of the shared-memory template: N initiators issuing
//! into a shared set-associative LLC backed by one contended DRAM controller.

pub mod cache;
pub mod config;
pub mod dram;
pub mod engine;

pub use cache::{CacheOutcome, CacheState, EvictedLine};
pub use config::{Arbitration, CacheConfig, DramConfig, PlatformConfig, Preset};
pub use dram::{Completion, DramController};
pub use engine::{co_run, simulate, InitiatorReport, RunReport};
