//! Memory-interference characterization toolkit.
//!
//! * [`workload`]: READ_MISS / MEMSET / MEMCPY traffic generators and the THR% throttle.
//! * [`sim`]: deterministic shared-LLC + DRAM contention simulator.
//! * [`hw`]: the same co-run protocol on real cores with hardware counters.
//! * [`analysis`]: slowdown and refill (RF) curves, ABOVE/CROSSING/BELOW classification.
//! * [`report`]: experiment specs, sweep orchestration, CSV/JSON/SVG output.

pub mod analysis;
pub mod error;
pub mod hw;
pub mod report;
pub mod sim;
pub mod workload;

pub use error::{Error, Result};
