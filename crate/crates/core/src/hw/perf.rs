//! Thin `perf_event_open(2)` wrapper for per-thread user-space counters.

use std::fs::File;
use std::io::{self, Read};
use std::os::fd::{AsRawFd, FromRawFd};

use crate::error::{Error, Result};

const PERF_TYPE_HARDWARE: u32 = 0;
const PERF_TYPE_HW_CACHE: u32 = 3;
const PERF_TYPE_RAW: u32 = 4;

const PERF_COUNT_HW_CPU_CYCLES: u64 = 0;
const PERF_COUNT_HW_INSTRUCTIONS: u64 = 1;
const PERF_COUNT_HW_CACHE_REFERENCES: u64 = 2;
const PERF_COUNT_HW_CACHE_MISSES: u64 = 3;

const PERF_COUNT_HW_CACHE_L1D: u64 = 0;
const PERF_COUNT_HW_CACHE_LL: u64 = 2;
const PERF_COUNT_HW_CACHE_OP_READ: u64 = 0;
const PERF_COUNT_HW_CACHE_RESULT_ACCESS: u64 = 0;
const PERF_COUNT_HW_CACHE_RESULT_MISS: u64 = 1;

const ATTR_FLAG_DISABLED: u64 = 1 << 0;
const ATTR_FLAG_EXCLUDE_KERNEL: u64 = 1 << 5;
const ATTR_FLAG_EXCLUDE_HV: u64 = 1 << 6;

const PERF_EVENT_IOC_ENABLE: libc::c_ulong = 0x2400;
const PERF_EVENT_IOC_DISABLE: libc::c_ulong = 0x2401;
const PERF_EVENT_IOC_RESET: libc::c_ulong = 0x2403;

/// `struct perf_event_attr`, PERF_ATTR_SIZE_VER5 layout.
#[repr(C)]
#[derive(Default)]
struct PerfEventAttr {
    type_: u32,
    size: u32,
    config: u64,
    sample_period: u64,
    sample_type: u64,
    read_format: u64,
    flags: u64,
    wakeup_events: u32,
    bp_type: u32,
    config1: u64,
    config2: u64,
    branch_sample_type: u64,
    sample_regs_user: u64,
    sample_stack_user: u32,
    clockid: i32,
    sample_regs_intr: u64,
    aux_watermark: u32,
    sample_max_stack: u16,
    reserved: u16,
}

/// A resolved (type, config) pair for `perf_event_open`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventCode {
    pub type_: u32,
    pub config: u64,
}

fn hw_cache(cache: u64, op: u64, result: u64) -> EventCode {
    EventCode {
        type_: PERF_TYPE_HW_CACHE,
        config: cache | (op << 8) | (result << 16),
    }
}

/// Maps an event name to a perf event code.
///
/// Accepts the ARM PMU architectural names, perf's generic names, and
/// `raw:0xNN` for anything else.
pub fn resolve_event(name: &str) -> Option<EventCode> {
    let hw = |config| {
        Some(EventCode {
            type_: PERF_TYPE_HARDWARE,
            config,
        })
    };
    let raw = |config| {
        Some(EventCode {
            type_: PERF_TYPE_RAW,
            config,
        })
    };
    if let Some(code) = name.strip_prefix("raw:") {
        let code = code.trim_start_matches("0x");
        return u64::from_str_radix(code, 16).ok().and_then(raw);
    }
    match name {
        // ARMv8 common architectural events
        "MEM_ACCESS" => raw(0x13),
        "L2D_CACHE" => raw(0x16),
        "L2D_CACHE_REFILL" => raw(0x17),
        "CPU_CYCLES" => raw(0x11),
        // generic
        "cycles" | "cpu-cycles" => hw(PERF_COUNT_HW_CPU_CYCLES),
        "instructions" => hw(PERF_COUNT_HW_INSTRUCTIONS),
        "cache-references" => hw(PERF_COUNT_HW_CACHE_REFERENCES),
        "cache-misses" => hw(PERF_COUNT_HW_CACHE_MISSES),
        "LLC-loads" => Some(hw_cache(
            PERF_COUNT_HW_CACHE_LL,
            PERF_COUNT_HW_CACHE_OP_READ,
            PERF_COUNT_HW_CACHE_RESULT_ACCESS,
        )),
        "LLC-load-misses" => Some(hw_cache(
            PERF_COUNT_HW_CACHE_LL,
            PERF_COUNT_HW_CACHE_OP_READ,
            PERF_COUNT_HW_CACHE_RESULT_MISS,
        )),
        "L1-dcache-loads" => Some(hw_cache(
            PERF_COUNT_HW_CACHE_L1D,
            PERF_COUNT_HW_CACHE_OP_READ,
            PERF_COUNT_HW_CACHE_RESULT_ACCESS,
        )),
        _ => None,
    }
}

/// One counter attached to the calling thread, counting user-space only.
#[derive(Debug)]
pub struct Counter {
    name: String,
    file: File,
}

impl Counter {
    pub fn open(name: &str) -> Result<Self> {
        let code = resolve_event(name)
            .ok_or_else(|| Error::CounterUnavailable(format!("unknown event `{name}`")))?;
        let mut attr = PerfEventAttr {
            type_: code.type_,
            size: std::mem::size_of::<PerfEventAttr>() as u32,
            config: code.config,
            flags: ATTR_FLAG_DISABLED | ATTR_FLAG_EXCLUDE_KERNEL | ATTR_FLAG_EXCLUDE_HV,
            ..Default::default()
        };
        // pid = 0, cpu = -1: this thread on whichever core it runs.
        let fd = unsafe {
            libc::syscall(
                libc::SYS_perf_event_open,
                &mut attr as *mut PerfEventAttr,
                0 as libc::pid_t,
                -1 as libc::c_int,
                -1 as libc::c_int,
                0 as libc::c_ulong,
            )
        };
        if fd < 0 {
            return Err(Error::CounterUnavailable(format!(
                "perf_event_open({name}): {}",
                io::Error::last_os_error()
            )));
        }
        let file = unsafe { File::from_raw_fd(fd as libc::c_int) };
        let counter = Counter {
            name: name.to_owned(),
            file,
        };
        counter.ioctl(PERF_EVENT_IOC_RESET)?;
        counter.ioctl(PERF_EVENT_IOC_ENABLE)?;
        Ok(counter)
    }

    fn ioctl(&self, request: libc::c_ulong) -> Result<()> {
        let rc = unsafe { libc::ioctl(self.file.as_raw_fd(), request as _, 0) };
        if rc < 0 {
            return Err(Error::CounterUnavailable(format!(
                "ioctl on `{}`: {}",
                self.name,
                io::Error::last_os_error()
            )));
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn read(&mut self) -> Result<u64> {
        let mut buf = [0u8; 8];
        self.file
            .read_exact(&mut buf)
            .map_err(|e| Error::CounterUnavailable(format!("read `{}`: {e}", self.name)))?;
        Ok(u64::from_ne_bytes(buf))
    }
}

impl Drop for Counter {
    fn drop(&mut self) {
        let _ = self.ioctl(PERF_EVENT_IOC_DISABLE);
    }
}

/// The refill / access / cycles triple, opened together or not at all.
#[derive(Debug)]
pub struct CounterSet {
    pub refill: Counter,
    pub access: Counter,
    pub cycles: Counter,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CounterValues {
    pub refill: u64,
    pub access: u64,
    pub cycles: u64,
}

impl CounterValues {
    /// Per-counter delta; counters are monotonic so this never underflows.
    pub fn delta_since(&self, earlier: &CounterValues) -> CounterValues {
        CounterValues {
            refill: self.refill.saturating_sub(earlier.refill),
            access: self.access.saturating_sub(earlier.access),
            cycles: self.cycles.saturating_sub(earlier.cycles),
        }
    }
}

impl CounterSet {
    pub fn open(refill: &str, access: &str, cycles: &str) -> Result<Self> {
        Ok(CounterSet {
            refill: Counter::open(refill)?,
            access: Counter::open(access)?,
            cycles: Counter::open(cycles)?,
        })
    }

    pub fn read(&mut self) -> Result<CounterValues> {
        Ok(CounterValues {
            refill: self.refill.read()?,
            access: self.access.read()?,
            cycles: self.cycles.read()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn attr_matches_kernel_ver5_size() {
        assert_eq!(std::mem::size_of::<PerfEventAttr>(), 112);
    }

    #[test]
    fn resolves_known_and_raw_events() {
        assert_eq!(
            resolve_event("L2D_CACHE_REFILL"),
            Some(EventCode {
                type_: PERF_TYPE_RAW,
                config: 0x17
            })
        );
        assert_eq!(resolve_event("raw:0x1b").unwrap().config, 0x1b);
        assert_eq!(resolve_event("LLC-load-misses").unwrap().config, 2 | (1 << 16));
        assert!(resolve_event("no-such-event").is_none());
        assert!(resolve_event("raw:zz").is_none());
    }

    #[test]
    fn unknown_event_is_reported_not_ignored() {
        assert!(matches!(
            Counter::open("bogus"),
            Err(Error::CounterUnavailable(_))
        ));
    }
}
