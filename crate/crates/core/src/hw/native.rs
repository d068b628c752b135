//! Native realization of the traffic patterns over a real buffer.

use std::alloc::{self, Layout};
use std::hint::black_box;
use std::ptr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::workload::{sweep_permutation, throttle_schedule, AccessOrder, TrafficPattern, WorkloadConfig};

pub const PAGE_BYTES: usize = 4096;
const MEMSET_FILL: u64 = 0xA5A5_A5A5_A5A5_A5A5;

/// Page-aligned heap buffer, pre-faulted on construction.
pub struct AlignedBuffer {
    ptr: *mut u8,
    layout: Layout,
}

unsafe impl Send for AlignedBuffer {}

impl AlignedBuffer {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidBuffer("zero-length buffer".into()));
        }
        let layout = Layout::from_size_align(len, PAGE_BYTES)
            .map_err(|e| Error::InvalidBuffer(e.to_string()))?;
        let ptr = unsafe { alloc::alloc_zeroed(layout) };
        if ptr.is_null() {
            alloc::handle_alloc_error(layout);
        }
        let mut buf = AlignedBuffer { ptr, layout };
        buf.touch();
        Ok(buf)
    }

    /// Writes one byte per page so first-touch faults happen here.
    pub fn touch(&mut self) {
        for off in (0..self.len()).step_by(PAGE_BYTES) {
            unsafe { ptr::write_volatile(self.ptr.add(off), 0) };
        }
    }

    pub fn len(&self) -> usize {
        self.layout.size()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_mut_slice(&mut self) -> &mut [u8] {
        unsafe { std::slice::from_raw_parts_mut(self.ptr, self.len()) }
    }
}

impl Drop for AlignedBuffer {
    fn drop(&mut self) {
        unsafe { alloc::dealloc(self.ptr, self.layout) };
    }
}

/// Duty-cycle timing for THR% on hardware: `active` accesses back-to-back,
/// then spin until the epoch's wall-clock budget is used up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HwThrottle {
    pub active: u64,
    pub epoch: Duration,
}

impl HwThrottle {
    /// Epoch sized to `epoch_target` at the calibrated unthrottled rate.
    pub fn new(throttle_pct: u32, max_rate: f64, epoch_target: Duration) -> Result<Self> {
        let epoch_len = ((max_rate * epoch_target.as_secs_f64()).round() as u64).max(100);
        let (active, _) = throttle_schedule(throttle_pct, epoch_len)?;
        Ok(HwThrottle {
            active,
            epoch: Duration::from_secs_f64(epoch_len as f64 / max_rate),
        })
    }
}

/// Executable loop over one buffer performing a workload's pattern.
///
/// READ_MISS in pointer-chase order walks a chain of next-line offsets stored
/// in the buffer itself, so each load depends on the previous one. All other
/// loads and stores are volatile.
pub struct NativeLoop<'a> {
    pattern: TrafficPattern,
    line_bytes: usize,
    lines: usize,
    buf: &'a mut [u8],
    /// Sweep order over the swept region (whole buffer, or the source half
    /// for MEMCPY); empty for sequential sweeps.
    order: Vec<u32>,
    chase: bool,
    pos: usize,
    cursor: usize,
    sink: u64,
}

impl<'a> NativeLoop<'a> {
    pub fn new(config: &WorkloadConfig, buf: &'a mut [u8], seed: u64) -> Result<Self> {
        config.validate()?;
        let line_bytes = config.line_bytes as usize;
        if line_bytes < 8 {
            return Err(Error::InvalidBuffer(format!(
                "line size {line_bytes} cannot hold a chase pointer"
            )));
        }
        if !(buf.as_ptr() as usize).is_multiple_of(line_bytes) {
            return Err(Error::InvalidBuffer(format!(
                "buffer is not aligned to the {line_bytes}-byte line"
            )));
        }
        if (buf.len() as u64) < config.footprint_bytes {
            return Err(Error::InvalidBuffer(format!(
                "buffer of {} bytes is smaller than the {}-byte footprint",
                buf.len(),
                config.footprint_bytes
            )));
        }
        let lines = config.lines_per_sweep() as usize;
        let swept = if config.pattern == TrafficPattern::Memcpy {
            lines / 2
        } else {
            lines
        };
        let order = match config.order {
            AccessOrder::Sequential => Vec::new(),
            AccessOrder::PointerChase => sweep_permutation(swept as u64, config.order, seed),
        };
        let chase = config.pattern == TrafficPattern::ReadMiss && !order.is_empty();
        let mut nl = NativeLoop {
            pattern: config.pattern,
            line_bytes,
            lines,
            buf,
            order,
            chase,
            pos: 0,
            cursor: 0,
            sink: 0,
        };
        if nl.chase {
            nl.link_chain();
        }
        Ok(nl)
    }

    fn link_chain(&mut self) {
        let n = self.order.len();
        for i in 0..n {
            let from = self.order[i] as usize * self.line_bytes;
            let to = self.order[(i + 1) % n] as usize * self.line_bytes;
            self.buf[from..from + 8].copy_from_slice(&(to as u64).to_ne_bytes());
        }
        self.cursor = self.order[0] as usize * self.line_bytes;
    }

    /// Line indices visited by one sweep of the swept region, in order.
    pub fn sweep_order(&self) -> Vec<usize> {
        let swept = if self.pattern == TrafficPattern::Memcpy {
            self.lines / 2
        } else {
            self.lines
        };
        if self.chase {
            let mut cur = self.cursor;
            (0..swept)
                .map(|_| {
                    let line = cur / self.line_bytes;
                    let mut next = [0u8; 8];
                    next.copy_from_slice(&self.buf[cur..cur + 8]);
                    cur = u64::from_ne_bytes(next) as usize;
                    line
                })
                .collect()
        } else if self.order.is_empty() {
            (0..swept).collect()
        } else {
            self.order.iter().map(|&l| l as usize).collect()
        }
    }

    pub fn lines_per_sweep(&self) -> usize {
        self.lines
    }

    #[inline(always)]
    fn line_at(&self, slot: usize) -> usize {
        if self.order.is_empty() {
            slot
        } else {
            self.order[slot] as usize
        }
    }

    /// Performs `accesses` accesses of the pattern; returns a checksum that
    /// keeps the loads observable.
    pub fn run(&mut self, accesses: u64) -> u64 {
        let base = self.buf.as_mut_ptr();
        let lb = self.line_bytes;
        match self.pattern {
            TrafficPattern::ReadMiss if self.chase => {
                let mut cur = self.cursor;
                for _ in 0..accesses {
                    cur = unsafe { ptr::read_volatile(base.add(cur) as *const u64) } as usize;
                }
                self.cursor = cur;
                self.sink = self.sink.wrapping_add(cur as u64);
            }
            TrafficPattern::ReadMiss => {
                let mut sum = 0u64;
                for _ in 0..accesses {
                    let off = self.line_at(self.pos) * lb;
                    sum = sum.wrapping_add(unsafe { ptr::read_volatile(base.add(off) as *const u64) });
                    self.pos += 1;
                    if self.pos == self.lines {
                        self.pos = 0;
                    }
                }
                self.sink = self.sink.wrapping_add(sum);
            }
            TrafficPattern::Memset => {
                let val = MEMSET_FILL;
                for _ in 0..accesses {
                    let off = self.line_at(self.pos) * lb;
                    for w in (0..lb).step_by(8) {
                        unsafe { ptr::write_volatile(base.add(off + w) as *mut u64, val) };
                    }
                    self.pos += 1;
                    if self.pos == self.lines {
                        self.pos = 0;
                    }
                }
            }
            TrafficPattern::Memcpy => {
                let half = self.lines / 2;
                let mut carry = 0u64;
                for _ in 0..accesses {
                    let slot = self.pos / 2;
                    let line = self.line_at(slot);
                    if self.pos.is_multiple_of(2) {
                        carry = unsafe { ptr::read_volatile(base.add(line * lb) as *const u64) };
                    } else {
                        let dst = (half + line) * lb;
                        for w in (0..lb).step_by(8) {
                            unsafe { ptr::write_volatile(base.add(dst + w) as *mut u64, carry) };
                        }
                    }
                    self.pos += 1;
                    if self.pos == self.lines {
                        self.pos = 0;
                    }
                }
                self.sink = self.sink.wrapping_add(carry);
            }
        }
        black_box(self.sink)
    }

    /// Runs under a duty-cycle throttle until `stop` is raised or `limit`
    /// accesses are done. Returns the number of accesses performed.
    pub fn run_throttled(&mut self, throttle: &HwThrottle, stop: &AtomicBool, limit: Option<u64>) -> u64 {
        let mut done = 0u64;
        let mut epoch_start = Instant::now();
        while !stop.load(Ordering::Relaxed) {
            let mut n = throttle.active;
            if let Some(limit) = limit {
                if done >= limit {
                    break;
                }
                n = n.min(limit - done);
            }
            self.run(n);
            done += n;
            let deadline = epoch_start + throttle.epoch;
            while Instant::now() < deadline {
                if stop.load(Ordering::Relaxed) {
                    return done;
                }
                std::hint::spin_loop();
            }
            epoch_start = deadline;
        }
        done
    }
}
