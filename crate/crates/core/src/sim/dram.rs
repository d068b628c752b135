//! Single shared DRAM controller: one request in service at a time.

use crate::sim::config::{Arbitration, DramConfig};
use crate::workload::AccessKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pending {
    arrival: u64,
    seq: u64,
    kind: AccessKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Completion {
    pub initiator_id: usize,
    pub kind: AccessKind,
    pub start: u64,
    pub completion: u64,
}

/// Queue state of the controller. Each initiator has at most one pending
/// request (in-order cores with a single outstanding miss).
#[derive(Debug, Clone)]
pub struct DramController {
    config: DramConfig,
    pending: Vec<Option<Pending>>,
    busy_until: u64,
    last_kind: Option<AccessKind>,
    rr_next: usize,
    seq: u64,
}

impl DramController {
    pub fn new(config: DramConfig, initiators: usize) -> Self {
        DramController {
            config,
            pending: vec![None; initiators],
            busy_until: 0,
            last_kind: None,
            rr_next: 0,
            seq: 0,
        }
    }

    /// Queues a miss from `initiator_id` that reaches the controller at `arrival`.
    pub fn enqueue(&mut self, initiator_id: usize, kind: AccessKind, arrival: u64) {
        assert!(
            self.pending[initiator_id].is_none(),
            "initiator {initiator_id} already has an outstanding DRAM request"
        );
        self.pending[initiator_id] = Some(Pending {
            arrival,
            seq: self.seq,
            kind,
        });
        self.seq += 1;
    }

    pub fn has_pending(&self) -> bool {
        self.pending.iter().any(Option::is_some)
    }

    /// Earliest cycle at which the controller can start its next service.
    pub fn next_dispatch_time(&self) -> Option<u64> {
        self.pending
            .iter()
            .flatten()
            .map(|p| p.arrival)
            .min()
            .map(|arrival| arrival.max(self.busy_until))
    }

    pub fn service_time(&self, kind: AccessKind) -> u64 {
        let base = match kind {
            AccessKind::Read => self.config.read_cost,
            AccessKind::Write => self.config.write_cost,
        };
        match self.last_kind {
            Some(prev) if prev != kind => base + self.config.turnaround_penalty,
            _ => base,
        }
    }

    /// Starts the next service at [`next_dispatch_time`](Self::next_dispatch_time),
    /// choosing among requests that have arrived by then.
    pub fn dispatch(&mut self) -> Option<Completion> {
        let start = self.next_dispatch_time()?;
        let eligible = |p: &Option<Pending>| p.is_some_and(|p| p.arrival <= start);
        let n = self.pending.len();
        let chosen = match self.config.arbitration {
            Arbitration::RoundRobin => (0..n)
                .map(|k| (self.rr_next + k) % n)
                .find(|&i| eligible(&self.pending[i]))?,
            Arbitration::Fifo => (0..n)
                .filter(|&i| eligible(&self.pending[i]))
                .min_by_key(|&i| {
                    let p = self.pending[i].unwrap();
                    (p.arrival, p.seq)
                })?,
        };
        let req = self.pending[chosen].take()?;
        let completion = start + self.service_time(req.kind);
        self.busy_until = completion;
        self.last_kind = Some(req.kind);
        self.rr_next = (chosen + 1) % n;
        Some(Completion {
            initiator_id: chosen,
            kind: req.kind,
            start,
            completion,
        })
    }
}
