//! Event-driven simulation of workers with a length-one task queue.
//!
//! Each worker is either idle or busy. At the start of every iteration the
//! coordinator hands a task to every worker; an idle worker starts it right
//! away, a busy worker keeps it queued, replacing whatever task was queued
//! before. When a busy worker finishes it immediately starts its queued task,
//! if any. Busy→idle transitions are kept in a min-heap keyed by
//! `(time, worker)`.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy)]
struct Completion {
    time: f64,
    worker: usize,
}

impl PartialEq for Completion {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Completion {}

impl PartialOrd for Completion {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Completion {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.worker.cmp(&other.worker))
    }
}

/// A finished task as seen by the coordinator.
#[derive(Debug, Clone)]
pub struct Arrival<P> {
    pub worker: usize,
    /// Iteration whose iterate the task was computed from.
    pub iteration: u64,
    pub started: f64,
    pub time: f64,
    /// Whether the task belongs to the iteration during which it arrived.
    pub fresh: bool,
    pub payload: P,
}

/// Everything that happened during one iteration's collection window.
#[derive(Debug, Clone)]
pub struct IterationOutcome<P> {
    pub iteration: u64,
    pub start: f64,
    /// Arrival time of the `w`-th fresh result.
    pub wth_fresh: f64,
    /// Close of the collection window, `wth_fresh + margin·(wth_fresh − start)`.
    pub end: f64,
    pub fresh_count: usize,
    /// Arrivals in processing order.
    pub arrivals: Vec<Arrival<P>>,
}

#[derive(Debug, Clone)]
struct InFlight<P> {
    iteration: u64,
    started: f64,
    payload: P,
}

#[derive(Debug, Clone)]
struct Slot<P> {
    busy: Option<InFlight<P>>,
    pending: Option<u64>,
}

/// Virtual-clock simulator of the coordinator/worker task exchange.
///
/// The payload type `P` is whatever the caller attaches to a task when it
/// starts (e.g. the computed subgradient); it is handed back on arrival.
#[derive(Debug, Clone)]
pub struct TaskQueueSim<P> {
    now: f64,
    slots: Vec<Slot<P>>,
    heap: BinaryHeap<Reverse<Completion>>,
}

impl<P> TaskQueueSim<P> {
    pub fn new(workers: usize) -> Self {
        assert!(workers > 0, "at least one worker is required");
        Self {
            now: 0.0,
            slots: (0..workers)
                .map(|_| Slot {
                    busy: None,
                    pending: None,
                })
                .collect(),
            heap: BinaryHeap::with_capacity(workers),
        }
    }

    pub fn num_workers(&self) -> usize {
        self.slots.len()
    }

    /// Current virtual time: the close of the last iteration.
    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn is_busy(&self, worker: usize) -> bool {
        self.slots[worker].busy.is_some()
    }

    /// Runs one iteration: dispatches `iteration` to every worker, waits for
    /// `w` fresh results, keeps collecting for the margin window and returns
    /// all arrivals in `(time, worker)` order.
    ///
    /// `start_task(worker, iteration, time)` is called whenever a worker starts
    /// a task; it returns the task's latency and payload.
    pub fn run_iteration<F>(
        &mut self,
        iteration: u64,
        w: usize,
        margin: f64,
        mut start_task: F,
    ) -> IterationOutcome<P>
    where
        F: FnMut(usize, u64, f64) -> (f64, P),
    {
        let n = self.slots.len();
        assert!(w >= 1 && w <= n, "w={w} out of range for {n} workers");
        assert!(margin >= 0.0, "margin must be nonnegative");
        let start = self.now;

        for worker in 0..n {
            if self.slots[worker].busy.is_some() {
                self.slots[worker].pending = Some(iteration);
            } else {
                self.start(worker, iteration, start, &mut start_task);
            }
        }

        let mut arrivals = Vec::new();
        let mut fresh_count = 0;
        let wth_fresh = loop {
            // Every worker holds an iteration task either in flight or queued,
            // so the heap cannot run dry before w fresh arrivals.
            let Reverse(next) = self.heap.pop().expect("no task in flight");
            let arrival = self.complete(next, iteration, &mut start_task);
            fresh_count += arrival.fresh as usize;
            arrivals.push(arrival);
            if fresh_count == w {
                break next.time;
            }
        };

        let end = if margin == 0.0 {
            wth_fresh
        } else {
            wth_fresh + margin * (wth_fresh - start)
        };
        while let Some(Reverse(next)) = self.heap.peek().copied() {
            if next.time > end {
                break;
            }
            self.heap.pop();
            let arrival = self.complete(next, iteration, &mut start_task);
            fresh_count += arrival.fresh as usize;
            arrivals.push(arrival);
        }
        self.now = end;

        IterationOutcome {
            iteration,
            start,
            wth_fresh,
            end,
            fresh_count,
            arrivals,
        }
    }

    fn start<F>(&mut self, worker: usize, iteration: u64, at: f64, start_task: &mut F)
    where
        F: FnMut(usize, u64, f64) -> (f64, P),
    {
        let (latency, payload) = start_task(worker, iteration, at);
        assert!(
            latency >= 0.0 && latency.is_finite(),
            "invalid task latency {latency}"
        );
        self.slots[worker].busy = Some(InFlight {
            iteration,
            started: at,
            payload,
        });
        self.heap.push(Reverse(Completion {
            time: at + latency,
            worker,
        }));
    }

    fn complete<F>(&mut self, done: Completion, current: u64, start_task: &mut F) -> Arrival<P>
    where
        F: FnMut(usize, u64, f64) -> (f64, P),
    {
        let task = self.slots[done.worker]
            .busy
            .take()
            .expect("completion for an idle worker");
        if let Some(next) = self.slots[done.worker].pending.take() {
            self.start(done.worker, next, done.time, start_task);
        }
        Arrival {
            worker: done.worker,
            iteration: task.iteration,
            started: task.started,
            time: done.time,
            fresh: task.iteration == current,
            payload: task.payload,
        }
    }
}
