//! Interval-keyed store of subgradients with staleness-aware eviction.
//!
//! Entries cover disjoint row intervals `[first, last]` of the dataset and
//! carry the iteration of the iterate they were computed from. A received
//! subgradient replaces every stored entry it overlaps, unless one of those is
//! at least as recent, in which case it is dropped. The elementwise sum of all
//! stored values is maintained incrementally.

use std::collections::BTreeMap;

use ndarray::Array2;

use crate::error::{domain, Error, Result};

/// Default number of accepted inserts between full recomputations of the sum.
pub const DEFAULT_REBUILD_INTERVAL: u64 = 10_000;

/// Sum of per-sample gradients over rows `first..=last` (1-based, inclusive),
/// evaluated at the iterate of `iteration`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgradientEntry {
    pub first: usize,
    pub last: usize,
    pub iteration: u64,
    pub value: Array2<f64>,
}

impl SubgradientEntry {
    pub fn new(first: usize, last: usize, iteration: u64, value: Array2<f64>) -> Self {
        Self {
            first,
            last,
            iteration,
            value,
        }
    }

    pub fn len(&self) -> usize {
        self.last + 1 - self.first
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone)]
struct Slot {
    last: usize,
    iteration: u64,
    value: Array2<f64>,
}

/// Outcome of [`GradientCache::try_insert`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    /// Overwrote an entry with the same interval.
    Updated,
    /// Inserted after evicting `evicted` overlapping entries.
    Inserted { evicted: usize },
    /// Dropped because an overlapping entry is at least as recent.
    Rejected,
}

impl InsertOutcome {
    pub fn accepted(self) -> bool {
        !matches!(self, Self::Rejected)
    }
}

#[derive(Debug, Clone)]
pub struct GradientCache {
    n: usize,
    shape: (usize, usize),
    entries: BTreeMap<usize, Slot>,
    sum: Array2<f64>,
    covered: usize,
    accepted_since_rebuild: u64,
    rebuild_interval: u64,
}

impl GradientCache {
    /// Empty cache over `n` rows holding gradients of the given shape.
    pub fn new(n: usize, shape: (usize, usize)) -> Self {
        Self {
            n,
            shape,
            entries: BTreeMap::new(),
            sum: Array2::zeros(shape),
            covered: 0,
            accepted_since_rebuild: 0,
            rebuild_interval: DEFAULT_REBUILD_INTERVAL,
        }
    }

    pub fn with_rebuild_interval(mut self, interval: u64) -> Self {
        self.rebuild_interval = interval.max(1);
        self
    }

    pub fn num_rows(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of rows covered by stored entries.
    pub fn covered(&self) -> usize {
        self.covered
    }

    /// Fraction of rows covered, ξ.
    pub fn coverage(&self) -> f64 {
        self.covered as f64 / self.n as f64
    }

    /// Maintained sum of all stored values.
    pub fn sum(&self) -> &Array2<f64> {
        &self.sum
    }

    /// Stored `(first, last, iteration)` triples in increasing row order.
    pub fn intervals(&self) -> Vec<(usize, usize, u64)> {
        self.entries
            .iter()
            .map(|(&f, s)| (f, s.last, s.iteration))
            .collect()
    }

    /// Stored values in increasing row order.
    pub fn values(&self) -> impl Iterator<Item = &Array2<f64>> {
        self.entries.values().map(|s| &s.value)
    }

    /// Keys of entries overlapping `[first, last]`.
    fn overlapping(&self, first: usize, last: usize) -> Vec<usize> {
        let mut keys = Vec::new();
        if let Some((&k, slot)) = self.entries.range(..first).next_back() {
            if slot.last >= first {
                keys.push(k);
            }
        }
        keys.extend(self.entries.range(first..=last).map(|(&k, _)| k));
        keys
    }

    /// Offers a subgradient to the cache.
    pub fn try_insert(&mut self, entry: SubgradientEntry) -> Result<InsertOutcome> {
        let SubgradientEntry {
            first,
            last,
            iteration,
            value,
        } = entry;
        if first == 0 || first > last || last > self.n {
            return domain(format!(
                "interval [{first}, {last}] outside [1, {}]",
                self.n
            ));
        }
        if value.dim() != self.shape {
            return domain(format!(
                "gradient shape {:?} does not match cache shape {:?}",
                value.dim(),
                self.shape
            ));
        }

        let overlap = self.overlapping(first, last);
        if overlap
            .iter()
            .any(|k| self.entries[k].iteration >= iteration)
        {
            return Ok(InsertOutcome::Rejected);
        }

        let outcome = match overlap.as_slice() {
            [k] if *k == first && self.entries[k].last == last => {
                let slot = self.entries.get_mut(k).expect("present");
                self.sum -= &slot.value;
                self.sum += &value;
                slot.value = value;
                slot.iteration = iteration;
                InsertOutcome::Updated
            }
            _ => {
                for k in &overlap {
                    let slot = self.entries.remove(k).expect("present");
                    self.sum -= &slot.value;
                    self.covered -= slot.last + 1 - k;
                }
                self.sum += &value;
                self.covered += last + 1 - first;
                self.entries.insert(
                    first,
                    Slot {
                        last,
                        iteration,
                        value,
                    },
                );
                InsertOutcome::Inserted {
                    evicted: overlap.len(),
                }
            }
        };

        self.accepted_since_rebuild += 1;
        if self.accepted_since_rebuild >= self.rebuild_interval {
            self.rebuild();
        }
        Ok(outcome)
    }

    /// Recomputes the maintained sum from the stored values.
    pub fn rebuild(&mut self) {
        let mut sum = Array2::zeros(self.shape);
        for slot in self.entries.values() {
            sum += &slot.value;
        }
        self.sum = sum;
        self.accepted_since_rebuild = 0;
    }

    /// The current gradient estimate `(H, ξ)`.
    pub fn gradient_estimate(&self) -> Result<(&Array2<f64>, f64)> {
        if self.covered == 0 {
            return Err(Error::NoGradient);
        }
        Ok((&self.sum, self.coverage()))
    }

    /// Row intervals in `[1, n]` not covered by any entry, in increasing order.
    pub fn eviction_gap_report(&self) -> Vec<(usize, usize)> {
        let mut gaps = Vec::new();
        let mut next = 1;
        for (&first, slot) in &self.entries {
            if first > next {
                gaps.push((next, first - 1));
            }
            next = slot.last + 1;
        }
        if next <= self.n {
            gaps.push((next, self.n));
        }
        gaps
    }
}
