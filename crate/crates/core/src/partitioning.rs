//! Partition-index algebra. All indices are 1-based.
//!
//! Rows `1..=n` are split into `p` contiguous partitions; partition `i`
//! covers `p_start(n, p, i)..=p_stop(n, p, i)`. The same formulas are used for
//! the global row-to-worker split and for each worker's subpartitions.

use crate::error::{domain, Result};

fn check(n: usize, p: usize, i: usize) -> Result<()> {
    if p == 0 || p > n {
        return domain(format!("partition count {p} must lie in [1, {n}]"));
    }
    if i == 0 || i > p {
        return domain(format!("partition index {i} must lie in [1, {p}]"));
    }
    Ok(())
}

/// First row of partition `i`: `⌊(i−1)n/p⌋ + 1`.
pub fn p_start(n: usize, p: usize, i: usize) -> Result<usize> {
    check(n, p, i)?;
    Ok((i - 1) * n / p + 1)
}

/// Last row of partition `i`: `⌊in/p⌋`.
pub fn p_stop(n: usize, p: usize, i: usize) -> Result<usize> {
    check(n, p, i)?;
    Ok(i * n / p)
}

/// Index, under `p_new` partitions, of the partition containing the first
/// row of partition `k` under `p`: `⌈p_start(n, p, k)·p_new/n⌉`.
pub fn p_trans(n: usize, p: usize, p_new: usize, k: usize) -> Result<usize> {
    let first = p_start(n, p, k)?;
    if p_new == 0 || p_new > n {
        return domain(format!("partition count {p_new} must lie in [1, {n}]"));
    }
    Ok((first * p_new).div_ceil(n))
}

/// Cyclic successor of `k` in `1..=p`.
pub fn advance_index(k: usize, p: usize) -> Result<usize> {
    if p == 0 || k == 0 || k > p {
        return domain(format!("index {k} must lie in [1, {p}]"));
    }
    Ok(k % p + 1)
}

/// Result of realigning a worker's subpartition index after its subpartition
/// count changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Alignment {
    /// Index to process next under the new subpartition count.
    pub k_new: usize,
    /// Index under the old count whose first row matches `k_new`'s first row.
    pub k_old: usize,
    /// Number of backward steps taken before the partitions aligned.
    pub steps: usize,
}

/// Moves from `p` to `p_new` subpartitions so that the next processed
/// subpartition starts at the same row as some subpartition under `p`.
///
/// Advances `k` cyclically, maps it to the new partitioning, then walks the
/// new index down until both start rows coincide. Index 1 always aligns, so
/// the walk ends within `p_new` steps; if the mapped index is already 1, the
/// old index is reset to 1 as well.
pub fn align_partitions(n: usize, p: usize, p_new: usize, k: usize) -> Result<Alignment> {
    check(n, p, k)?;
    if p_new == 0 || p_new > n {
        return domain(format!("partition count {p_new} must lie in [1, {n}]"));
    }
    let mut k_old = advance_index(k, p)?;
    let mut k_new = p_trans(n, p, p_new, k_old)?;
    let mut steps = 0;
    while p_start(n, p_new, k_new)? != p_start(n, p, k_old)? {
        if k_new == 1 {
            // The mapped partition already is the first one but the advanced
            // old index starts later; both partitionings start at row 1.
            k_old = 1;
            break;
        }
        k_new -= 1;
        k_old = p_trans(n, p_new, p, k_new)?;
        steps += 1;
    }
    Ok(Alignment {
        k_new,
        k_old,
        steps,
    })
}

/// Subpartition state of one worker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionState {
    /// Number of rows stored by the worker.
    pub n: usize,
    /// Current subpartition count.
    pub p: usize,
    /// Index of the most recently processed subpartition.
    pub k: usize,
}

impl PartitionState {
    /// A fresh state whose first processed subpartition will be index 1.
    pub fn new(n: usize, p: usize) -> Result<Self> {
        check(n, p, p)?;
        Ok(Self { n, p, k: p })
    }

    /// Selects the next subpartition, realigning first if `p_new` differs
    /// from the current count. Returns the local 1-based row range.
    pub fn next(&mut self, p_new: Option<usize>) -> Result<(usize, usize)> {
        match p_new {
            Some(q) if q != self.p => {
                let a = align_partitions(self.n, self.p, q, self.k)?;
                self.p = q;
                self.k = a.k_new;
            }
            _ => self.k = advance_index(self.k, self.p)?,
        }
        Ok((p_start(self.n, self.p, self.k)?, p_stop(self.n, self.p, self.k)?))
    }
}
