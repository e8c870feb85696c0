use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::latency::WorkerProfile;

/// Temporary multiplicative change of one worker's computation latency.
/// Factors below one model a speed-up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BurstEvent {
    pub worker: usize,
    pub start: f64,
    /// Open-ended when absent.
    #[serde(default)]
    pub end: Option<f64>,
    pub comp_mean_scale: f64,
}

impl BurstEvent {
    pub fn validate(&self, num_workers: usize) -> Result<()> {
        if self.worker >= num_workers {
            return domain(format!("burst on worker {} of {num_workers}", self.worker));
        }
        if !self.start.is_finite() {
            return domain("burst start must be finite");
        }
        if let Some(end) = self.end {
            if !(end > self.start) {
                return domain(format!("burst ends at {end}, not after its start {}", self.start));
            }
        }
        if !(self.comp_mean_scale > 0.0 && self.comp_mean_scale.is_finite()) {
            return domain(format!("burst scale must be positive, got {}", self.comp_mean_scale));
        }
        Ok(())
    }

    /// Active on `[start, end)`.
    pub fn is_active(&self, at: f64) -> bool {
        at >= self.start && self.end.is_none_or(|e| at < e)
    }
}

/// Product of the scales of all bursts on `worker` active at `at`.
pub fn burst_factor(events: &[BurstEvent], worker: usize, at: f64) -> f64 {
    events
        .iter()
        .filter(|e| e.worker == worker && e.is_active(at))
        .map(|e| e.comp_mean_scale)
        .product()
}

/// Profiles in effect at time `at`: the computation component of each worker
/// is scaled by its active bursts (mean by the factor, variance by its
/// square). Overlapping bursts multiply.
pub fn inject_bursts(profiles: &[WorkerProfile], events: &[BurstEvent], at: f64) -> Vec<WorkerProfile> {
    profiles
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let f = burst_factor(events, i, at);
            let mut q = p.clone();
            if f != 1.0 {
                q.comp = p.comp.scaled(f);
            }
            q
        })
        .collect()
}
