//! Straggler-tolerant distributed optimization on a simulated cluster.
//!
//! The crate provides the latency model and its order statistics, the
//! subpartition algebra, the stale-gradient cache, the optimization methods
//! and load balancer, and a virtual-clock harness that runs them together.

pub mod error;
pub mod gradient_cache;
pub mod harness;
pub mod latency;
pub mod load_balancer;
pub mod methods;
pub mod order_stats;
pub mod partitioning;

pub use error::{Error, Result};
pub use gradient_cache::{GradientCache, InsertOutcome, SubgradientEntry};
pub use harness::{run_experiment, Experiment, ExperimentConfig, Method, RunTrace, TraceRow};
pub use latency::{GammaParams, LatencyDist, WorkerProfile};
pub use load_balancer::{BalancerSolution, ProfiledStats};
pub use methods::{Objective, Optimum, Projection, ProblemSpec};
pub use partitioning::{Alignment, PartitionState};
