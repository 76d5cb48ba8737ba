//! Wireless edge model and joint resource allocation for distributed split
//! federated learning.
//!
//! - [`scenario`] / [`channel`]: deployments, free-space gains, SINR, rate.
//! - [`cost`]: transmission latency/energy and the accuracy-weighted cost.
//! - [`bsum`]: block-wise minimisation of that cost over association, RB
//!   assignment, transmit power and relative local accuracy, plus the two
//!   random-block baselines.
//! - [`brute`]: exhaustive certifier for tiny instances.

pub mod assignment;
pub mod brute;
pub mod bsum;
pub mod channel;
pub mod cost;
pub mod error;
pub mod rng;
pub mod scenario;
pub mod solution;
pub mod units;

pub use brute::brute_force;
pub use bsum::{baseline_a, baseline_r, solve, Block, Solver, SolverParams, SolverTrace, TraceEntry};
pub use channel::{achievable_rate, path_loss_db, sinr, ChannelState};
pub use cost::{total_cost, CostBreakdown, CostParams, DeviceCost};
pub use error::{Error, Result};
pub use scenario::{generate_scenario, Scenario, ScenarioConfig};
pub use solution::{AllocationSolution, Violation};
