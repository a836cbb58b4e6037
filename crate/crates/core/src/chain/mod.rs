//! Truncated periodic Markov chain of the backlog `(due_now, total, age)`.

mod bound;
mod kernel;
mod scenario;
mod state;
mod stationary;

pub use bound::{find_bound, find_bound_by, find_bound_with_cap, rejection_at, BoundSearch, DEFAULT_HARD_CAP};
pub use kernel::{AgeFlows, AgeIncome, StepScratch, TruncatedKernel};
pub use scenario::{Scenario, DEFAULT_REJECTION_THRESHOLD};
pub use state::{ChainState, StateSpace};
pub use stationary::{
    gth, l1_distance, run_cycle, stationary, workload_matrix, workload_rejection, workload_stationary,
    StationaryDistribution, StationaryOptions,
};
