//! Budgeted allocation of training slots to modality combinations and the
//! ordering of those slots within a local period.

mod allocation;
mod bound;
mod combination;
mod order;
mod table;

pub use allocation::{fill_with, solve_allocation, time_cost, utility, AllocationVector};
pub use bound::{divergence_bound, divergence_bound_sizes, estimate_bound_params, BoundParams, GradientTrace};
pub use combination::{Combination, MAX_MODALITIES};
pub use order::{order_schedule, Schedule};
pub use table::CombinationTable;
