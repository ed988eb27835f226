//! Modality-aware training-frequency allocation for multimodal federated
//! learning.
//!
//! Each round the server scores every modality encoder twice: a *quality*
//! index from the separation of its class prototypes and an *importance* index
//! from exact Shapley values on a small validation set. A blend weight chosen by
//! a DDPG agent mixes the two into a per-slot utility, an unbounded-knapsack DP
//! packs modality combinations into the clients' time budget, and the resulting
//! slots are trained in descending order of combination size.

pub mod data;
pub mod ddpg;
mod error;
pub mod fedsim;
pub mod importance;
pub mod nn;
pub mod prototype;
pub mod rng;
pub mod scheduler;

pub use error::{Error, Result};
