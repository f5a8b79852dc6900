//! Learned swap-based improvement heuristic for a bi-objective permutation
//! flow shop, with classical baselines and a benchmark harness.
//!
//! Starting from the earliest-due-date order, a transformer-encoder policy
//! picks pairs of positions to swap for a fixed number of steps, trading
//! tardiness against the alternation of long and short operations at each
//! workstation. The best permutation visited is returned.

pub mod baselines;
pub mod bench;
pub mod error;
pub mod inference;
pub mod operators;
pub mod optim;
pub mod par;
pub mod policy;
pub mod ppo;
pub mod sched;
pub mod seed;

pub use error::{Error, Result};
