//! Budget-constrained reasoning on a tiny transformer: synthetic arithmetic tasks,
//! separate thinking/solution budgets, and group-relative policy-gradient training.

pub mod config;
pub mod decoder;
pub mod error;
pub mod eval;
pub mod grpo;
pub mod model;
pub mod optim;
pub mod pipeline;
pub mod policy;
pub mod rng;
pub mod stub;
pub mod taskgen;
pub mod vocab;
pub mod warmstart;

pub use error::{Error, Result};
