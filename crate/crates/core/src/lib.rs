//! Sequential log-convex programming (SLCP) for engineering design problems,
//! alongside SQP and logspace SQP (LSQP) baselines that share the same
//! problem model, sub-problem solver and outer loop.

pub mod bench;
pub mod driver;
pub mod model;
pub mod problems;
pub mod subsolver;
pub mod transform;
