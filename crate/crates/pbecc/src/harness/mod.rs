//! Scenario loading, the run/report pipeline and post-run metrics.

pub mod metrics;
pub mod runner;
pub mod scenario;
