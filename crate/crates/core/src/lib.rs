//! Correctness gates, benchmark runner and metrics for SAT solver variants,
//! plus the champion/challenger evolution loop built on them.

pub mod config;
pub mod drat;
pub mod fixture;
pub mod formula;
pub mod gate;
pub mod generate;
pub mod metrics;
pub mod orchestrator;
pub mod pool;
pub mod reference;
pub mod rules;
pub mod runner;
pub mod workspace;
