//! Deterministic DRAM read-disturbance simulator for conventional and
//! multiple-row activation access patterns, with TRR and PRAC mitigations,
//! a characterization harness and a trace-driven performance model.

pub mod chip;
pub mod config;
pub mod disturbance;
pub mod dram;
pub mod error;
pub mod harness;
pub mod kv;
pub mod mitigation;
pub mod patterns;
pub mod perf;
pub mod profiles;
pub mod recipes;
pub mod report;
pub mod rng;

pub use error::{Result, SimError};
