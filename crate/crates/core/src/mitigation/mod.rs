//! Sampling target-row refresh and per-row activation counting.

mod prac;
mod trr;

pub use prac::{blast_factor, safe_threshold, weight, LowestHcFirst, PracConfig, PracMode, PracPlan, PracState};
pub use trr::{neighbors, TrrConfig, TrrDecision, TrrState};
