//! Calibrated stochastic read-disturbance fault model.

mod model;
mod profile;
mod thresholds;

pub use model::{contribution, flip_direction, flip_direction_named, per_row_share, Bitflip, Conditions, DisturbanceState};
pub use profile::{kind_index, ChipProfile, DpEntry, FlipDir, KindStats};
pub use thresholds::{fit_lognormal, sample_thresholds, ThresholdMap};
