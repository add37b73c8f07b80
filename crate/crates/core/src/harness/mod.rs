//! Measurement procedures run against the simulated chip.

mod bisection;
mod discovery;
pub mod region;
mod sweep;

pub use bisection::{default_cap, find_hcfirst, first_flip_by_scan, prepare_chip, victim_flips, BisectionConfig, HcFirst};
pub use discovery::{discover_simra_groups, discover_subarrays, discover_subarrays_exhaustive, probe_group};
pub use region::{classify_region, Region};
pub use sweep::{
    combined_priors, pattern_act_kind, read_records, run_sweep, summarize, write_records, Cell, CellFailure,
    ExperimentRecord, ExperimentResult, Stats, SweepGrid, RESULT_COLUMNS,
};
