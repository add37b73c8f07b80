//! DRAM organization, addressing, command timing and row-buffer state.

mod address;
mod bank;
mod command;
mod layout;
mod majority;
mod timing;

pub use address::{DramAddress, Geometry, RowMapping};
pub use bank::{ActKind, AnalogEffect, BankState, Device, DramConfig, UndefinedPolicy};
pub use command::{parse_trace, write_trace, CommandEvent, CommandKind};
pub use layout::{Extent, SimraGroupMap, SubarrayLayout, GROUP_SIZES, MAX_SPAN_BITS};
pub use majority::majority_overwrite;
pub use timing::{fmt_ns, ns, parse_ns, to_ns, Ps, TimingParams, PS_PER_NS};
