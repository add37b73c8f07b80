use std::fmt;

use crate::dram::Extent;
use crate::error::{Result, SimError};

/// Position bin of a row within its subarray.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Region {
    Beginning,
    BeginningMiddle,
    Middle,
    MiddleEnd,
    End,
}

impl Region {
    pub const ALL: [Region; 5] = [Region::Beginning, Region::BeginningMiddle, Region::Middle, Region::MiddleEnd, Region::End];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Region::Beginning => "beginning",
            Region::BeginningMiddle => "beginning-middle",
            Region::Middle => "middle",
            Region::MiddleEnd => "middle-end",
            Region::End => "end",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| SimError::Config(format!("unknown region `{s}`")))
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Five bins of `floor(count / 5)` rows each; the remainder joins `End`.
pub fn classify_region(row: u32, extent: Extent) -> Region {
    debug_assert!(extent.contains(row));
    let bin = extent.count / 5;
    let off = row.saturating_sub(extent.first);
    if bin == 0 {
        return Region::End;
    }
    Region::ALL[((off / bin) as usize).min(4)]
}
