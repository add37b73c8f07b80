use crate::error::{Result, SimError};

/// Sizes of every level of the DRAM hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geometry {
    pub channels: u32,
    pub ranks: u32,
    pub chips: u32,
    pub banks: u32,
    pub rows: u32,
    pub columns: u32,
    pub row_bytes: usize,
}

impl Default for Geometry {
    fn default() -> Self {
        Self { channels: 1, ranks: 1, chips: 8, banks: 16, rows: 4096, columns: 1024, row_bytes: 1024 }
    }
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.ranks == 0 || self.chips == 0 || self.banks == 0 {
            return Err(SimError::Config("geometry counts must be positive".into()));
        }
        if self.rows < 2 || self.columns == 0 || self.row_bytes == 0 {
            return Err(SimError::Config("geometry needs at least 2 rows and non-empty rows".into()));
        }
        Ok(())
    }
}

/// Fully qualified DRAM location. `row` is a logical row index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, PartialOrd, Ord, Hash)]
pub struct DramAddress {
    pub channel: u32,
    pub rank: u32,
    pub chip: u32,
    pub bank: u32,
    pub row: u32,
    pub column: u32,
}

impl DramAddress {
    pub fn bank_row(bank: u32, row: u32) -> Self {
        Self { bank, row, ..Default::default() }
    }

    pub fn check(&self, g: &Geometry) -> Result<()> {
        let fields = [
            ("channel", self.channel, g.channels),
            ("rank", self.rank, g.ranks),
            ("chip", self.chip, g.chips),
            ("bank", self.bank, g.banks),
            ("row", self.row, g.rows),
            ("column", self.column, g.columns),
        ];
        for (name, v, max) in fields {
            if v >= max {
                return Err(SimError::Address(format!("{name} {v} out of range (< {max})")));
            }
        }
        Ok(())
    }
}

/// Logical to physical row permutation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowMapping {
    Identity,
    /// Output bit `i` takes input bit `table[i]`; `table` is a permutation of `0..bits`.
    /// Rows at or above `2^bits` map to themselves.
    BitRemap { table: Vec<u8> },
    /// Explicit permutation of `0..table.len()`.
    Table { table: Vec<u32> },
}

impl RowMapping {
    /// Mapping that reverses the low `bits` row address bits.
    pub fn bit_reversal(bits: u8) -> Self {
        RowMapping::BitRemap { table: (0..bits).rev().collect() }
    }

    pub fn validate(&self, rows: u32) -> Result<()> {
        match self {
            RowMapping::Identity => Ok(()),
            RowMapping::BitRemap { table } => {
                let mut seen = vec![false; table.len()];
                for &b in table {
                    let slot = seen
                        .get_mut(b as usize)
                        .ok_or_else(|| SimError::Config(format!("bit remap entry {b} out of range")))?;
                    if *slot {
                        return Err(SimError::Config(format!("bit remap repeats bit {b}")));
                    }
                    *slot = true;
                }
                if table.len() >= 32 || u64::from(rows) % (1u64 << table.len()) != 0 {
                    return Err(SimError::Config("row count must be a multiple of the bit remap span".into()));
                }
                Ok(())
            }
            RowMapping::Table { table } => {
                if table.len() != rows as usize {
                    return Err(SimError::Config(format!(
                        "explicit row table has {} entries, geometry has {rows} rows",
                        table.len()
                    )));
                }
                let mut seen = vec![false; table.len()];
                for &p in table {
                    let slot = seen
                        .get_mut(p as usize)
                        .ok_or_else(|| SimError::Config(format!("row table entry {p} out of range")))?;
                    if *slot {
                        return Err(SimError::Config(format!("row table repeats row {p}")));
                    }
                    *slot = true;
                }
                Ok(())
            }
        }
    }

    fn remap_bits(table: &[u8], row: u32, inverse: bool) -> u32 {
        let n = table.len();
        let low_mask = if n >= 32 { u32::MAX } else { (1u32 << n) - 1 };
        let mut out = row & !low_mask;
        for (i, &src) in table.iter().enumerate() {
            let (from, to) = if inverse { (i, src as usize) } else { (src as usize, i) };
            if row >> from & 1 == 1 {
                out |= 1 << to;
            }
        }
        out
    }

    /// Logical row to physical row.
    pub fn map_row(&self, logical: u32, rows: u32) -> Result<u32> {
        if logical >= rows {
            return Err(SimError::Address(format!("row {logical} out of range (< {rows})")));
        }
        Ok(match self {
            RowMapping::Identity => logical,
            RowMapping::BitRemap { table } => Self::remap_bits(table, logical, false),
            RowMapping::Table { table } => table[logical as usize],
        })
    }

    /// Physical row to logical row.
    pub fn unmap_row(&self, physical: u32, rows: u32) -> Result<u32> {
        if physical >= rows {
            return Err(SimError::Address(format!("row {physical} out of range (< {rows})")));
        }
        Ok(match self {
            RowMapping::Identity => physical,
            RowMapping::BitRemap { table } => Self::remap_bits(table, physical, true),
            RowMapping::Table { table } => table
                .iter()
                .position(|&p| p == physical)
                .map(|i| i as u32)
                .ok_or_else(|| SimError::Address(format!("row {physical} has no preimage")))?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn documented_examples() {
        assert_eq!(RowMapping::Identity.map_row(7, 16).unwrap(), 7);
        assert_eq!(RowMapping::bit_reversal(3).map_row(0b001, 8).unwrap(), 0b100);
        let swap = RowMapping::Table { table: vec![1, 0] };
        assert_eq!(swap.map_row(1, 2).unwrap(), 0);
        assert!(RowMapping::Identity.map_row(16, 16).is_err());
    }

    #[test]
    fn invalid_tables_rejected() {
        assert!(RowMapping::Table { table: vec![0, 0] }.validate(2).is_err());
        assert!(RowMapping::BitRemap { table: vec![0, 0] }.validate(4).is_err());
        assert!(RowMapping::BitRemap { table: vec![0, 1, 2] }.validate(4).is_err());
    }

    #[test]
    fn address_bounds() {
        let g = Geometry::default();
        assert!(DramAddress::bank_row(0, 5).check(&g).is_ok());
        assert!(DramAddress::bank_row(16, 5).check(&g).is_err());
    }

    proptest! {
        #[test]
        fn mapping_inverse_is_identity(seed in any::<u64>(), bits in 1u8..8) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let rows = 1u32 << bits;
            let mut perm: Vec<u8> = (0..bits).collect();
            perm.shuffle(&mut rng);
            let mut tab: Vec<u32> = (0..rows).collect();
            tab.shuffle(&mut rng);
            for m in [RowMapping::BitRemap { table: perm }, RowMapping::Table { table: tab }, RowMapping::Identity] {
                m.validate(rows).unwrap();
                for r in 0..rows {
                    let p = m.map_row(r, rows).unwrap();
                    prop_assert_eq!(m.unmap_row(p, rows).unwrap(), r);
                }
            }
        }
    }
}
