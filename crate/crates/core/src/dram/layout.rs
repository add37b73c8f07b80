use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Result, SimError};

/// Allowed simultaneous activation group sizes.
pub const GROUP_SIZES: [usize; 5] = [2, 4, 8, 16, 32];
/// Widest address span (in bits) a group may cover.
pub const MAX_SPAN_BITS: u8 = 5;

/// One contiguous run of physical rows sharing sense amplifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Extent {
    pub first: u32,
    pub count: u32,
}

impl Extent {
    pub fn contains(&self, row: u32) -> bool {
        row >= self.first && row < self.first + self.count
    }
}

/// Ordered subarray extents of one bank (every bank shares the layout).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubarrayLayout {
    extents: Vec<Extent>,
}

impl SubarrayLayout {
    pub fn from_sizes(sizes: &[u32]) -> Result<Self> {
        let mut first = 0;
        let mut extents = Vec::with_capacity(sizes.len());
        for &count in sizes {
            extents.push(Extent { first, count });
            first += count;
        }
        let l = Self { extents };
        l.validate(first)?;
        Ok(l)
    }

    /// Equal subarrays of `size` rows; a shorter remainder forms the last subarray.
    pub fn uniform(rows: u32, size: u32) -> Result<Self> {
        if size < 2 {
            return Err(SimError::Config("subarray size must be at least 2".into()));
        }
        let mut sizes = vec![size; (rows / size) as usize];
        let rem = rows % size;
        if rem > 0 {
            match sizes.last_mut() {
                Some(last) if rem < 2 => *last += rem,
                _ => sizes.push(rem),
            }
        }
        Self::from_sizes(&sizes)
    }

    /// Random layout with sizes drawn from `[min, max]`, covering `rows`.
    pub fn random<R: Rng>(rng: &mut R, rows: u32, min: u32, max: u32) -> Result<Self> {
        if min < 2 || max < min || rows < min {
            return Err(SimError::Config("bad random layout bounds".into()));
        }
        let mut sizes = Vec::new();
        let mut left = rows;
        while left > 0 {
            let s = rng.gen_range(min..=max).min(left);
            if left - s > 0 && left - s < min {
                sizes.push(left);
                break;
            }
            sizes.push(s);
            left -= s;
        }
        Self::from_sizes(&sizes)
    }

    pub fn validate(&self, rows: u32) -> Result<()> {
        let mut next = 0;
        for e in &self.extents {
            if e.first != next {
                return Err(SimError::Config(format!("subarray at row {} leaves a gap or overlap", e.first)));
            }
            if e.count < 2 {
                return Err(SimError::Config(format!("subarray at row {} has fewer than 2 rows", e.first)));
            }
            next = e.first + e.count;
        }
        if next != rows {
            return Err(SimError::Config(format!("subarrays cover {next} rows, bank has {rows}")));
        }
        Ok(())
    }

    pub fn extents(&self) -> &[Extent] {
        &self.extents
    }

    pub fn rows(&self) -> u32 {
        self.extents.last().map_or(0, |e| e.first + e.count)
    }

    pub fn sizes(&self) -> Vec<u32> {
        self.extents.iter().map(|e| e.count).collect()
    }

    pub fn subarray_of(&self, row: u32) -> Option<usize> {
        let i = self.extents.partition_point(|e| e.first + e.count <= row);
        (i < self.extents.len() && self.extents[i].contains(row)).then_some(i)
    }

    pub fn extent_of(&self, row: u32) -> Option<Extent> {
        self.subarray_of(row).map(|i| self.extents[i])
    }

    pub fn same_subarray(&self, a: u32, b: u32) -> bool {
        matches!((self.subarray_of(a), self.subarray_of(b)), (Some(x), Some(y)) if x == y)
    }
}

/// Which physical rows a violated ACT-PRE-ACT sequence opens together.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimraGroupMap {
    /// Per subarray span in address bits (0 disables multi-row activation).
    ///
    /// For `r1`, `r2` in one subarray whose subarray-relative offsets differ only
    /// within the low `span` bits, the group is every row of the enclosing
    /// `2^span` block that agrees with `r2` on all bits where `r1` and `r2`
    /// agree. When the differing bits are the lowest `k` bits this is the
    /// aligned block of `2^k` consecutive rows containing `r2`. The block must
    /// lie wholly inside the subarray.
    Aligned { span_bits: Vec<u8> },
    /// Explicit `(r1, r2) -> rows` table.
    Table(BTreeMap<(u32, u32), Vec<u32>>),
}

impl SimraGroupMap {
    pub fn uniform(layout: &SubarrayLayout, span: u8) -> Self {
        SimraGroupMap::Aligned { span_bits: vec![span; layout.extents().len()] }
    }

    /// Random spans in `0..=MAX_SPAN_BITS`, bounded so each subarray holds a full block.
    pub fn random<R: Rng>(rng: &mut R, layout: &SubarrayLayout) -> Self {
        let span_bits = layout
            .extents()
            .iter()
            .map(|e| {
                let fit = (31 - e.count.leading_zeros()) as u8;
                rng.gen_range(0..=MAX_SPAN_BITS.min(fit))
            })
            .collect();
        SimraGroupMap::Aligned { span_bits }
    }

    pub fn validate(&self, layout: &SubarrayLayout) -> Result<()> {
        match self {
            SimraGroupMap::Aligned { span_bits } => {
                if span_bits.len() != layout.extents().len() {
                    return Err(SimError::Config("group span list must have one entry per subarray".into()));
                }
                if let Some(s) = span_bits.iter().find(|&&s| s > MAX_SPAN_BITS) {
                    return Err(SimError::Config(format!("group span {s} exceeds {MAX_SPAN_BITS} bits")));
                }
                Ok(())
            }
            SimraGroupMap::Table(t) => {
                for ((r1, r2), rows) in t {
                    if !GROUP_SIZES.contains(&rows.len()) {
                        return Err(SimError::Config(format!("group ({r1},{r2}) has size {}", rows.len())));
                    }
                    if !rows.iter().all(|&r| layout.same_subarray(r, *r2)) || !layout.same_subarray(*r1, *r2) {
                        return Err(SimError::Config(format!("group ({r1},{r2}) spans subarrays")));
                    }
                }
                Ok(())
            }
        }
    }

    /// Rows opened by ACT `r1`, PRE, ACT `r2`, or `None` when the pair has no group.
    pub fn group(&self, layout: &SubarrayLayout, r1: u32, r2: u32) -> Option<Vec<u32>> {
        match self {
            SimraGroupMap::Table(t) => t.get(&(r1, r2)).cloned(),
            SimraGroupMap::Aligned { span_bits } => {
                let s = layout.subarray_of(r2)?;
                if layout.subarray_of(r1)? != s {
                    return None;
                }
                let e = layout.extents()[s];
                let span = *span_bits.get(s)?;
                let (o1, o2) = (r1 - e.first, r2 - e.first);
                let diff = o1 ^ o2;
                if diff == 0 || span == 0 || diff >> span != 0 {
                    return None;
                }
                let block = 1u32 << span;
                let base = o2 & !(block - 1);
                if base + block > e.count {
                    return None;
                }
                let fixed = o2 & !diff;
                let rows = (base..base + block)
                    .filter(|o| o & !diff == fixed)
                    .map(|o| e.first + o)
                    .collect();
                Some(rows)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_layout_and_lookup() {
        let l = SubarrayLayout::uniform(20, 8).unwrap();
        assert_eq!(l.sizes(), vec![8, 8, 4]);
        assert_eq!(l.subarray_of(0), Some(0));
        assert_eq!(l.subarray_of(8), Some(1));
        assert_eq!(l.subarray_of(19), Some(2));
        assert_eq!(l.subarray_of(20), None);
        assert!(l.same_subarray(9, 15));
        assert!(!l.same_subarray(7, 8));
        assert_eq!(SubarrayLayout::uniform(17, 8).unwrap().sizes(), vec![8, 9]);
    }

    #[test]
    fn bad_layouts_rejected() {
        assert!(SubarrayLayout::from_sizes(&[4, 1]).is_err());
        let l = SubarrayLayout::from_sizes(&[4, 4]).unwrap();
        assert!(l.validate(9).is_err());
    }

    #[test]
    fn low_bit_groups_are_aligned_blocks() {
        let l = SubarrayLayout::uniform(64, 64).unwrap();
        let m = SimraGroupMap::uniform(&l, 5);
        assert_eq!(m.group(&l, 4, 5).unwrap(), vec![4, 5]);
        assert_eq!(m.group(&l, 10, 21).unwrap(), (0..32).collect::<Vec<_>>());
        assert_eq!(m.group(&l, 33, 34).unwrap(), vec![32, 33, 34, 35]);
        // Differing bits 1 and 2 give a strided group sandwiching odd rows.
        assert_eq!(m.group(&l, 2, 4).unwrap(), vec![0, 2, 4, 6]);
        assert!(m.group(&l, 3, 3).is_none());
        assert!(m.group(&l, 0, 32).is_none());
    }

    #[test]
    fn groups_respect_subarray_bounds() {
        let l = SubarrayLayout::from_sizes(&[40, 24]).unwrap();
        let m = SimraGroupMap::uniform(&l, 5);
        assert!(m.group(&l, 39, 40).is_none());
        // The second 32-block of subarray 0 is incomplete.
        assert!(m.group(&l, 32, 33).is_none());
        assert!(m.group(&l, 40, 41).is_none());
    }

    proptest! {
        #[test]
        fn random_maps_yield_valid_groups(seed in any::<u64>()) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let l = SubarrayLayout::random(&mut rng, 256, 2, 80).unwrap();
            let m = SimraGroupMap::random(&mut rng, &l);
            m.validate(&l).unwrap();
            for r2 in 0..256u32 {
                for k in 0..6 {
                    let r1 = r2 ^ (1 << k);
                    if let Some(g) = m.group(&l, r1, r2) {
                        prop_assert!(GROUP_SIZES.contains(&g.len()));
                        prop_assert!(g.contains(&r1) && g.contains(&r2));
                        prop_assert!(g.iter().all(|&r| l.same_subarray(r, r2)));
                    }
                }
            }
        }
    }
}
