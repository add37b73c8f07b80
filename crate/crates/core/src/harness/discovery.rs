use std::collections::BTreeMap;

use crate::chip::{Chip, ChipSetup};
use crate::dram::{ns, CommandEvent, Device, Ps, SimraGroupMap, SubarrayLayout, UndefinedPolicy, MAX_SPAN_BITS};
use crate::error::{Result, SimError};

const SRC: u8 = 0xa5;
const DST: u8 = 0x5a;
const BACKGROUND: u8 = 0x00;
const MARKER: u8 = 0xc3;

/// Drives a chip with hand-built probe sequences on a running clock.
struct Prober {
    chip: Chip,
    t: Ps,
    bank: u32,
}

impl Prober {
    fn new(setup: &ChipSetup) -> Result<Self> {
        let mut s = setup.clone();
        let mut dev: Device = (*s.dev).clone();
        // probes that open no group are expected; read them as plain activations
        dev.dram.undefined = UndefinedPolicy::Nominal;
        s.dev = std::sync::Arc::new(dev);
        s.trr = None;
        s.prac = None;
        Ok(Self { chip: s.build(0)?, t: ns(100.0), bank: setup.bank })
    }

    fn dev(&self) -> &Device {
        self.chip.device()
    }

    fn cmd(&mut self, c: CommandEvent) -> Result<()> {
        self.chip.execute(&c)?;
        Ok(())
    }

    fn act(&mut self, row: u32) -> Result<()> {
        let logical = self.dev().logical(row)?;
        self.cmd(CommandEvent::act(self.t, self.bank, logical))
    }

    fn pre(&mut self) -> Result<()> {
        self.cmd(CommandEvent::pre(self.t, self.bank))
    }

    fn idle(&mut self) {
        let rc = self.dev().timing.t_rc;
        self.t += rc;
    }

    /// One CoMRA cycle; true when `dst` ends up holding `src`'s data.
    fn copies(&mut self, src: u32, dst: u32) -> Result<bool> {
        let (t_ras, gap) = (self.dev().timing.t_ras, ns(7.5));
        self.chip.fill_row(src, SRC);
        self.chip.fill_row(dst, DST);
        self.act(src)?;
        self.t += t_ras;
        self.pre()?;
        self.t += gap;
        self.act(dst)?;
        self.t += t_ras;
        self.pre()?;
        self.idle();
        Ok(self.chip.row_data(dst).iter().all(|&b| b == SRC))
    }

    /// ACT `r1`, PRE, ACT `r2` with the given gaps, then writes a marker;
    /// returns the rows in `scan` that hold the marker afterwards.
    fn group(&mut self, r1: u32, r2: u32, gaps: (Ps, Ps), scan: &[u32]) -> Result<Vec<u32>> {
        for &r in scan {
            self.chip.fill_row(r, BACKGROUND);
        }
        let t_ras = self.dev().timing.t_ras;
        self.act(r1)?;
        self.t += gaps.0;
        self.pre()?;
        self.t += gaps.1;
        self.act(r2)?;
        self.t += ns(1.0);
        self.cmd(CommandEvent::wr(self.t, self.bank, vec![MARKER]))?;
        self.t += t_ras;
        self.pre()?;
        self.idle();
        let hit: Vec<u32> = scan.iter().copied().filter(|&r| self.chip.row_data(r)[0] == MARKER).collect();
        for &r in &hit {
            self.chip.fill_row(r, BACKGROUND);
        }
        Ok(hit)
    }
}

/// Finds subarray boundaries by copying between every pair of adjacent rows.
pub fn discover_subarrays(setup: &ChipSetup) -> Result<SubarrayLayout> {
    let mut p = Prober::new(setup)?;
    let rows = setup.dev.geometry.rows;
    let mut sizes = Vec::new();
    let mut first = 0;
    for r in 0..rows - 1 {
        if !p.copies(r, r + 1)? {
            sizes.push(r + 1 - first);
            first = r + 1;
        }
    }
    sizes.push(rows - first);
    SubarrayLayout::from_sizes(&sizes)
}

/// Same result by copying between every pair of rows and clustering.
pub fn discover_subarrays_exhaustive(setup: &ChipSetup) -> Result<SubarrayLayout> {
    let mut p = Prober::new(setup)?;
    let rows = setup.dev.geometry.rows as usize;
    let mut parent: Vec<usize> = (0..rows).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            p[r] = p[p[r]];
            r = p[r];
        }
        r
    }
    for a in 0..rows {
        for b in a + 1..rows {
            if find(&mut parent, a) == find(&mut parent, b) {
                continue;
            }
            if p.copies(a as u32, b as u32)? {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[rb.max(ra)] = ra.min(rb);
            }
        }
    }
    let mut clusters: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
    for r in 0..rows {
        let root = find(&mut parent, r);
        clusters.entry(root).or_default().push(r as u32);
    }
    let mut sizes = Vec::new();
    for members in clusters.values() {
        let contiguous = members.windows(2).all(|w| w[1] == w[0] + 1);
        if !contiguous {
            return Err(SimError::Diagnostic(format!(
                "rows sharing copies are not contiguous: {}..={}",
                members[0],
                members[members.len() - 1]
            )));
        }
        sizes.push(members.len() as u32);
    }
    SubarrayLayout::from_sizes(&sizes)
}

/// Rows opened together by the pair, with SiMRA timing, or with any gaps.
pub fn probe_group(setup: &ChipSetup, r1: u32, r2: u32, gaps: Option<(Ps, Ps)>) -> Result<Vec<u32>> {
    let mut p = Prober::new(setup)?;
    let w = setup.dev.dram.simra_window;
    let e = setup
        .dev
        .layout
        .extent_of(r2)
        .ok_or_else(|| SimError::Address(format!("row {r2} outside the bank")))?;
    let scan: Vec<u32> = (e.first..e.first + e.count).collect();
    let g = p.group(r1, r2, gaps.unwrap_or((w, w)), &scan)?;
    Ok(if g.len() > 1 { g } else { Vec::new() })
}

/// Recovers the per-subarray group span: for each subarray, pairs that
/// differ in one address bit are probed from the lowest bit upward.
pub fn discover_simra_groups(setup: &ChipSetup, layout: &SubarrayLayout) -> Result<SimraGroupMap> {
    let mut p = Prober::new(setup)?;
    let w = setup.dev.dram.simra_window;
    let mut spans = Vec::new();
    for e in layout.extents() {
        let scan: Vec<u32> = (e.first..e.first + e.count).collect();
        let mut span = 0u8;
        for k in 0..MAX_SPAN_BITS {
            let off = 1u32 << k;
            if off >= e.count {
                break;
            }
            let g = p.group(e.first + off, e.first, (w, w), &scan)?;
            if g.len() != 2 || !g.contains(&e.first) || !g.contains(&(e.first + off)) {
                break;
            }
            span = k + 1;
        }
        spans.push(span);
    }
    Ok(SimraGroupMap::Aligned { span_bits: spans })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disturbance::{ChipProfile, ThresholdMap};
    use crate::dram::{Geometry, GROUP_SIZES};

    fn setup(sizes: &[u32], spans: Vec<u8>) -> ChipSetup {
        let rows = sizes.iter().sum();
        let layout = SubarrayLayout::from_sizes(sizes).unwrap();
        let groups = SimraGroupMap::Aligned { span_bits: spans };
        let dev = Device::new(Geometry { banks: 1, rows, row_bytes: 8, ..Geometry::default() }, layout, groups).unwrap();
        ChipSetup::new(dev, ChipProfile::constant(1e9), ThresholdMap::constant(rows, 1e9)).unwrap()
    }

    #[test]
    fn two_subarrays_of_eight() {
        let s = setup(&[8, 8], vec![2, 3]);
        assert_eq!(discover_subarrays(&s).unwrap().sizes(), vec![8, 8]);
        assert_eq!(discover_subarrays_exhaustive(&s).unwrap().sizes(), vec![8, 8]);
        assert_eq!(discover_simra_groups(&s, &s.dev.layout).unwrap(), s.dev.groups);
    }

    #[test]
    fn single_subarray() {
        let s = setup(&[32], vec![5]);
        assert_eq!(discover_subarrays(&s).unwrap().sizes(), vec![32]);
    }

    #[test]
    fn four_row_groups() {
        let s = setup(&[64, 64], vec![2, 2]);
        let map = discover_simra_groups(&s, &discover_subarrays(&s).unwrap()).unwrap();
        for r2 in (0..128).step_by(5) {
            let r1 = r2 ^ 3;
            let g = map.group(&s.dev.layout, r1, r2).unwrap();
            assert_eq!(g.len(), 4);
            assert!(GROUP_SIZES.contains(&g.len()));
            assert_eq!(probe_group(&s, r1, r2, None).unwrap(), g);
        }
    }

    #[test]
    fn nominal_timing_opens_no_group() {
        let s = setup(&[64], vec![5]);
        let t = s.dev.timing;
        assert!(probe_group(&s, 1, 0, Some((t.t_ras, t.t_rp))).unwrap().is_empty());
        assert_eq!(probe_group(&s, 1, 0, None).unwrap(), vec![0, 1]);
    }
}
