//! Per-bank row-buffer state and the analog side effects of violated timings.

use rand::Rng;
use rand::SeedableRng;

use super::address::{Geometry, RowMapping};
use super::command::{CommandEvent, CommandKind};
use super::layout::{SimraGroupMap, SubarrayLayout};
use super::majority::majority_overwrite;
use super::timing::{ns, Ps, TimingParams};
use crate::error::{Result, SimError};
use crate::rng::SimRng;

/// What to do with a command sequence that matches no modeled behavior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UndefinedPolicy {
    Error,
    Nominal,
}

/// Analog behavior knobs for violated timings.
#[derive(Debug, Clone, PartialEq)]
pub struct DramConfig {
    /// PRE to ACT gaps below this copy the latched row into the next one.
    pub copy_window: Ps,
    /// Upper bound of both gaps of an ACT-PRE-ACT multi-row activation.
    pub simra_window: Ps,
    /// ACT to PRE gaps at or below this only partially activate the group.
    pub partial_gap: Ps,
    /// Probability that a group row is activated under partial activation.
    pub p_act: f64,
    pub tie_bias: bool,
    pub undefined: UndefinedPolicy,
}

impl DramConfig {
    pub fn for_timing(t: &TimingParams) -> Self {
        Self {
            copy_window: t.t_rp,
            simra_window: ns(3.0),
            partial_gap: ns(1.5),
            p_act: 1.0 / 2.28,
            tie_bias: false,
            undefined: UndefinedPolicy::Error,
        }
    }

    pub fn validate(&self, t: &TimingParams) -> Result<()> {
        if !(self.p_act > 0.0 && self.p_act <= 1.0) {
            return Err(SimError::Config("p_act must lie in (0, 1]".into()));
        }
        if self.copy_window > t.t_rp {
            return Err(SimError::Config("copy window cannot exceed tRP".into()));
        }
        if self.simra_window == 0 || self.simra_window >= t.t_ras || self.partial_gap > self.simra_window {
            return Err(SimError::Config("need 0 < partial gap <= SiMRA window < tRAS".into()));
        }
        Ok(())
    }
}

impl Default for DramConfig {
    fn default() -> Self {
        Self::for_timing(&TimingParams::default())
    }
}

/// Static description of a simulated device shared by all its banks.
#[derive(Debug, Clone, PartialEq)]
pub struct Device {
    pub geometry: Geometry,
    pub timing: TimingParams,
    pub dram: DramConfig,
    pub mapping: RowMapping,
    pub layout: SubarrayLayout,
    pub groups: SimraGroupMap,
}

impl Device {
    pub fn new(geometry: Geometry, layout: SubarrayLayout, groups: SimraGroupMap) -> Result<Self> {
        let timing = TimingParams::default();
        let d = Self {
            geometry,
            timing,
            dram: DramConfig::for_timing(&timing),
            mapping: RowMapping::Identity,
            layout,
            groups,
        };
        d.validate()?;
        Ok(d)
    }

    /// Single-bank device with uniform subarrays and 32-row group spans.
    pub fn small(rows: u32, subarray: u32, row_bytes: usize) -> Result<Self> {
        let geometry = Geometry { banks: 1, rows, row_bytes, ..Geometry::default() };
        let layout = SubarrayLayout::uniform(rows, subarray)?;
        let groups = SimraGroupMap::uniform(&layout, 5);
        Self::new(geometry, layout, groups)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.timing.validate()?;
        self.dram.validate(&self.timing)?;
        self.mapping.validate(self.geometry.rows)?;
        self.layout.validate(self.geometry.rows)?;
        self.groups.validate(&self.layout)
    }

    pub fn physical(&self, logical: u32) -> Result<u32> {
        self.mapping.map_row(logical, self.geometry.rows)
    }

    pub fn logical(&self, physical: u32) -> Result<u32> {
        self.mapping.unmap_row(physical, self.geometry.rows)
    }
}

/// Kind of hammer an activation belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActKind {
    RowHammer,
    Comra,
    Simra,
}

impl ActKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ActKind::RowHammer => "rh",
            ActKind::Comra => "comra",
            ActKind::Simra => "simra",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rh" | "rowhammer" => Ok(ActKind::RowHammer),
            "comra" => Ok(ActKind::Comra),
            "simra" => Ok(ActKind::Simra),
            _ => Err(SimError::Config(format!("unknown activation kind '{s}'"))),
        }
    }

    pub const ALL: [ActKind; 3] = [ActKind::RowHammer, ActKind::Comra, ActKind::Simra];
}

/// Side effect of applying one command. Rows are physical.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalogEffect {
    /// Rows that were open for `t_on` and closed at `time`.
    Activation { time: Ps, rows: Vec<u32>, kind: ActKind, t_on: Ps },
    Copy { time: Ps, src: u32, dst: u32 },
    Majority { time: Ps, rows: Vec<u32> },
    GroupWrite { time: Ps, rows: Vec<u32> },
    Read { time: Ps, data: Vec<u8> },
    Refresh { time: Ps, rows: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq)]
enum Opened {
    Nominal,
    ComraDst { src: u32 },
    Simra { partial: bool },
}

#[derive(Debug, Clone, PartialEq)]
enum Buffer {
    /// Sense amplifiers hold this row's stored contents, unmodified.
    Row(u32),
    Owned(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq)]
struct Closed {
    row: u32,
    kind: ActKind,
    t_on: Ps,
    at: Ps,
}

/// Row-buffer and storage state of one bank.
#[derive(Debug, Clone)]
pub struct BankState {
    pub bank: u32,
    open: Vec<u32>,
    opened: Opened,
    open_since: Ps,
    buffer: Option<Buffer>,
    last_pre: Option<Ps>,
    last_time: Option<Ps>,
    pending: Option<Closed>,
    data: Vec<Vec<u8>>,
    last_refresh: Vec<Ps>,
    ref_count: u64,
    rng: SimRng,
}

impl BankState {
    pub fn new(bank: u32, dev: &Device, seed: u64) -> Self {
        let rows = dev.geometry.rows as usize;
        Self {
            bank,
            open: Vec::new(),
            opened: Opened::Nominal,
            open_since: 0,
            buffer: None,
            last_pre: None,
            last_time: None,
            pending: None,
            data: vec![vec![0u8; dev.geometry.row_bytes]; rows],
            last_refresh: vec![0; rows],
            ref_count: 0,
            rng: SimRng::seed_from_u64(seed),
        }
    }

    /// Physical rows currently open.
    pub fn open_rows(&self) -> &[u32] {
        &self.open
    }

    pub fn row_data(&self, physical: u32) -> &[u8] {
        &self.data[physical as usize]
    }

    /// Test-infrastructure write that bypasses the command bus.
    pub fn fill_row(&mut self, physical: u32, byte: u8) {
        self.data[physical as usize].fill(byte);
    }

    pub fn set_row(&mut self, physical: u32, contents: &[u8]) -> Result<()> {
        let row = &mut self.data[physical as usize];
        if contents.len() != row.len() {
            return Err(SimError::Shape("row contents length mismatch".into()));
        }
        row.copy_from_slice(contents);
        Ok(())
    }

    /// Flips one stored bit (disturbance error injection).
    pub fn set_bit(&mut self, physical: u32, bit: usize, value: bool) {
        let row = &mut self.data[physical as usize];
        let (byte, off) = (bit / 8 % row.len(), bit % 8);
        if value {
            row[byte] |= 1 << off;
        } else {
            row[byte] &= !(1 << off);
        }
    }

    pub fn last_refresh(&self, physical: u32) -> Ps {
        self.last_refresh[physical as usize]
    }

    pub fn ref_count(&self) -> u64 {
        self.ref_count
    }

    fn undefined(&self, dev: &Device, time: Ps, detail: String) -> Result<()> {
        match dev.dram.undefined {
            UndefinedPolicy::Error => Err(SimError::UndefinedAnalog { time_ps: time, bank: self.bank, detail }),
            UndefinedPolicy::Nominal => {
                log::debug!("bank {} at {time} ps: undefined analog behavior treated as nominal: {detail}", self.bank);
                Ok(())
            }
        }
    }

    fn flush_pending(&mut self, out: &mut Vec<AnalogEffect>) {
        if let Some(c) = self.pending.take() {
            out.push(AnalogEffect::Activation { time: c.at, rows: vec![c.row], kind: c.kind, t_on: c.t_on });
        }
    }

    /// Emits any activation whose kind was still undecided.
    pub fn flush(&mut self) -> Vec<AnalogEffect> {
        let mut out = Vec::new();
        self.flush_pending(&mut out);
        out
    }

    fn fill_payload(row_bytes: usize, payload: &[u8]) -> Result<Vec<u8>> {
        if payload.is_empty() || row_bytes % payload.len() != 0 {
            return Err(SimError::Shape(format!(
                "WR payload of {} bytes does not tile a {row_bytes}-byte row",
                payload.len()
            )));
        }
        Ok(payload.iter().copied().cycle().take(row_bytes).collect())
    }

    /// Applies one command and returns its analog effects.
    pub fn apply_command(&mut self, cmd: &CommandEvent, dev: &Device) -> Result<Vec<AnalogEffect>> {
        if let Some(prev) = self.last_time {
            if cmd.time <= prev {
                return Err(SimError::Protocol(format!(
                    "bank {}: command at {} ps not after previous at {prev} ps",
                    self.bank, cmd.time
                )));
            }
        }
        self.last_time = Some(cmd.time);
        let mut out = Vec::new();
        match cmd.kind {
            CommandKind::Act => self.on_act(cmd.time, dev.physical(cmd.addr.row)?, dev, &mut out)?,
            CommandKind::Pre => self.on_pre(cmd.time, dev, &mut out)?,
            CommandKind::Rd => {
                self.flush_pending(&mut out);
                let data = match &self.buffer {
                    Some(Buffer::Row(r)) => self.data[*r as usize].clone(),
                    Some(Buffer::Owned(v)) => v.clone(),
                    None => return Err(SimError::Protocol(format!("bank {}: RD with no open row", self.bank))),
                };
                out.push(AnalogEffect::Read { time: cmd.time, data });
            }
            CommandKind::Wr => {
                self.flush_pending(&mut out);
                if self.open.is_empty() {
                    return Err(SimError::Protocol(format!("bank {}: WR with no open row", self.bank)));
                }
                let payload = cmd.payload.as_deref().unwrap_or(&[0]);
                self.buffer = Some(Buffer::Owned(Self::fill_payload(dev.geometry.row_bytes, payload)?));
                if self.open.len() > 1 {
                    out.push(AnalogEffect::GroupWrite { time: cmd.time, rows: self.open.clone() });
                }
            }
            CommandKind::Ref => {
                self.flush_pending(&mut out);
                let rows = self.periodic_rows(dev);
                self.ref_count += 1;
                out.extend(self.refresh(cmd.time, &rows)?);
            }
            CommandKind::Rfm => {
                self.flush_pending(&mut out);
                if !self.open.is_empty() {
                    return Err(SimError::Protocol(format!("bank {}: RFM with open rows", self.bank)));
                }
            }
        }
        Ok(out)
    }

    /// Rows covered by the next periodic REF of this bank.
    pub fn periodic_rows(&self, dev: &Device) -> Vec<u32> {
        let per_window = dev.timing.refs_per_window();
        let rows = u64::from(dev.geometry.rows);
        let per_ref = rows.div_ceil(per_window);
        let slot = self.ref_count % per_window;
        let lo = (slot * per_ref).min(rows);
        let hi = ((slot + 1) * per_ref).min(rows);
        (lo as u32..hi as u32).collect()
    }

    /// Marks `rows` refreshed at `time`. Rejected while any row is open.
    pub fn refresh(&mut self, time: Ps, rows: &[u32]) -> Result<Vec<AnalogEffect>> {
        if !self.open.is_empty() {
            return Err(SimError::Protocol(format!("bank {}: refresh with open rows {:?}", self.bank, self.open)));
        }
        let mut out = Vec::new();
        self.flush_pending(&mut out);
        for &r in rows {
            if let Some(slot) = self.last_refresh.get_mut(r as usize) {
                *slot = time;
            }
        }
        if !rows.is_empty() {
            out.push(AnalogEffect::Refresh { time, rows: rows.to_vec() });
        }
        Ok(out)
    }

    fn open_nominal(&mut self, time: Ps, row: u32) {
        self.open = vec![row];
        self.opened = Opened::Nominal;
        self.open_since = time;
        self.buffer = Some(Buffer::Row(row));
    }

    fn on_act(&mut self, time: Ps, row: u32, dev: &Device, out: &mut Vec<AnalogEffect>) -> Result<()> {
        if !self.open.is_empty() {
            return Err(SimError::Protocol(format!("bank {}: ACT while rows {:?} are open", self.bank, self.open)));
        }
        let gap = self.last_pre.map(|p| time - p);
        let t = &dev.timing;
        let cfg = &dev.dram;
        let pending = self.pending.clone();
        let (Some(gap), Some(prev)) = (gap, pending) else {
            self.flush_pending(out);
            self.open_nominal(time, row);
            return Ok(());
        };
        if gap >= t.t_rp && prev.t_on >= t.t_ras {
            self.flush_pending(out);
            self.open_nominal(time, row);
            return Ok(());
        }
        if prev.t_on <= cfg.simra_window && gap <= cfg.simra_window && prev.kind == ActKind::RowHammer {
            if let Some(group) = dev.groups.group(&dev.layout, prev.row, row) {
                self.pending = None;
                let contents: Vec<&[u8]> = group.iter().map(|&r| self.data[r as usize].as_slice()).collect();
                let maj = majority_overwrite(&contents, cfg.tie_bias)?;
                self.open = group;
                self.opened = Opened::Simra { partial: prev.t_on <= cfg.partial_gap };
                self.open_since = time;
                self.buffer = Some(Buffer::Owned(maj));
                return Ok(());
            }
            self.undefined(dev, time, format!("ACT-PRE-ACT pair ({}, {row}) activates no group", prev.row))?;
        } else if prev.t_on >= t.t_ras && gap < cfg.copy_window {
            self.pending = None;
            out.push(AnalogEffect::Activation { time: prev.at, rows: vec![prev.row], kind: ActKind::Comra, t_on: prev.t_on });
            if dev.layout.same_subarray(prev.row, row) {
                self.open = vec![row];
                self.opened = Opened::ComraDst { src: prev.row };
                self.open_since = time;
                self.buffer = Some(Buffer::Row(prev.row));
                out.push(AnalogEffect::Copy { time, src: prev.row, dst: row });
            } else {
                self.open_nominal(time, row);
            }
            return Ok(());
        } else {
            self.undefined(
                dev,
                time,
                format!("ACT-to-PRE {} ps then PRE-to-ACT {gap} ps matches no modeled window", prev.t_on),
            )?;
        }
        self.flush_pending(out);
        self.open_nominal(time, row);
        Ok(())
    }

    fn on_pre(&mut self, time: Ps, dev: &Device, out: &mut Vec<AnalogEffect>) -> Result<()> {
        self.last_pre = Some(time);
        if self.open.is_empty() {
            return Ok(());
        }
        let t_on = time - self.open_since;
        let rows = std::mem::take(&mut self.open);
        let buffer = self.buffer.take();
        match std::mem::replace(&mut self.opened, Opened::Nominal) {
            Opened::Nominal => {
                if let Some(Buffer::Owned(v)) = buffer {
                    self.data[rows[0] as usize] = v;
                }
                self.pending = Some(Closed { row: rows[0], kind: ActKind::RowHammer, t_on, at: time });
            }
            Opened::ComraDst { src } => {
                let dst = rows[0];
                match buffer {
                    Some(Buffer::Owned(v)) => self.data[dst as usize] = v,
                    _ => {
                        if src != dst {
                            let v = self.data[src as usize].clone();
                            self.data[dst as usize] = v;
                        }
                    }
                }
                self.pending = Some(Closed { row: dst, kind: ActKind::Comra, t_on, at: time });
            }
            Opened::Simra { partial } => {
                let Some(Buffer::Owned(v)) = buffer else {
                    return Err(SimError::Diagnostic("multi-row activation lost its row buffer".into()));
                };
                for &r in &rows {
                    if self.data[r as usize] != v {
                        self.data[r as usize].clone_from(&v);
                    }
                }
                let active: Vec<u32> = if partial {
                    rows.iter().copied().filter(|_| self.rng.gen_bool(dev.dram.p_act)).collect()
                } else {
                    rows.clone()
                };
                out.push(AnalogEffect::Majority { time, rows });
                out.push(AnalogEffect::Activation { time, rows: active, kind: ActKind::Simra, t_on });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dev() -> Device {
        Device::small(128, 64, 8).unwrap()
    }

    fn run(bank: &mut BankState, dev: &Device, cmds: &[CommandEvent]) -> Vec<AnalogEffect> {
        let mut out = Vec::new();
        for c in cmds {
            out.extend(bank.apply_command(c, dev).unwrap());
        }
        out.extend(bank.flush());
        out
    }

    #[test]
    fn comra_copies_at_short_gap() {
        let d = dev();
        let mut b = BankState::new(0, &d, 1);
        b.fill_row(3, 0xab);
        b.fill_row(5, 0x00);
        let t = ns(36.0);
        let fx = run(
            &mut b,
            &d,
            &[
                CommandEvent::act(0, 0, 3),
                CommandEvent::pre(t, 0),
                CommandEvent::act(t + ns(7.5), 0, 5),
                CommandEvent::pre(2 * t + ns(7.5), 0),
            ],
        );
        assert_eq!(b.row_data(5), &[0xab; 8]);
        assert!(fx.contains(&AnalogEffect::Copy { time: t + ns(7.5), src: 3, dst: 5 }));
        let kinds: Vec<ActKind> = fx
            .iter()
            .filter_map(|e| match e {
                AnalogEffect::Activation { kind, .. } => Some(*kind),
                _ => None,
            })
            .collect();
        assert_eq!(kinds, vec![ActKind::Comra, ActKind::Comra]);
    }

    #[test]
    fn nominal_gap_does_not_copy() {
        let d = dev();
        let mut b = BankState::new(0, &d, 1);
        b.fill_row(3, 0xab);
        let t = ns(36.0);
        let fx = run(
            &mut b,
            &d,
            &[
                CommandEvent::act(0, 0, 3),
                CommandEvent::pre(t, 0),
                CommandEvent::act(t + d.timing.t_rp, 0, 5),
                CommandEvent::pre(2 * t + d.timing.t_rp, 0),
            ],
        );
        assert_eq!(b.row_data(5), &[0; 8]);
        assert!(fx.iter().all(|e| !matches!(e, AnalogEffect::Copy { .. })));
    }

    #[test]
    fn cross_subarray_gap_does_not_copy() {
        let d = dev();
        let mut b = BankState::new(0, &d, 1);
        b.fill_row(63, 0xab);
        let t = ns(36.0);
        run(
            &mut b,
            &d,
            &[
                CommandEvent::act(0, 0, 63),
                CommandEvent::pre(t, 0),
                CommandEvent::act(t + ns(7.5), 0, 64),
                CommandEvent::pre(2 * t + ns(7.5), 0),
            ],
        );
        assert_eq!(b.row_data(64), &[0; 8]);
    }

    fn simra(b: &mut BankState, d: &Device, r1: u32, r2: u32, t0: Ps) -> Vec<AnalogEffect> {
        run(
            b,
            d,
            &[
                CommandEvent::act(t0, 0, r1),
                CommandEvent::pre(t0 + ns(3.0), 0),
                CommandEvent::act(t0 + ns(6.0), 0, r2),
                CommandEvent::pre(t0 + ns(42.0), 0),
            ],
        )
    }

    #[test]
    fn simra_majority_examples() {
        let d = dev();
        let mut b = BankState::new(0, &d, 1);
        for (r, v) in [(4, 0xff), (5, 0xff), (6, 0x00), (7, 0xff)] {
            b.fill_row(r, v);
        }
        let fx = simra(&mut b, &d, 4, 7, 0);
        for r in 4..8 {
            assert_eq!(b.row_data(r), &[0xff; 8]);
        }
        assert!(fx.iter().any(|e| matches!(e, AnalogEffect::Activation { rows, kind: ActKind::Simra, .. } if rows.len() == 4)));

        for (r, v) in [(8, 0xff), (9, 0xff), (10, 0x00), (11, 0x00)] {
            b.fill_row(r, v);
        }
        simra(&mut b, &d, 8, 11, ns(100.0));
        for r in 8..12 {
            assert_eq!(b.row_data(r), &[0x00; 8]);
        }
    }

    #[test]
    fn write_after_simra_fills_group() {
        let d = dev();
        let mut b = BankState::new(0, &d, 1);
        let cmds = [
            CommandEvent::act(0, 0, 16),
            CommandEvent::pre(ns(3.0), 0),
            CommandEvent::act(ns(6.0), 0, 17),
            CommandEvent::wr(ns(20.0), 0, vec![0x5a]),
            CommandEvent::pre(ns(50.0), 0),
        ];
        run(&mut b, &d, &cmds);
        assert_eq!(b.row_data(16), &[0x5a; 8]);
        assert_eq!(b.row_data(17), &[0x5a; 8]);
        assert_eq!(b.row_data(18), &[0; 8]);
    }

    #[test]
    fn undefined_gap_is_diagnosed_or_nominal() {
        let mut d = dev();
        let mut b = BankState::new(0, &d, 1);
        let cmds = [CommandEvent::act(0, 0, 1), CommandEvent::pre(ns(10.0), 0), CommandEvent::act(ns(20.0), 0, 2)];
        let mut err = None;
        for c in &cmds {
            if let Err(e) = b.apply_command(c, &d) {
                err = Some(e);
            }
        }
        assert!(matches!(err, Some(SimError::UndefinedAnalog { .. })));
        d.dram.undefined = UndefinedPolicy::Nominal;
        let mut b = BankState::new(0, &d, 1);
        for c in &cmds {
            b.apply_command(c, &d).unwrap();
        }
        assert_eq!(b.open_rows(), &[2]);
    }

    #[test]
    fn refresh_rules() {
        let d = dev();
        let mut b = BankState::new(0, &d, 1);
        b.refresh(100, &[5]).unwrap();
        assert_eq!(b.last_refresh(5), 100);
        let all: Vec<u32> = (0..128).collect();
        b.refresh(200, &all).unwrap();
        assert!(all.iter().all(|&r| b.last_refresh(r) == 200));
        b.apply_command(&CommandEvent::act(300, 0, 0), &d).unwrap();
        b.apply_command(&CommandEvent::pre(303, 0), &d).unwrap();
        b.apply_command(&CommandEvent::act(306, 0, 1), &d).unwrap();
        assert!(matches!(b.refresh(310, &[5]), Err(SimError::Protocol(_))));
    }

    #[test]
    fn commands_must_advance_in_time() {
        let d = dev();
        let mut b = BankState::new(0, &d, 1);
        b.apply_command(&CommandEvent::act(10, 0, 0), &d).unwrap();
        assert!(b.apply_command(&CommandEvent::pre(10, 0), &d).is_err());
    }
}
