//! One simulated bank: row-buffer state, disturbance accumulation and the
//! optional in-DRAM mitigations, driven by a command stream.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::disturbance::{Bitflip, ChipProfile, Conditions, DisturbanceState, FlipDir, ThresholdMap};
use crate::dram::{AnalogEffect, BankState, CommandEvent, CommandKind, Device, Ps};
use crate::error::{Result, SimError};
use crate::mitigation::{PracConfig, PracState, TrrConfig, TrrState};
use crate::rng::SeedTree;

/// Everything needed to build identical chips repeatedly.
#[derive(Debug, Clone)]
pub struct ChipSetup {
    pub dev: Arc<Device>,
    pub profile: Arc<ChipProfile>,
    pub thresholds: Arc<ThresholdMap>,
    pub cond: Conditions,
    pub trr: Option<TrrConfig>,
    pub prac: Option<PracConfig>,
    /// Service PRAC back-off with RFM before each new activation.
    pub prac_service: bool,
    pub bank: u32,
}

impl ChipSetup {
    pub fn new(dev: Device, profile: ChipProfile, thresholds: ThresholdMap) -> Result<Self> {
        dev.validate()?;
        profile.validate()?;
        if thresholds.len() != dev.geometry.rows as usize {
            return Err(SimError::Shape(format!(
                "{} thresholds for {} rows",
                thresholds.len(),
                dev.geometry.rows
            )));
        }
        Ok(Self {
            dev: Arc::new(dev),
            profile: Arc::new(profile),
            thresholds: Arc::new(thresholds),
            cond: Conditions::default(),
            trr: None,
            prac: None,
            prac_service: true,
            bank: 0,
        })
    }

    pub fn build(&self, seed: u64) -> Result<Chip> {
        Chip::new(self.clone(), seed)
    }
}

#[derive(Debug, Clone)]
pub struct Chip {
    setup: ChipSetup,
    bank: BankState,
    dist: DisturbanceState,
    trr: Option<TrrState>,
    prac: Option<PracState>,
    flips: Vec<Bitflip>,
    trr_sampled: BTreeSet<u32>,
    trr_refreshes: u64,
    prac_blocked: Ps,
    last_pre: Option<Ps>,
    seed: u64,
}

impl Chip {
    pub fn new(setup: ChipSetup, seed: u64) -> Result<Self> {
        let tree = SeedTree::new(seed);
        let dev = &setup.dev;
        let trr = setup.trr.map(|c| TrrState::new(c, tree.stream("trr"))).transpose()?;
        let prac = setup.prac.clone().map(|c| PracState::new(c, dev.geometry.rows)).transpose()?;
        Ok(Self {
            bank: BankState::new(setup.bank, dev, tree.seed("bank")),
            dist: DisturbanceState::new(dev.geometry.rows, dev.geometry.row_bytes),
            trr,
            prac,
            flips: Vec::new(),
            trr_sampled: BTreeSet::new(),
            trr_refreshes: 0,
            prac_blocked: 0,
            last_pre: None,
            seed,
            setup,
        })
    }

    pub fn setup(&self) -> &ChipSetup {
        &self.setup
    }

    pub fn device(&self) -> &Device {
        &self.setup.dev
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn bank(&self) -> &BankState {
        &self.bank
    }

    pub fn disturbance(&self) -> &DisturbanceState {
        &self.dist
    }

    pub fn prac(&self) -> Option<&PracState> {
        self.prac.as_ref()
    }

    pub fn trr(&self) -> Option<&TrrState> {
        self.trr.as_ref()
    }

    /// Every address the TRR sampler picked so far.
    pub fn trr_sampled(&self) -> &BTreeSet<u32> {
        &self.trr_sampled
    }

    pub fn trr_refreshes(&self) -> u64 {
        self.trr_refreshes
    }

    /// Total bank blocking time charged by PRAC counter updates and RFMs.
    pub fn prac_blocked(&self) -> Ps {
        self.prac_blocked
    }

    pub fn flips(&self) -> &[Bitflip] {
        &self.flips
    }

    pub fn flip_count(&self) -> usize {
        self.flips.len()
    }

    pub fn fill_all(&mut self, byte: u8) {
        for r in 0..self.setup.dev.geometry.rows {
            self.bank.fill_row(r, byte);
        }
    }

    pub fn fill_row(&mut self, physical: u32, byte: u8) {
        self.bank.fill_row(physical, byte);
    }

    pub fn row_data(&self, physical: u32) -> &[u8] {
        self.bank.row_data(physical)
    }

    fn absorb(&mut self, effects: &[AnalogEffect]) -> Result<usize> {
        if effects.is_empty() {
            return Ok(0);
        }
        let bank = &self.bank;
        let new = self.dist.accumulate(
            effects,
            &self.setup.thresholds,
            &self.setup.profile,
            &self.setup.cond,
            &|r| bank.row_data(r)[0],
        );
        if let Some(p) = self.prac.as_mut() {
            for e in effects {
                if let AnalogEffect::Activation { rows, kind, .. } = e {
                    self.prac_blocked += p.update(rows, *kind)?;
                }
            }
        }
        for f in &new {
            self.bank.set_bit(f.row, f.bit, f.direction == FlipDir::ZeroToOne);
        }
        let n = new.len();
        self.flips.extend(new);
        Ok(n)
    }

    /// Issues RFMs until no counter is at the back-off threshold.
    fn service_backoff(&mut self, time: Ps) -> Result<()> {
        let flushed = self.bank.flush();
        self.absorb(&flushed)?;
        loop {
            let Some(p) = self.prac.as_mut() else { return Ok(()) };
            if !p.backoff_pending() {
                return Ok(());
            }
            let victims = p.rfm();
            self.prac_blocked += p.config().rfm_latency(victims.len());
            let fx = self.bank.refresh(time, &victims)?;
            self.absorb(&fx)?;
        }
    }

    /// Applies one command; returns how many bitflips it caused.
    pub fn execute(&mut self, cmd: &CommandEvent) -> Result<usize> {
        if cmd.addr.bank != self.setup.bank {
            return Err(SimError::Address(format!(
                "command for bank {} sent to a chip simulating bank {}",
                cmd.addr.bank, self.setup.bank
            )));
        }
        let dev = Arc::clone(&self.setup.dev);
        if cmd.kind == CommandKind::Act && self.setup.prac_service && self.prac.is_some() {
            let fresh = self.last_pre.is_none_or(|p| cmd.time.saturating_sub(p) >= dev.dram.copy_window);
            if fresh && self.bank.open_rows().is_empty() {
                self.service_backoff(cmd.time)?;
            }
        }
        let fx = self.bank.apply_command(cmd, &dev)?;
        let mut n = self.absorb(&fx)?;
        match cmd.kind {
            CommandKind::Act => {
                if let Some(t) = self.trr.as_mut() {
                    t.observe(dev.physical(cmd.addr.row)?);
                }
            }
            CommandKind::Pre => self.last_pre = Some(cmd.time),
            CommandKind::Ref => {
                if let Some(t) = self.trr.as_mut() {
                    let d = t.on_ref(dev.geometry.rows);
                    if let Some(s) = d.sampled {
                        self.trr_sampled.insert(s);
                    }
                    if !d.victims.is_empty() {
                        self.trr_refreshes += 1;
                        let fx = self.bank.refresh(cmd.time, &d.victims)?;
                        n += self.absorb(&fx)?;
                    }
                }
            }
            CommandKind::Rfm => {
                if let Some(p) = self.prac.as_mut() {
                    let victims = p.rfm();
                    self.prac_blocked += p.config().rfm_latency(victims.len());
                    let fx = self.bank.refresh(cmd.time, &victims)?;
                    n += self.absorb(&fx)?;
                }
            }
            _ => {}
        }
        Ok(n)
    }

    /// Emits any activation still awaiting classification.
    pub fn finish(&mut self) -> Result<usize> {
        let fx = self.bank.flush();
        self.absorb(&fx)
    }

    pub fn run<I: IntoIterator<Item = CommandEvent>>(&mut self, cmds: I) -> Result<()> {
        for c in cmds {
            self.execute(&c)?;
        }
        self.finish()?;
        Ok(())
    }

    /// Runs until `stop` accepts a new bitflip; returns whether it did.
    pub fn run_until<I, F>(&mut self, cmds: I, mut stop: F) -> Result<bool>
    where
        I: IntoIterator<Item = CommandEvent>,
        F: FnMut(&Bitflip) -> bool,
    {
        for c in cmds {
            let n = self.execute(&c)?;
            if n > 0 && self.flips[self.flips.len() - n..].iter().any(&mut stop) {
                return Ok(true);
            }
        }
        let n = self.finish()?;
        Ok(n > 0 && self.flips[self.flips.len() - n..].iter().any(&mut stop))
    }

    /// Bitflips per row, ignoring `exclude`.
    pub fn flips_outside(&self, exclude: &[u32]) -> usize {
        self.flips.iter().filter(|f| !exclude.contains(&f.row)).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dram::ns;
    use crate::mitigation::PracMode;
    use crate::patterns::{gen_rowhammer, gen_simra, PatternKind, PatternSpec};

    fn setup(theta: f64) -> ChipSetup {
        let dev = Device::small(256, 128, 8).unwrap();
        ChipSetup::new(dev, ChipProfile::constant(theta), ThresholdMap::constant(256, theta)).unwrap()
    }

    #[test]
    fn double_sided_flip_at_expected_pair() {
        let s = setup(1000.0);
        let mut chip = s.build(1).unwrap();
        chip.fill_all(0xff);
        let spec = PatternSpec::new(PatternKind::RhDouble, 50).with_budget(499);
        chip.run(gen_rowhammer(&spec, &s.dev).unwrap().iter()).unwrap();
        assert_eq!(chip.flip_count(), 0);
        let mut chip = s.build(1).unwrap();
        let stream = gen_rowhammer(&spec.with_budget(500), &s.dev).unwrap();
        assert!(chip.run_until(stream.iter(), |f| f.row == 50).unwrap());
        let f = chip.flips()[0];
        assert_eq!(f.direction, FlipDir::OneToZero);
    }

    #[test]
    fn flips_change_stored_bits() {
        let s = setup(100.0);
        let mut chip = s.build(2).unwrap();
        chip.fill_all(0xff);
        chip.run(gen_rowhammer(&PatternSpec::new(PatternKind::RhDouble, 50).with_budget(60), &s.dev).unwrap().iter())
            .unwrap();
        let f = chip.flips().iter().find(|f| f.row == 50).copied().unwrap();
        let byte = chip.row_data(50)[f.bit / 8 % 8];
        assert_eq!(byte >> (f.bit % 8) & 1, 0);
    }

    #[test]
    fn prac_service_prevents_flips() {
        let mut s = setup(1000.0);
        s.prac = Some(PracConfig::new(PracMode::PerfOptimized, 300, [1, 10, 200], ns(50.0)));
        let mut chip = s.build(3).unwrap();
        let spec = PatternSpec::new(PatternKind::RhDouble, 50).with_budget(5000);
        chip.run(gen_rowhammer(&spec, &s.dev).unwrap().iter()).unwrap();
        assert_eq!(chip.flip_count(), 0);
        assert!(chip.prac().unwrap().rfms > 0);
        let mut bare = setup(1000.0).build(3).unwrap();
        bare.run(gen_rowhammer(&spec, &s.dev).unwrap().iter()).unwrap();
        assert!(bare.flip_count() > 0);
    }

    #[test]
    fn trr_sees_only_bus_rows() {
        let mut s = setup(1e9);
        s.trr = Some(TrrConfig::default());
        let mut chip = s.build(4).unwrap();
        let spec = PatternSpec::new(PatternKind::Simra, 97).with_n(16).with_budget(40);
        let stream = gen_simra(&spec, &s.dev).unwrap();
        let mut cmds = stream.collect().events;
        let end = cmds.last().unwrap().time;
        for i in 0..20 {
            cmds.push(CommandEvent::refresh(end + (i + 1) * ns(100.0), 0));
        }
        chip.run(cmds).unwrap();
        let bus: BTreeSet<u32> = stream.meta.bus_rows.iter().copied().collect();
        assert_eq!(chip.trr_sampled(), &bus);
        assert_eq!(chip.trr().unwrap().len(), 80);
    }

    #[test]
    fn rejects_other_banks() {
        let mut chip = setup(10.0).build(0).unwrap();
        assert!(chip.execute(&CommandEvent::act(0, 3, 1)).is_err());
    }
}
