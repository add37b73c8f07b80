use std::collections::VecDeque;

use rand::Rng;

use crate::error::{Result, SimError};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrrConfig {
    /// Number of most recent ACT addresses kept for sampling.
    pub capacity: usize,
    /// Neighbor distance refreshed around a sampled aggressor.
    pub reach: u32,
    /// Every `cadence`-th REF is TRR-capable.
    pub cadence: u32,
}

impl Default for TrrConfig {
    fn default() -> Self {
        Self { capacity: 450, reach: 2, cadence: 1 }
    }
}

impl TrrConfig {
    pub fn validate(&self) -> Result<()> {
        if self.capacity == 0 || self.reach == 0 || self.cadence == 0 {
            return Err(SimError::Config("TRR capacity, reach and cadence must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of one REF as seen by the sampler.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TrrDecision {
    pub capable: bool,
    pub sampled: Option<u32>,
    pub victims: Vec<u32>,
}

/// Sampling target-row-refresh engine of one bank.
#[derive(Debug, Clone)]
pub struct TrrState {
    cfg: TrrConfig,
    buf: VecDeque<u32>,
    refs: u64,
    rng: SimRng,
}

impl TrrState {
    pub fn new(cfg: TrrConfig, rng: SimRng) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, buf: VecDeque::with_capacity(cfg.capacity), refs: 0, rng })
    }

    pub fn config(&self) -> &TrrConfig {
        &self.cfg
    }

    /// Sampled addresses, oldest first.
    pub fn buffer(&self) -> impl Iterator<Item = u32> + '_ {
        self.buf.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    /// Records the row address of one bus ACT.
    pub fn observe(&mut self, row: u32) {
        if self.buf.len() == self.cfg.capacity {
            self.buf.pop_front();
        }
        self.buf.push_back(row);
    }

    /// Handles one REF: on capable REFs picks one buffered address uniformly
    /// and returns its in-bank neighbors.
    pub fn on_ref(&mut self, rows: u32) -> TrrDecision {
        self.refs += 1;
        let capable = self.refs % u64::from(self.cfg.cadence) == 0;
        if !capable || self.buf.is_empty() {
            return TrrDecision { capable, ..Default::default() };
        }
        let aggr = self.buf[self.rng.gen_range(0..self.buf.len())];
        TrrDecision { capable, sampled: Some(aggr), victims: neighbors(aggr, self.cfg.reach, rows) }
    }
}

/// Rows within `reach` of `row`, excluding `row`, clipped to the bank.
pub fn neighbors(row: u32, reach: u32, rows: u32) -> Vec<u32> {
    let lo = row.saturating_sub(reach);
    let hi = row.saturating_add(reach).min(rows.saturating_sub(1));
    (lo..=hi).filter(|&r| r != row).collect()
}
