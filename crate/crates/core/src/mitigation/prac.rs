use crate::dram::{ActKind, Ps};
use crate::error::{Result, SimError};

use super::trr::neighbors;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PracMode {
    /// Counters of a multi-row activation are updated one row per tRC.
    AreaOptimized,
    /// All counters of a multi-row activation are updated within one tRC.
    PerfOptimized,
}

impl PracMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PracMode::AreaOptimized => "ao",
            PracMode::PerfOptimized => "po",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ao" => Ok(PracMode::AreaOptimized),
            "po" => Ok(PracMode::PerfOptimized),
            _ => Err(SimError::Config(format!("unknown PRAC mode `{s}`"))),
        }
    }
}

/// Lowest observed first-flip hammer counts per activation kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowestHcFirst {
    pub rh: f64,
    pub comra: f64,
    pub simra: f64,
}

impl LowestHcFirst {
    pub fn get(&self, kind: ActKind) -> f64 {
        match kind {
            ActKind::RowHammer => self.rh,
            ActKind::Comra => self.comra,
            ActKind::Simra => self.simra,
        }
    }
}

/// Counter increment for one activation of `kind`: ceil(lowest RH / lowest kind).
pub fn weight(kind: ActKind, lowest: &LowestHcFirst) -> Result<u32> {
    let k = lowest.get(kind);
    if !(k > 0.0 && lowest.rh > 0.0) {
        return Err(SimError::Config(format!("lowest HC_first for {} must be positive", kind.as_str())));
    }
    let w = (lowest.rh / k).ceil();
    if !(w.is_finite() && w <= f64::from(u32::MAX)) {
        return Err(SimError::Config(format!("weight for {} overflows", kind.as_str())));
    }
    Ok((w as u32).max(1))
}

/// Worst-case disturbance, relative to one unit at distance 1, reaching a
/// victim from both sides out to `max_distance`.
pub fn blast_factor(d_factor: f64, max_distance: u32) -> f64 {
    (0..max_distance).map(|i| 2.0 * d_factor.powi(i as i32)).sum()
}

/// Largest back-off threshold that keeps every victim below `theta`.
///
/// Counters are serviced before each new activation, so an aggressor's
/// count is at most `t - 1` plus the jump of the activation in progress.
/// `per_count` bounds the disturbance one counter unit stands for and
/// `max_jump` bounds the disturbance of a single activation on one row.
pub fn safe_threshold(theta: f64, blast: f64, per_count: f64, max_jump: f64) -> Result<u32> {
    if !(theta > 0.0 && blast > 0.0 && per_count > 0.0 && max_jump >= 0.0) {
        return Err(SimError::Config("threshold derivation needs positive inputs".into()));
    }
    let t = ((theta / blast - max_jump) / per_count + 1.0).ceil() - 1.0;
    if t < 1.0 {
        return Err(SimError::Config(format!("no back-off threshold keeps victims below {theta}")));
    }
    Ok(t.min(f64::from(u32::MAX)) as u32)
}

/// Inputs for deriving PRAC configurations from characterization results.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PracPlan {
    pub lowest: LowestHcFirst,
    /// Lowest single-activation threshold the counters must protect.
    pub theta: f64,
    pub blast: f64,
    /// Disturbance on one neighbor from one activation, per kind.
    pub per_activation: [f64; 3],
}

impl PracPlan {
    pub fn weights(&self) -> Result<[u32; 3]> {
        Ok([
            weight(ActKind::RowHammer, &self.lowest)?,
            weight(ActKind::Comra, &self.lowest)?,
            weight(ActKind::Simra, &self.lowest)?,
        ])
    }

    /// Kind-aware counters with a threshold that covers every kind.
    pub fn worst_case(&self, mode: PracMode, t_rc: Ps) -> Result<PracConfig> {
        let w = self.weights()?;
        let per_count = (0..3).map(|i| self.per_activation[i] / f64::from(w[i])).fold(0.0, f64::max);
        let max_jump = self.per_activation.iter().copied().fold(0.0, f64::max);
        let rdt = safe_threshold(self.theta, self.blast, per_count, max_jump)?;
        Ok(PracConfig::new(mode, rdt, w, t_rc))
    }

    /// Unit weights, with every activation treated as the most disturbing
    /// kind, so the threshold comes from the lowest SiMRA count.
    pub fn naive(&self, mode: PracMode, t_rc: Ps) -> Result<PracConfig> {
        let rdt = safe_threshold(self.lowest.simra, self.blast, 1.0, 1.0)?;
        Ok(PracConfig::new(mode, rdt, [1; 3], t_rc))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PracConfig {
    pub mode: PracMode,
    /// Back-off threshold on the weighted counter.
    pub rdt: u32,
    /// Counter increments per activation kind.
    pub weights: [u32; 3],
    /// Neighbor distance refreshed by one RFM.
    pub reach: u32,
    /// Aggressors serviced per RFM.
    pub top_k: usize,
    pub t_rc: Ps,
}

impl PracConfig {
    pub fn new(mode: PracMode, rdt: u32, weights: [u32; 3], t_rc: Ps) -> Self {
        Self { mode, rdt, weights, reach: 2, top_k: 1, t_rc }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rdt == 0 || self.weights.contains(&0) || self.top_k == 0 || self.reach == 0 {
            return Err(SimError::Config("PRAC threshold, weights, reach and top-k must be at least 1".into()));
        }
        Ok(())
    }

    pub fn weight_of(&self, kind: ActKind) -> u32 {
        self.weights[match kind {
            ActKind::RowHammer => 0,
            ActKind::Comra => 1,
            ActKind::Simra => 2,
        }]
    }

    /// Bank blocking time of one counter update.
    pub fn update_latency(&self, rows: usize) -> Ps {
        match self.mode {
            PracMode::AreaOptimized => rows as Ps * self.t_rc,
            PracMode::PerfOptimized => self.t_rc,
        }
    }

    /// Bank blocking time of one RFM.
    pub fn rfm_latency(&self, refreshed: usize) -> Ps {
        refreshed.max(1) as Ps * self.t_rc
    }
}

/// Per-row activation counters of one bank.
#[derive(Debug, Clone)]
pub struct PracState {
    cfg: PracConfig,
    counters: Vec<u64>,
    pending: bool,
    pub backoffs: u64,
    pub rfms: u64,
}

impl PracState {
    pub fn new(cfg: PracConfig, rows: u32) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, counters: vec![0; rows as usize], pending: false, backoffs: 0, rfms: 0 })
    }

    pub fn config(&self) -> &PracConfig {
        &self.cfg
    }

    pub fn counter(&self, row: u32) -> u64 {
        self.counters[row as usize]
    }

    pub fn counters(&self) -> &[u64] {
        &self.counters
    }

    pub fn total(&self) -> u64 {
        self.counters.iter().sum()
    }

    pub fn backoff_pending(&self) -> bool {
        self.pending
    }

    /// Counts one activation and returns the bank blocking latency.
    pub fn update(&mut self, rows: &[u32], kind: ActKind) -> Result<Ps> {
        if rows.is_empty() {
            return Ok(0);
        }
        let w = u64::from(self.cfg.weight_of(kind));
        let rdt = u64::from(self.cfg.rdt);
        for &r in rows {
            let c = self
                .counters
                .get_mut(r as usize)
                .ok_or_else(|| SimError::Address(format!("PRAC counter for row {r} out of range")))?;
            *c += w;
            if *c >= rdt && !self.pending {
                self.pending = true;
                self.backoffs += 1;
            }
        }
        Ok(self.cfg.update_latency(rows.len()))
    }

    /// Services one RFM: refreshes the neighbors of the top-counted rows
    /// (ties to the higher address) and zeroes their counters.
    pub fn rfm(&mut self) -> Vec<u32> {
        self.rfms += 1;
        let rows = self.counters.len() as u32;
        let mut idx: Vec<u32> = (0..rows).collect();
        let k = self.cfg.top_k.min(idx.len());
        if k == 0 {
            return Vec::new();
        }
        let key = |r: &u32| (std::cmp::Reverse(self.counters[*r as usize]), std::cmp::Reverse(*r));
        idx.select_nth_unstable_by_key(k - 1, key);
        let mut top = idx[..k].to_vec();
        top.sort_by_key(key);
        let mut victims = Vec::new();
        for &a in &top {
            self.counters[a as usize] = 0;
            victims.extend(neighbors(a, self.cfg.reach, rows));
        }
        victims.sort_unstable();
        victims.dedup();
        let rdt = u64::from(self.cfg.rdt);
        self.pending = self.counters.iter().any(|&c| c >= rdt);
        if self.pending {
            self.backoffs += 1;
        }
        victims
    }
}
