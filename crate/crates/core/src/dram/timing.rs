use crate::error::{Result, SimError};

/// Simulation time in picoseconds.
pub type Ps = u64;

pub const PS_PER_NS: u64 = 1000;

/// Converts nanoseconds to picoseconds, rounding to the nearest picosecond.
pub fn ns(v: f64) -> Ps {
    (v * PS_PER_NS as f64).round().max(0.0) as Ps
}

pub fn to_ns(t: Ps) -> f64 {
    t as f64 / PS_PER_NS as f64
}

/// Formats a picosecond time as nanoseconds without trailing zeros.
pub fn fmt_ns(t: Ps) -> String {
    let whole = t / PS_PER_NS;
    let frac = t % PS_PER_NS;
    if frac == 0 {
        whole.to_string()
    } else {
        let s = format!("{whole}.{frac:03}");
        s.trim_end_matches('0').to_string()
    }
}

/// Parses a decimal nanosecond string exactly (up to picosecond precision).
pub fn parse_ns(s: &str) -> Result<Ps> {
    let bad = || SimError::Config(format!("bad time value '{s}'"));
    let (w, f) = match s.split_once('.') {
        Some((w, f)) => (w, f),
        None => (s, ""),
    };
    if f.len() > 3 || w.is_empty() {
        return Err(bad());
    }
    let whole: u64 = w.parse().map_err(|_| bad())?;
    let mut frac = 0u64;
    for (i, c) in f.chars().enumerate() {
        let d = c.to_digit(10).ok_or_else(bad)? as u64;
        frac += d * 10u64.pow(2 - i as u32);
    }
    Ok(whole * PS_PER_NS + frac)
}

/// DRAM timing parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimingParams {
    pub t_ras: Ps,
    pub t_rp: Ps,
    pub t_rc: Ps,
    pub t_refi: Ps,
    pub t_refw: Ps,
    pub acts_per_refi: u32,
}

impl Default for TimingParams {
    fn default() -> Self {
        let t_rc = ns(50.0);
        let t_refi = ns(7800.0);
        Self {
            t_ras: ns(36.0),
            t_rp: ns(14.0),
            t_rc,
            t_refi,
            t_refw: ns(64_000_000.0),
            acts_per_refi: (t_refi / t_rc) as u32,
        }
    }
}

impl TimingParams {
    /// Largest number of ACTs one bank can receive within one tREFI.
    pub fn max_acts_per_refi(&self) -> u32 {
        (self.t_refi / self.t_rc) as u32
    }

    /// Number of REF commands in one refresh window.
    pub fn refs_per_window(&self) -> u64 {
        (self.t_refw / self.t_refi).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_rc < self.t_ras + self.t_rp {
            return Err(SimError::Config(format!(
                "tRC ({}) must be at least tRAS + tRP ({})",
                fmt_ns(self.t_rc),
                fmt_ns(self.t_ras + self.t_rp)
            )));
        }
        if self.t_refi == 0 || self.t_refw < self.t_refi {
            return Err(SimError::Config("tREFW must be at least tREFI > 0".into()));
        }
        if self.acts_per_refi != self.max_acts_per_refi() {
            return Err(SimError::Config(format!(
                "acts_per_refi {} does not match tREFI/tRC = {}",
                self.acts_per_refi,
                self.max_acts_per_refi()
            )));
        }
        Ok(())
    }
}
