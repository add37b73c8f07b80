use std::fmt;
use std::path::Path;

use crate::dram::{ActKind, Ps, PS_PER_NS};
use crate::error::{Result, SimError};
use crate::kv;

/// Bit transition a disturbance error produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FlipDir {
    OneToZero,
    ZeroToOne,
}

impl FlipDir {
    pub fn as_str(self) -> &'static str {
        match self {
            FlipDir::OneToZero => "1to0",
            FlipDir::ZeroToOne => "0to1",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "1to0" => Ok(FlipDir::OneToZero),
            "0to1" => Ok(FlipDir::ZeroToOne),
            _ => Err(SimError::Config(format!("unknown flip direction '{s}'"))),
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            FlipDir::OneToZero => FlipDir::ZeroToOne,
            FlipDir::ZeroToOne => FlipDir::OneToZero,
        }
    }
}

impl fmt::Display for FlipDir {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Minimum and average first-flip hammer count of one access kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KindStats {
    pub min: f64,
    pub mean: f64,
}

/// Data-pattern multiplier for one aggressor/victim byte pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpEntry {
    pub aggressor: u8,
    pub victim: u8,
    pub mult: f64,
}

/// Calibration bundle for one vendor and die revision.
///
/// Thresholds are expressed in single-activation units: one nominal ACT of a
/// row at distance one adds 1.0 to each neighbor. `rh` is the population the
/// per-row thresholds are fitted to.
#[derive(Debug, Clone, PartialEq)]
pub struct ChipProfile {
    pub name: String,
    pub vendor: String,
    pub density: String,
    pub die: String,
    pub rh: KindStats,
    pub comra: Option<KindStats>,
    pub simra: Option<KindStats>,
    /// Hammer units per hammer, indexed like `ActKind::ALL`.
    pub base: [f64; 3],
    pub dp: [Vec<DpEntry>; 3],
    pub temp_ref_c: f64,
    /// Multiplier per +10 °C.
    pub temp_step: [f64; 3],
    /// `(t_on, multiplier)` anchors, ascending in time.
    pub on_anchors: [Vec<(Ps, f64)>; 3],
    pub d_factor: f64,
    pub max_distance: u32,
    /// Threshold multipliers for the five subarray regions.
    pub region: [f64; 5],
    pub direction: [FlipDir; 3],
    /// Ratio between the thresholds of successive weak bits of a row.
    pub escalation: f64,
}

pub fn kind_index(k: ActKind) -> usize {
    match k {
        ActKind::RowHammer => 0,
        ActKind::Comra => 1,
        ActKind::Simra => 2,
    }
}

fn dp(entries: &[(u8, u8, f64)]) -> Vec<DpEntry> {
    entries.iter().map(|&(aggressor, victim, mult)| DpEntry { aggressor, victim, mult }).collect()
}

fn anchors(v: &[(f64, f64)]) -> Vec<(Ps, f64)> {
    v.iter().map(|&(t, m)| ((t * PS_PER_NS as f64) as Ps, m)).collect()
}

impl ChipProfile {
    /// Generic profile with the given row-hammer statistics and default tables.
    pub fn with_stats(name: &str, rh: KindStats) -> Self {
        Self {
            name: name.to_string(),
            vendor: "generic".into(),
            density: "8Gb".into(),
            die: "-".into(),
            rh,
            comra: None,
            simra: None,
            base: [1.0, 10.0, 200.0],
            dp: [
                dp(&[(0x55, 0xaa, 1.0), (0xaa, 0x55, 1.0), (0x00, 0xff, 0.8), (0xff, 0x00, 0.8)]),
                dp(&[(0x55, 0xaa, 1.0), (0xaa, 0x55, 1.0), (0x00, 0xff, 0.81), (0xff, 0x00, 0.85)]),
                dp(&[(0x00, 0xff, 1.0), (0x55, 0xaa, 0.8), (0xaa, 0x55, 0.8), (0xff, 0x00, 1.0 / 57.8)]),
            ],
            temp_ref_c: 80.0,
            temp_step: [1.0, 1.0, 3.2f64.powf(1.0 / 3.0)],
            on_anchors: [
                anchors(&[(36.0, 1.0), (144.0, 1.6), (7800.0, 12.0), (70200.0, 31.15)]),
                anchors(&[(36.0, 1.0), (144.0, 1.8), (7800.0, 10.0), (70200.0, 78.74)]),
                anchors(&[(36.0, 1.0), (144.0, 2.5), (7800.0, 60.0), (70200.0, 200.0)]),
            ],
            d_factor: 0.47,
            max_distance: 2,
            region: [0.95, 1.0, 1.05, 1.0, 0.95],
            direction: [FlipDir::OneToZero, FlipDir::OneToZero, FlipDir::ZeroToOne],
            escalation: 1.05,
        }
    }

    /// Profile with every row at exactly `theta`.
    pub fn constant(theta: f64) -> Self {
        let mut p = Self::with_stats("constant", KindStats { min: theta, mean: theta });
        p.region = [1.0; 5];
        p
    }

    pub fn kind_stats(&self, k: ActKind) -> Option<KindStats> {
        match k {
            ActKind::RowHammer => Some(self.rh),
            ActKind::Comra => self.comra,
            ActKind::Simra => self.simra,
        }
    }

    pub fn base(&self, k: ActKind) -> f64 {
        self.base[kind_index(k)]
    }

    pub fn validate(&self) -> Result<()> {
        let stats = [("rh", Some(self.rh)), ("comra", self.comra), ("simra", self.simra)];
        for (name, s) in stats {
            if let Some(s) = s {
                if !(s.min >= 1.0 && s.mean.is_finite()) {
                    return Err(SimError::Calibration(format!("{name}: min must be at least 1")));
                }
                if s.min > s.mean {
                    return Err(SimError::Calibration(format!("{name}: min {} exceeds mean {}", s.min, s.mean)));
                }
            }
        }
        let mults = self
            .base
            .iter()
            .chain(self.temp_step.iter())
            .chain(self.region.iter())
            .chain(self.dp.iter().flatten().map(|e| &e.mult))
            .chain(self.on_anchors.iter().flatten().map(|(_, m)| m));
        if mults.into_iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(SimError::Config(format!("profile {}: all multipliers must be positive", self.name)));
        }
        for a in &self.on_anchors {
            if a.is_empty() {
                return Err(SimError::Config("t_on anchor table is empty".into()));
            }
            if a.windows(2).any(|w| w[1].0 <= w[0].0 || w[1].1 < w[0].1) {
                return Err(SimError::Config("t_on anchors must ascend in time and not decrease".into()));
            }
        }
        if !(self.d_factor > 0.0 && self.d_factor <= 1.0) || self.max_distance == 0 {
            return Err(SimError::Config("need 0 < distance factor <= 1 and max distance >= 1".into()));
        }
        if self.escalation < 1.0 {
            return Err(SimError::Config("bit escalation ratio must be at least 1".into()));
        }
        Ok(())
    }

    /// Data-pattern multiplier; pairs missing from the table count as worst case (1.0).
    pub fn f_dp(&self, k: ActKind, aggressor: u8, victim: u8) -> f64 {
        self.dp[kind_index(k)]
            .iter()
            .find(|e| e.aggressor == aggressor && e.victim == victim)
            .map_or(1.0, |e| e.mult)
    }

    pub fn f_temp(&self, k: ActKind, temp_c: f64) -> f64 {
        self.temp_step[kind_index(k)].powf((temp_c - self.temp_ref_c) / 10.0)
    }

    /// Log-linear interpolation between anchors, clamped at both ends.
    pub fn f_on(&self, k: ActKind, t_on: Ps) -> f64 {
        let a = &self.on_anchors[kind_index(k)];
        let (first, last) = (a[0], a[a.len() - 1]);
        if t_on <= first.0 {
            return first.1;
        }
        if t_on >= last.0 {
            return last.1;
        }
        let i = a.partition_point(|&(t, _)| t <= t_on);
        let (t0, m0) = a[i - 1];
        let (t1, m1) = a[i];
        let x = ((t_on as f64).ln() - (t0 as f64).ln()) / ((t1 as f64).ln() - (t0 as f64).ln());
        (m0.ln() + x * (m1.ln() - m0.ln())).exp()
    }

    pub fn to_kv(&self) -> String {
        let mut e: Vec<(&str, String)> = vec![
            ("name", self.name.clone()),
            ("vendor", self.vendor.clone()),
            ("density", self.density.clone()),
            ("die", self.die.clone()),
            ("rh.min", self.rh.min.to_string()),
            ("rh.mean", self.rh.mean.to_string()),
        ];
        if let Some(s) = self.comra {
            e.push(("comra.min", s.min.to_string()));
            e.push(("comra.mean", s.mean.to_string()));
        }
        if let Some(s) = self.simra {
            e.push(("simra.min", s.min.to_string()));
            e.push(("simra.mean", s.mean.to_string()));
        }
        const BASE: [&str; 3] = ["base.rh", "base.comra", "base.simra"];
        const STEP: [&str; 3] = ["temp.step.rh", "temp.step.comra", "temp.step.simra"];
        const ON: [&str; 3] = ["on.rh", "on.comra", "on.simra"];
        const DP: [&str; 3] = ["dp.rh", "dp.comra", "dp.simra"];
        const DIR: [&str; 3] = ["dir.rh", "dir.comra", "dir.simra"];
        for i in 0..3 {
            e.push((BASE[i], self.base[i].to_string()));
            e.push((STEP[i], self.temp_step[i].to_string()));
            e.push((
                ON[i],
                self.on_anchors[i]
                    .iter()
                    .map(|(t, m)| format!("{}:{m}", crate::dram::fmt_ns(*t)))
                    .collect::<Vec<_>>()
                    .join(","),
            ));
            e.push((
                DP[i],
                self.dp[i]
                    .iter()
                    .map(|d| format!("{:02x}/{:02x}:{}", d.aggressor, d.victim, d.mult))
                    .collect::<Vec<_>>()
                    .join(","),
            ));
            e.push((DIR[i], self.direction[i].to_string()));
        }
        e.push(("temp.ref_c", self.temp_ref_c.to_string()));
        e.push(("distance.factor", self.d_factor.to_string()));
        e.push(("distance.max", self.max_distance.to_string()));
        e.push(("region", kv::join(&self.region)));
        e.push(("escalation", self.escalation.to_string()));
        kv::render(e)
    }

    /// Parses a profile file; keys not given keep the generic defaults.
    pub fn from_kv(text: &str) -> Result<Self> {
        let entries = kv::parse(text)?;
        let get = |k: &str| entries.iter().find(|e| e.key == k);
        let req = |k: &str| get(k).ok_or_else(|| SimError::Config(format!("profile missing '{k}'")));
        let rh = KindStats { min: kv::parse_value(req("rh.min")?)?, mean: kv::parse_value(req("rh.mean")?)? };
        let mut p = Self::with_stats(&req("name")?.value, rh);
        let stats = |prefix: &str| -> Result<Option<KindStats>> {
            match (get(&format!("{prefix}.min")), get(&format!("{prefix}.mean"))) {
                (Some(a), Some(b)) => Ok(Some(KindStats { min: kv::parse_value(a)?, mean: kv::parse_value(b)? })),
                (None, None) => Ok(None),
                _ => Err(SimError::Config(format!("profile needs both {prefix}.min and {prefix}.mean"))),
            }
        };
        p.comra = stats("comra")?;
        p.simra = stats("simra")?;
        for e in &entries {
            let kind_of = |suffix: &str| -> Result<usize> {
                Ok(kind_index(ActKind::parse(suffix)?))
            };
            match e.key.as_str() {
                "name" | "rh.min" | "rh.mean" | "comra.min" | "comra.mean" | "simra.min" | "simra.mean" => {}
                "vendor" => p.vendor = e.value.clone(),
                "density" => p.density = e.value.clone(),
                "die" => p.die = e.value.clone(),
                "temp.ref_c" => p.temp_ref_c = kv::parse_value(e)?,
                "distance.factor" => p.d_factor = kv::parse_value(e)?,
                "distance.max" => p.max_distance = kv::parse_value(e)?,
                "escalation" => p.escalation = kv::parse_value(e)?,
                "region" => {
                    let v: Vec<f64> = kv::parse_list(e)?;
                    p.region = v
                        .try_into()
                        .map_err(|_| SimError::Config(format!("line {}: region needs 5 values", e.line)))?;
                }
                k => {
                    let (group, suffix) = k
                        .rsplit_once('.')
                        .ok_or_else(|| SimError::Config(format!("line {}: unknown profile key '{k}'", e.line)))?;
                    let i = kind_of(suffix)
                        .map_err(|_| SimError::Config(format!("line {}: unknown profile key '{k}'", e.line)))?;
                    match group {
                        "base" => p.base[i] = kv::parse_value(e)?,
                        "temp.step" => p.temp_step[i] = kv::parse_value(e)?,
                        "dir" => p.direction[i] = FlipDir::parse(&e.value)?,
                        "on" => p.on_anchors[i] = parse_anchors(e)?,
                        "dp" => p.dp[i] = parse_dp(e)?,
                        _ => return Err(SimError::Config(format!("line {}: unknown profile key '{k}'", e.line))),
                    }
                }
            }
        }
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Config(format!("cannot read profile {}: {e}", path.display())))?;
        Self::from_kv(&text)
    }
}

fn parse_anchors(e: &kv::Entry) -> Result<Vec<(Ps, f64)>> {
    let items: Vec<String> = kv::parse_list(e)?;
    items
        .iter()
        .map(|it| {
            let (t, m) = it
                .split_once(':')
                .ok_or_else(|| SimError::Config(format!("line {}: anchor '{it}' needs 'ns:mult'", e.line)))?;
            let m: f64 = m
                .trim()
                .parse()
                .map_err(|_| SimError::Config(format!("line {}: bad anchor multiplier '{m}'", e.line)))?;
            Ok((crate::dram::parse_ns(t.trim())?, m))
        })
        .collect()
}

fn parse_dp(e: &kv::Entry) -> Result<Vec<DpEntry>> {
    let items: Vec<String> = kv::parse_list(e)?;
    items
        .iter()
        .map(|it| {
            let bad = || SimError::Config(format!("line {}: data pattern entry '{it}' needs 'aa/vv:mult'", e.line));
            let (pair, m) = it.split_once(':').ok_or_else(bad)?;
            let (a, v) = pair.split_once('/').ok_or_else(bad)?;
            Ok(DpEntry {
                aggressor: u8::from_str_radix(a.trim(), 16).map_err(|_| bad())?,
                victim: u8::from_str_radix(v.trim(), 16).map_err(|_| bad())?,
                mult: m.trim().parse().map_err(|_| bad())?,
            })
        })
        .collect()
}
