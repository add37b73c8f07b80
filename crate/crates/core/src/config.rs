//! Run configuration in flat `key = value` form.
//!
//! Every key is optional. Keys left out take the value from
//! [`RunConfig::default`] and are logged at info level.

use std::path::{Path, PathBuf};

use crate::chip::ChipSetup;
use crate::disturbance::{sample_thresholds, ChipProfile, Conditions};
use crate::dram::{fmt_ns, parse_ns, Device, DramConfig, Geometry, Ps, RowMapping, SimraGroupMap, SubarrayLayout, TimingParams};
use crate::error::{Result, SimError};
use crate::harness::{BisectionConfig, SweepGrid};
use crate::kv::{self, Entry};
use crate::mitigation::{PracConfig, PracMode, TrrConfig};
use crate::patterns::{CombinedMix, PatternKind, PatternSpec};
use crate::perf::Variant;
use crate::profiles::{load_profile, DEFAULT_PROFILE};
use crate::rng::SeedTree;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    /// Shipped profile name or path to a profile file.
    pub profile: String,

    pub rows: u32,
    pub row_bytes: usize,
    pub subarray_rows: u32,
    pub group_span: u8,
    /// Low row-address bits reversed by the logical-to-physical mapping.
    pub mapping_bits: u8,
    pub timing: TimingParams,
    pub temp_c: f64,

    pub pattern: PatternKind,
    pub victims: Vec<u32>,
    pub n: u32,
    pub t_aggon: Ps,
    /// Kind default when unset.
    pub gap: Option<Ps>,
    pub dp_aggr: u8,
    pub dp_victim: u8,
    pub fraction: f64,
    /// Multi-row kinds in the prefix of the combined pattern.
    pub mix: CombinedMix,
    pub single_sided: bool,
    pub budget: u64,

    /// Empty lists fall back to the single pattern value.
    pub sweep_temps: Vec<f64>,
    pub sweep_t_aggon: Vec<Ps>,
    pub sweep_gaps: Vec<Ps>,
    pub sweep_ns: Vec<u32>,
    pub sweep_data_patterns: Vec<u8>,

    pub bisection: BisectionConfig,

    pub trr: Option<TrrConfig>,
    /// Independent seeds per TRR comparison.
    pub trr_seeds: u32,

    pub prac_mode: Option<PracMode>,
    pub prac_rdt: u32,
    pub prac_weights: [u32; 3],

    pub perf_mixes: u32,
    pub perf_periods: Vec<Ps>,
    pub perf_variants: Vec<Variant>,
    pub perf_instructions: u64,

    pub strict: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            out: PathBuf::from("results"),
            jobs: 0,
            profile: DEFAULT_PROFILE.into(),
            rows: 1024,
            row_bytes: 64,
            subarray_rows: 512,
            group_span: 5,
            mapping_bits: 0,
            timing: TimingParams::default(),
            temp_c: 80.0,
            pattern: PatternKind::RhDouble,
            victims: vec![97, 161, 353, 609],
            n: 2,
            t_aggon: TimingParams::default().t_ras,
            gap: None,
            dp_aggr: 0x00,
            dp_victim: 0xff,
            fraction: 0.9,
            mix: CombinedMix { comra: true, simra: true },
            single_sided: false,
            budget: 0,
            sweep_temps: Vec::new(),
            sweep_t_aggon: Vec::new(),
            sweep_gaps: Vec::new(),
            sweep_ns: Vec::new(),
            sweep_data_patterns: Vec::new(),
            bisection: BisectionConfig::default(),
            trr: None,
            trr_seeds: 5,
            prac_mode: None,
            prac_rdt: 1303,
            prac_weights: [1, 10, 200],
            perf_mixes: 20,
            perf_periods: [125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0, 16000.0]
                .map(crate::dram::ns)
                .to_vec(),
            perf_variants: vec![Variant::PoNaive, Variant::PoWorstCase],
            perf_instructions: 100_000,
            strict: false,
        }
    }
}

fn hex_byte(b: u8) -> String {
    format!("0x{b:02x}")
}

fn parse_byte(e: &Entry, s: &str) -> Result<u8> {
    let t = s.trim();
    u8::from_str_radix(t.strip_prefix("0x").unwrap_or(t), 16)
        .map_err(|_| SimError::Config(format!("line {}: bad byte '{t}' for '{}'", e.line, e.key)))
}

fn time(e: &Entry, s: &str) -> Result<Ps> {
    parse_ns(s.trim()).map_err(|err| SimError::Config(format!("line {}: {} ({err})", e.line, e.key)))
}

fn times(e: &Entry) -> Result<Vec<Ps>> {
    let items: Vec<String> = kv::parse_list(e)?;
    items.iter().map(|s| time(e, s)).collect()
}

fn join_times(v: &[Ps]) -> String {
    v.iter().map(|&t| fmt_ns(t)).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Every key with its current value, in file order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let t = &self.timing;
        let trr = self.trr.unwrap_or_default();
        vec![
            ("seed", self.seed.to_string()),
            ("out", self.out.display().to_string()),
            ("jobs", self.jobs.to_string()),
            ("profile", self.profile.clone()),
            ("geometry.rows", self.rows.to_string()),
            ("geometry.row_bytes", self.row_bytes.to_string()),
            ("geometry.subarray_rows", self.subarray_rows.to_string()),
            ("geometry.group_span", self.group_span.to_string()),
            ("geometry.mapping_bits", self.mapping_bits.to_string()),
            ("timing.t_ras", fmt_ns(t.t_ras)),
            ("timing.t_rp", fmt_ns(t.t_rp)),
            ("timing.t_rc", fmt_ns(t.t_rc)),
            ("timing.t_refi", fmt_ns(t.t_refi)),
            ("timing.t_refw", fmt_ns(t.t_refw)),
            ("conditions.temp_c", self.temp_c.to_string()),
            ("pattern.kind", self.pattern.as_str().into()),
            ("pattern.victims", kv::join(&self.victims)),
            ("pattern.n", self.n.to_string()),
            ("pattern.t_aggon", fmt_ns(self.t_aggon)),
            ("pattern.gap", self.gap.map(fmt_ns).unwrap_or_else(|| "auto".into())),
            ("pattern.dp_aggr", hex_byte(self.dp_aggr)),
            ("pattern.dp_victim", hex_byte(self.dp_victim)),
            ("pattern.fraction", self.fraction.to_string()),
            ("pattern.mix", mix_str(self.mix).into()),
            ("pattern.single_sided", self.single_sided.to_string()),
            ("pattern.budget", self.budget.to_string()),
            ("sweep.temps", kv::join(&self.sweep_temps)),
            ("sweep.t_aggon", join_times(&self.sweep_t_aggon)),
            ("sweep.gaps", join_times(&self.sweep_gaps)),
            ("sweep.ns", kv::join(&self.sweep_ns)),
            ("sweep.data_patterns", self.sweep_data_patterns.iter().map(|&b| hex_byte(b)).collect::<Vec<_>>().join(",")),
            ("bisection.tolerance", self.bisection.tolerance.to_string()),
            ("bisection.repeats", self.bisection.repeats.to_string()),
            ("bisection.cap", self.bisection.cap.map(|c| c.to_string()).unwrap_or_else(|| "auto".into())),
            ("trr.enabled", self.trr.is_some().to_string()),
            ("trr.capacity", trr.capacity.to_string()),
            ("trr.reach", trr.reach.to_string()),
            ("trr.cadence", trr.cadence.to_string()),
            ("trr.seeds", self.trr_seeds.to_string()),
            ("prac.mode", self.prac_mode.map(PracMode::as_str).unwrap_or("off").into()),
            ("prac.rdt", self.prac_rdt.to_string()),
            ("prac.weights", kv::join(&self.prac_weights)),
            ("perf.mixes", self.perf_mixes.to_string()),
            ("perf.periods", join_times(&self.perf_periods)),
            ("perf.variants", self.perf_variants.iter().map(|v| v.as_str()).collect::<Vec<_>>().join(",")),
            ("perf.instructions", self.perf_instructions.to_string()),
            ("strict", self.strict.to_string()),
        ]
    }

    pub fn to_kv(&self) -> String {
        kv::render(self.entries())
    }

    /// Applies one entry; false when the key is unknown.
    fn set(&mut self, e: &Entry, trr: &mut TrrConfig, trr_on: &mut bool) -> Result<bool> {
        let v = e.value.as_str();
        match e.key.as_str() {
            "seed" => self.seed = kv::parse_value(e)?,
            "out" => self.out = PathBuf::from(v),
            "jobs" => self.jobs = kv::parse_value(e)?,
            "profile" => self.profile = v.to_string(),
            "geometry.rows" => self.rows = kv::parse_value(e)?,
            "geometry.row_bytes" => self.row_bytes = kv::parse_value(e)?,
            "geometry.subarray_rows" => self.subarray_rows = kv::parse_value(e)?,
            "geometry.group_span" => self.group_span = kv::parse_value(e)?,
            "geometry.mapping_bits" => self.mapping_bits = kv::parse_value(e)?,
            "timing.t_ras" => self.timing.t_ras = time(e, v)?,
            "timing.t_rp" => self.timing.t_rp = time(e, v)?,
            "timing.t_rc" => self.timing.t_rc = time(e, v)?,
            "timing.t_refi" => self.timing.t_refi = time(e, v)?,
            "timing.t_refw" => self.timing.t_refw = time(e, v)?,
            "conditions.temp_c" => self.temp_c = kv::parse_value(e)?,
            "pattern.kind" => self.pattern = PatternKind::parse(v)?,
            "pattern.victims" => self.victims = kv::parse_list(e)?,
            "pattern.n" => self.n = kv::parse_value(e)?,
            "pattern.t_aggon" => self.t_aggon = time(e, v)?,
            "pattern.gap" => self.gap = if v == "auto" { None } else { Some(time(e, v)?) },
            "pattern.dp_aggr" => self.dp_aggr = parse_byte(e, v)?,
            "pattern.dp_victim" => self.dp_victim = parse_byte(e, v)?,
            "pattern.fraction" => self.fraction = kv::parse_value(e)?,
            "pattern.mix" => self.mix = parse_mix(v)?,
            "pattern.single_sided" => self.single_sided = kv::parse_bool(e)?,
            "pattern.budget" => self.budget = kv::parse_value(e)?,
            "sweep.temps" => self.sweep_temps = kv::parse_list(e)?,
            "sweep.t_aggon" => self.sweep_t_aggon = times(e)?,
            "sweep.gaps" => self.sweep_gaps = times(e)?,
            "sweep.ns" => self.sweep_ns = kv::parse_list(e)?,
            "sweep.data_patterns" => {
                let items: Vec<String> = kv::parse_list(e)?;
                self.sweep_data_patterns = items.iter().map(|s| parse_byte(e, s)).collect::<Result<_>>()?;
            }
            "bisection.tolerance" => self.bisection.tolerance = kv::parse_value(e)?,
            "bisection.repeats" => self.bisection.repeats = kv::parse_value(e)?,
            "bisection.cap" => self.bisection.cap = if v == "auto" { None } else { Some(kv::parse_value(e)?) },
            "trr.enabled" => *trr_on = kv::parse_bool(e)?,
            "trr.capacity" => trr.capacity = kv::parse_value(e)?,
            "trr.reach" => trr.reach = kv::parse_value(e)?,
            "trr.cadence" => trr.cadence = kv::parse_value(e)?,
            "trr.seeds" => self.trr_seeds = kv::parse_value(e)?,
            "prac.mode" => self.prac_mode = if v == "off" { None } else { Some(PracMode::parse(v)?) },
            "prac.rdt" => self.prac_rdt = kv::parse_value(e)?,
            "prac.weights" => {
                let w: Vec<u32> = kv::parse_list(e)?;
                self.prac_weights =
                    w.try_into().map_err(|_| SimError::Config(format!("line {}: prac.weights needs 3 values", e.line)))?;
            }
            "perf.mixes" => self.perf_mixes = kv::parse_value(e)?,
            "perf.periods" => self.perf_periods = times(e)?,
            "perf.variants" => {
                let items: Vec<String> = kv::parse_list(e)?;
                self.perf_variants = items.iter().map(|s| Variant::parse(s)).collect::<Result<_>>()?;
            }
            "perf.instructions" => self.perf_instructions = kv::parse_value(e)?,
            "strict" => self.strict = kv::parse_bool(e)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Parses config text. `strict` (or a `strict = true` line) turns
    /// unknown keys into errors; otherwise they are warned about.
    pub fn from_kv(text: &str, strict: bool) -> Result<Self> {
        let entries = kv::parse(text)?;
        let mut cfg = RunConfig::default();
        let strict = strict || entries.iter().any(|e| e.key == "strict" && kv::parse_bool(e).unwrap_or(false));
        let mut trr = TrrConfig::default();
        let mut trr_on = false;
        for e in &entries {
            if !cfg.set(e, &mut trr, &mut trr_on)? {
                if strict {
                    return Err(SimError::Config(format!("line {}: unknown key '{}'", e.line, e.key)));
                }
                log::warn!("line {}: ignoring unknown key '{}'", e.line, e.key);
            }
        }
        cfg.trr = trr_on.then_some(trr);
        for (k, v) in RunConfig::default().entries() {
            if !entries.iter().any(|e| e.key == k) {
                log::info!("default {k} = {v}");
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.bisection.validate()?;
        self.timing.validate()?;
        if let Some(t) = &self.trr {
            t.validate()?;
        }
        if self.subarray_rows == 0 || self.rows % self.subarray_rows != 0 {
            return Err(SimError::Config(format!(
                "geometry.subarray_rows ({}) must divide geometry.rows ({})",
                self.subarray_rows, self.rows
            )));
        }
        if let Some(&v) = self.victims.iter().find(|&&v| v >= self.rows) {
            return Err(SimError::Config(format!("victim row {v} outside {} rows", self.rows)));
        }
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(SimError::Config("pattern.fraction must lie in (0, 1]".into()));
        }
        if self.trr_seeds == 0 || self.perf_mixes == 0 {
            return Err(SimError::Config("trr.seeds and perf.mixes must be positive".into()));
        }
        if self.prac_mode.is_some() {
            self.prac(self.timing.t_rc).expect("mode set").validate()?;
        }
        self.device()?;
        load_profile(&self.profile)?;
        Ok(())
    }

    pub fn prac(&self, t_rc: Ps) -> Option<PracConfig> {
        self.prac_mode.map(|m| PracConfig::new(m, self.prac_rdt, self.prac_weights, t_rc))
    }

    pub fn device(&self) -> Result<Device> {
        let geometry = Geometry { banks: 1, rows: self.rows, row_bytes: self.row_bytes, ..Geometry::default() };
        let layout = SubarrayLayout::uniform(self.rows, self.subarray_rows)?;
        let groups = SimraGroupMap::uniform(&layout, self.group_span);
        let mut dev = Device::new(geometry, layout, groups)?;
        dev.timing = self.timing;
        dev.dram = DramConfig::for_timing(&self.timing);
        if self.mapping_bits > 0 {
            dev.mapping = RowMapping::bit_reversal(self.mapping_bits);
        }
        dev.validate()?;
        Ok(dev)
    }

    pub fn load_profile(&self) -> Result<ChipProfile> {
        load_profile(&self.profile)
    }

    /// Device, profile and thresholds sampled from the run seed.
    pub fn chip_setup(&self) -> Result<ChipSetup> {
        let dev = self.device()?;
        let profile = self.load_profile()?;
        let thresholds = sample_thresholds(&profile, &dev.layout, SeedTree::new(self.seed).seed("thresholds"))?;
        let mut s = ChipSetup::new(dev, profile, thresholds)?;
        s.cond = Conditions { temp_c: self.temp_c };
        s.trr = self.trr;
        s.prac = self.prac(self.timing.t_rc);
        Ok(s)
    }

    pub fn pattern_spec(&self, victim: u32) -> PatternSpec {
        let mut s = PatternSpec::new(self.pattern, victim).with_n(self.n).with_data(self.dp_aggr, self.dp_victim);
        s.t_aggon = self.t_aggon;
        if let Some(g) = self.gap {
            s.gap = g;
        }
        s.fraction = self.fraction;
        s.mix = self.mix;
        s.single_sided = self.single_sided;
        s.budget = self.budget;
        s
    }

    pub fn grid(&self) -> SweepGrid {
        let base = self.pattern_spec(self.victims.first().copied().unwrap_or(0));
        let mut g = SweepGrid::single(&base, self.temp_c);
        let or = |v: &[Ps], d: Vec<Ps>| if v.is_empty() { d } else { v.to_vec() };
        if !self.sweep_temps.is_empty() {
            g.temps = self.sweep_temps.clone();
        }
        g.t_aggon = or(&self.sweep_t_aggon, g.t_aggon);
        g.gaps = or(&self.sweep_gaps, g.gaps);
        if !self.sweep_ns.is_empty() {
            g.ns = self.sweep_ns.clone();
        }
        if !self.sweep_data_patterns.is_empty() {
            g.data_patterns = self.sweep_data_patterns.clone();
        }
        g
    }
}

fn mix_str(m: CombinedMix) -> &'static str {
    match (m.comra, m.simra) {
        (true, true) => "comra,simra",
        (true, false) => "comra",
        (false, true) => "simra",
        (false, false) => "none",
    }
}

fn parse_mix(v: &str) -> Result<CombinedMix> {
    let mut m = CombinedMix::default();
    for part in v.split(',').map(str::trim) {
        match part {
            "comra" => m.comra = true,
            "simra" => m.simra = true,
            "none" => {}
            other => return Err(SimError::Config(format!("pattern.mix: unknown kind `{other}`"))),
        }
    }
    Ok(m)
}

/// Reads and validates a config file.
pub fn load_config(path: &Path, strict: bool) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SimError::Config(format!("cannot read config {}: {e}", path.display())))?;
    RunConfig::from_kv(&text, strict)
}
