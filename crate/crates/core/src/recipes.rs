//! End-to-end pipelines shared by the command line and the examples.
//!
//! Each recipe takes a [`RunConfig`] and returns records; the `write_*`
//! helpers put them in CSV files next to a manifest that echoes the
//! config, so a rerun with the manifest reproduces every file.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chip::ChipSetup;
use crate::config::RunConfig;
use crate::disturbance::sample_thresholds;
use crate::dram::write_trace;
use crate::error::{Result, SimError};
use crate::harness::{combined_priors, default_cap, prepare_chip, run_sweep, ExperimentResult};
use crate::mitigation::{blast_factor, LowestHcFirst, PracPlan, TrrConfig};
use crate::patterns::{generate, PatternKind, PatternSpec};
use crate::perf::{evaluate, Mix, PerfConfig, PerfRecord};
use crate::rng::SeedTree;

pub const TRR_COLUMNS: [&str; 5] = ["technique", "trr", "seed", "victim", "flips"];
pub const ATTACK_COLUMNS: [&str; 6] = ["pattern", "victim", "hammers", "victim_flips", "other_flips", "seed"];

/// Sampler-bypass technique compared with and without TRR.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Technique {
    /// `n` aggressors spaced two rows apart around the victim.
    RowHammer { n: u32 },
    /// One SiMRA group of `n` rows driven through a pair TRR never relates to the victim.
    Simra { n: u32 },
}

impl Technique {
    pub fn label(&self) -> String {
        match self {
            Technique::RowHammer { n: 2 } => "rh-double".into(),
            Technique::RowHammer { n } => format!("rh-{n}-sided"),
            Technique::Simra { n } => format!("simra-{n}"),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let num = |t: &str| t.parse::<u32>().map_err(|_| SimError::Config(format!("bad technique `{s}`")));
        if s == "rh-double" {
            Ok(Technique::RowHammer { n: 2 })
        } else if let Some(t) = s.strip_prefix("simra-") {
            Ok(Technique::Simra { n: num(t)? })
        } else if let Some(t) = s.strip_prefix("rh-").and_then(|t| t.strip_suffix("-sided")) {
            Ok(Technique::RowHammer { n: num(t)? })
        } else {
            Err(SimError::Config(format!("unknown technique `{s}`")))
        }
    }

    pub fn spec(&self, victim: u32, budget: u64) -> PatternSpec {
        let mut s = PatternSpec::new(PatternKind::NSidedBypass, victim).with_budget(budget).with_data(0x00, 0xff);
        match *self {
            Technique::RowHammer { n } => s.n = n,
            Technique::Simra { n } => {
                s.n = n;
                s.bypass_simra = true;
                s.single_sided = true;
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrrRecord {
    pub technique: String,
    pub trr: bool,
    pub seed: u64,
    pub victim: u32,
    /// Bitflips in rows within disturbance reach of the technique's aggressors.
    pub flips: u64,
}

/// Hammers per aggressor that fill one refresh window with bypass cycles.
pub fn window_budget(setup: &ChipSetup, technique: Technique, victim: u32) -> Result<u64> {
    let one = generate(&technique.spec(victim, 1), None, &setup.dev)?;
    let cycles = setup.dev.timing.t_refw / one.meta.period.max(1);
    Ok(cycles.max(1) * one.meta.hammers)
}

/// Non-aggressor rows within disturbance reach of an aggressor.
fn attacked_rows(aggressors: &[u32], setup: &ChipSetup) -> Vec<u32> {
    let reach = setup.profile.max_distance;
    let rows = setup.dev.geometry.rows;
    let mut out: Vec<u32> = aggressors
        .iter()
        .flat_map(|&a| crate::mitigation::neighbors(a, reach, rows))
        .filter(|r| !aggressors.contains(r))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Bitflips of one technique with and without TRR, for `seeds` threshold
/// draws. Both runs of a pair share thresholds and chip seed.
pub fn trr_eval(cfg: &RunConfig, techniques: &[Technique], seeds: u32) -> Result<Vec<TrrRecord>> {
    let base = cfg.chip_setup()?;
    let trr = cfg.trr.unwrap_or_default();
    let tree = SeedTree::new(cfg.seed);
    let mut jobs = Vec::new();
    for &t in techniques {
        for s in 0..seeds {
            for &v in &cfg.victims {
                jobs.push((t, s, v));
            }
        }
    }
    let out: Vec<Result<[TrrRecord; 2]>> = jobs
        .par_iter()
        .map(|&(t, s, v)| {
            let seed = tree.child("trr-seed", u64::from(s)).root();
            let th = sample_thresholds(&base.profile, &base.dev.layout, SeedTree::new(seed).seed("thresholds"))?;
            let mut setup = base.clone();
            setup.thresholds = std::sync::Arc::new(th);
            setup.prac = None;
            let budget = if cfg.budget > 0 { cfg.budget } else { window_budget(&setup, t, v)? };
            let spec = t.spec(v, budget);
            let attacked = attacked_rows(&generate(&spec, None, &setup.dev)?.meta.aggressors, &setup);
            let run = |with: Option<TrrConfig>| -> Result<TrrRecord> {
                let mut s2 = setup.clone();
                s2.trr = with;
                let stream = generate(&spec, None, &s2.dev)?;
                let mut chip = prepare_chip(&s2, &spec, &stream.meta.aggressors, seed)?;
                chip.run(stream.iter())?;
                Ok(TrrRecord {
                    technique: t.label(),
                    trr: with.is_some(),
                    seed,
                    victim: v,
                    flips: chip.flips().iter().filter(|f| attacked.contains(&f.row)).count() as u64,
                })
            };
            Ok([run(None)?, run(Some(trr))?])
        })
        .collect();
    let mut recs = Vec::new();
    for r in out {
        recs.extend(r?);
    }
    Ok(recs)
}

/// Relative bitflip reduction from enabling TRR, over all matching records.
pub fn trr_reduction(records: &[TrrRecord], technique: &str) -> Result<f64> {
    let sum = |on: bool| -> u64 { records.iter().filter(|r| r.technique == technique && r.trr == on).map(|r| r.flips).sum() };
    let off = sum(false);
    if off == 0 {
        return Err(SimError::Metric(format!("{technique} produced no bitflips without TRR")));
    }
    Ok(1.0 - sum(true) as f64 / off as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackRecord {
    pub pattern: String,
    pub victim: u32,
    pub hammers: u64,
    pub victim_flips: u64,
    pub other_flips: u64,
    pub seed: u64,
}

/// Runs the configured pattern at a fixed budget (the refresh-window cap
/// when unset) against every victim.
pub fn attack(cfg: &RunConfig) -> Result<Vec<AttackRecord>> {
    let setup = cfg.chip_setup()?;
    let tree = SeedTree::new(cfg.seed);
    cfg.victims
        .par_iter()
        .map(|&v| {
            let seed = tree.child("attack", u64::from(v)).root();
            let spec = cfg.pattern_spec(v);
            let prior = if spec.kind == PatternKind::Combined {
                Some(combined_priors(&setup, &spec, &cfg.bisection, seed)?)
            } else {
                None
            };
            let budget = if cfg.budget > 0 { cfg.budget } else { default_cap(&setup, &spec, prior.as_ref())? };
            let spec = spec.with_budget(budget);
            let stream = generate(&spec, prior.as_ref(), &setup.dev)?;
            let mut chip = prepare_chip(&setup, &spec, &stream.meta.aggressors, seed)?;
            chip.run(stream.iter())?;
            let victim_flips = chip.flips().iter().filter(|f| f.row == v).count() as u64;
            let outside = chip.flips_outside(&stream.meta.aggressors) as u64;
            Ok(AttackRecord {
                pattern: spec.kind.as_str().into(),
                victim: v,
                hammers: stream.meta.hammers,
                victim_flips,
                other_flips: outside - victim_flips,
                seed,
            })
        })
        .collect()
}

/// First-flip search over the configured grid and victims.
pub fn characterize(cfg: &RunConfig) -> Result<ExperimentResult> {
    let setup = cfg.chip_setup()?;
    let base = cfg.pattern_spec(cfg.victims.first().copied().unwrap_or(0));
    run_sweep(&setup, &base, &cfg.grid(), &cfg.victims, &cfg.bisection, cfg.seed)
}

/// PRAC plan derived from the configured profile: weights from the lowest
/// first-flip count per kind, the threshold from the row-hammer minimum.
pub fn prac_plan(cfg: &RunConfig) -> Result<PracPlan> {
    let p = cfg.load_profile()?;
    let simra = p.simra.map_or(p.rh.min / p.base[2], |s| s.min);
    let comra = p.comra.map_or(p.rh.min / p.base[1], |s| s.min);
    Ok(PracPlan {
        lowest: LowestHcFirst { rh: p.rh.min, comra, simra },
        theta: p.rh.min,
        blast: blast_factor(p.d_factor, p.max_distance),
        per_activation: [0, 1, 2].map(|i| p.base[i] * if i == 0 { 1.0 } else { 0.5 }),
    })
}

/// PRAC overhead for every mix, period and configured variant.
pub fn mitigation_eval(cfg: &RunConfig) -> Result<Vec<PerfRecord>> {
    let perf = PerfConfig { instructions: cfg.perf_instructions, timing: cfg.timing, ..PerfConfig::default() };
    let mixes = Mix::generate(cfg.perf_mixes, SeedTree::new(cfg.seed).seed("mixes"));
    evaluate(&perf, &mixes, &cfg.perf_periods, &cfg.perf_variants, &prac_plan(cfg)?, cfg.seed)
}

/// Writes the first victim's command stream as a trace file.
pub fn trace_gen(cfg: &RunConfig, path: &Path) -> Result<usize> {
    let setup = cfg.chip_setup()?;
    let v = cfg.victims.first().copied().ok_or_else(|| SimError::Config("no victim rows configured".into()))?;
    let spec = cfg.pattern_spec(v);
    let prior = if spec.kind == PatternKind::Combined {
        Some(combined_priors(&setup, &spec, &cfg.bisection, cfg.seed)?)
    } else {
        None
    };
    let budget = if cfg.budget > 0 { cfg.budget } else { 1000 };
    let stream = generate(&spec.with_budget(budget), prior.as_ref(), &setup.dev)?.collect();
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_trace(&mut f, &stream.events)?;
    f.flush()?;
    Ok(stream.events.len())
}

pub fn write_csv<T: Serialize, W: Write>(w: W, header: &[&str], rows: &[T]) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record(header)?;
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads a file written with [`TRR_COLUMNS`].
pub fn read_trr_records<R: std::io::Read>(r: R) -> Result<Vec<TrrRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    if rd.headers()?.iter().ne(TRR_COLUMNS) {
        return Err(SimError::Config("unexpected TRR results header".into()));
    }
    rd.deserialize().map(|r| r.map_err(SimError::from)).collect()
}

/// Writes `manifest.txt` in `dir`: the full config plus the list of outputs.
pub fn write_manifest(dir: &Path, cfg: &RunConfig, command: &str, outputs: &[PathBuf]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join("manifest.txt");
    let mut f = std::fs::File::create(&path)?;
    writeln!(f, "# command: {command}")?;
    for o in outputs {
        writeln!(f, "# output: {}", o.file_name().map(|n| n.to_string_lossy()).unwrap_or_default())?;
    }
    f.write_all(cfg.to_kv().as_bytes())?;
    Ok(path)
}
