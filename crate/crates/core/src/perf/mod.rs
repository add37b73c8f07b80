//! Cycle-approximate memory-system model of PRAC under PuD traffic.
//!
//! Four conventional cores and one PuD core share a dual-rank channel. Each
//! mix runs once per mitigation variant and PuD period; overhead is the loss
//! of weighted speedup against the same mix without mitigation.

mod sched;
mod sim;

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dram::{fmt_ns, Ps};
use crate::error::{Result, SimError};
use crate::mitigation::{PracConfig, PracMode, PracPlan};
use crate::rng::SeedTree;

pub use sched::{schedule, weighted_speedup, QueuedRow};
pub use sim::{run, CoreSpec, Mix, PerfConfig, RunStats, Workload};

pub const PERF_COLUMNS: [&str; 7] =
    ["mix_id", "period_ns", "mitigation", "weighted_speedup", "overhead_pct", "backoffs", "rfm_count"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    None,
    PoNaive,
    PoWorstCase,
    AoNaive,
    AoWorstCase,
}

impl Variant {
    pub const ALL: [Variant; 5] =
        [Variant::None, Variant::PoNaive, Variant::PoWorstCase, Variant::AoNaive, Variant::AoWorstCase];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::None => "none",
            Variant::PoNaive => "prac-po-naive",
            Variant::PoWorstCase => "prac-po-wc",
            Variant::AoNaive => "prac-ao-naive",
            Variant::AoWorstCase => "prac-ao-wc",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| SimError::Config(format!("unknown mitigation `{s}`")))
    }

    pub fn prac(self, plan: &PracPlan, t_rc: Ps) -> Result<Option<PracConfig>> {
        Ok(match self {
            Variant::None => None,
            Variant::PoNaive => Some(plan.naive(PracMode::PerfOptimized, t_rc)?),
            Variant::PoWorstCase => Some(plan.worst_case(PracMode::PerfOptimized, t_rc)?),
            Variant::AoNaive => Some(plan.naive(PracMode::AreaOptimized, t_rc)?),
            Variant::AoWorstCase => Some(plan.worst_case(PracMode::AreaOptimized, t_rc)?),
        })
    }
}

/// One row of the performance CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfRecord {
    pub mix_id: u32,
    pub period_ns: String,
    pub mitigation: String,
    pub weighted_speedup: f64,
    pub overhead_pct: f64,
    pub backoffs: u64,
    pub rfm_count: u64,
}

fn mix_cores(mix: &Mix) -> Vec<(usize, CoreSpec)> {
    mix.cores.iter().copied().enumerate().collect()
}

/// Progress rates of every core running alone without mitigation.
pub fn alone_rates(cfg: &PerfConfig, mix: &Mix, period: Ps, seed: u64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(mix.cores.len() + 1);
    for (slot, spec) in mix_cores(mix) {
        out.push(run(cfg, &[(slot, spec)], None, None, seed)?.rates[0]);
    }
    let pud = sim::run(cfg, &[], Some(period), None, seed)?;
    out.push(pud.rates[0]);
    Ok(out)
}

/// Runs one mix at one period under each variant; `None` is always run as
/// the overhead baseline and reported first.
pub fn evaluate_mix(
    cfg: &PerfConfig,
    mix: &Mix,
    period: Ps,
    variants: &[Variant],
    plan: &PracPlan,
    seed: u64,
) -> Result<Vec<PerfRecord>> {
    let seed = SeedTree::new(seed).child("mix", u64::from(mix.id)).root();
    let alone = alone_rates(cfg, mix, period, seed)?;
    let cores = mix_cores(mix);
    let mut wanted = vec![Variant::None];
    wanted.extend(variants.iter().copied().filter(|v| *v != Variant::None));
    let mut baseline = None;
    let mut out = Vec::new();
    for v in wanted {
        let prac = v.prac(plan, cfg.timing.t_rc)?;
        let r = run(cfg, &cores, Some(period), prac.as_ref(), seed)?;
        let ws = weighted_speedup(&r.rates, &alone)?;
        let base = *baseline.get_or_insert(ws);
        out.push(PerfRecord {
            mix_id: mix.id,
            period_ns: fmt_ns(period),
            mitigation: v.as_str().to_string(),
            weighted_speedup: ws,
            overhead_pct: 100.0 * (base - ws) / base,
            backoffs: r.backoffs,
            rfm_count: r.rfms,
        });
    }
    Ok(out)
}

/// Every mix at every period, in mix-major, period, variant order.
pub fn evaluate(
    cfg: &PerfConfig,
    mixes: &[Mix],
    periods: &[Ps],
    variants: &[Variant],
    plan: &PracPlan,
    seed: u64,
) -> Result<Vec<PerfRecord>> {
    let jobs: Vec<(&Mix, Ps)> = mixes.iter().flat_map(|m| periods.iter().map(move |&p| (m, p))).collect();
    let parts: Vec<Result<Vec<PerfRecord>>> =
        jobs.par_iter().map(|(m, p)| evaluate_mix(cfg, m, *p, variants, plan, seed)).collect();
    let mut out = Vec::new();
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Mean overhead per (variant, period) in the order first seen.
pub fn mean_overhead(records: &[PerfRecord]) -> Vec<(String, String, f64)> {
    let mut keys: Vec<(String, String)> = Vec::new();
    let mut sums: Vec<(f64, u32)> = Vec::new();
    for r in records {
        let k = (r.mitigation.clone(), r.period_ns.clone());
        let i = match keys.iter().position(|x| *x == k) {
            Some(i) => i,
            None => {
                keys.push(k);
                sums.push((0.0, 0));
                keys.len() - 1
            }
        };
        sums[i].0 += r.overhead_pct;
        sums[i].1 += 1;
    }
    keys.into_iter().zip(sums).map(|((m, p), (s, n))| (m, p, s / f64::from(n))).collect()
}

pub fn write_perf_csv<W: Write>(w: W, records: &[PerfRecord]) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record(PERF_COLUMNS)?;
    for r in records {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_perf_file(path: &Path, records: &[PerfRecord]) -> Result<()> {
    write_perf_csv(std::fs::File::create(path)?, records)
}
