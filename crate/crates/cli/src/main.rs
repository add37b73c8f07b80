use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pudsim::config::{load_config, RunConfig};
use pudsim::dram::parse_ns;
use pudsim::harness::read_records;
use pudsim::patterns::PatternKind;
use pudsim::perf::{Variant, PERF_COLUMNS};
use pudsim::profiles::load_profile;
use pudsim::recipes::{self, read_trr_records, write_csv, write_manifest, Technique, ATTACK_COLUMNS, TRR_COLUMNS};
use pudsim::report::{self, ProfileResults, ReportFilter};
use pudsim::{Result, SimError};

#[derive(Parser)]
#[command(name = "pudsim", version, about = "Read-disturbance simulator for multi-row DRAM activation")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Reject unknown config keys.
    #[arg(long, global = true)]
    strict: bool,
    /// Override a config key, e.g. `--set pattern.kind=simra`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// First-flip hammer counts over the configured sweep.
    Characterize,
    /// Fixed-budget hammering of every configured victim.
    Attack,
    /// Bitflips with and without TRR.
    TrrEval {
        /// `nsided` or `simra`.
        #[arg(long, default_value = "nsided")]
        pattern: String,
        #[arg(long, default_value_t = 2)]
        n: u32,
    },
    /// PRAC overhead under PuD traffic.
    MitigationEval {
        #[arg(long)]
        variant: Vec<String>,
        /// PuD period in ns; repeatable.
        #[arg(long)]
        period: Vec<String>,
    },
    /// Writes the first victim's command stream.
    TraceGen {
        #[arg(long, default_value = "trace.txt")]
        file: String,
    },
    /// Aggregates earlier results.
    Report {
        #[command(subcommand)]
        kind: ReportKind,
    },
}

#[derive(Subcommand)]
enum ReportKind {
    /// First-flip change between two patterns, from `profile=results.csv` pairs;
    /// a profile may be named more than once.
    Change {
        #[arg(long, default_value = "rh-double")]
        baseline: String,
        #[arg(long, default_value = "comra-double")]
        test: String,
        #[arg(long)]
        vendor: Option<String>,
        #[arg(required = true)]
        results: Vec<String>,
    },
    /// Mean bitflips per technique from a `trr-eval` CSV.
    Trr { input: PathBuf },
}

fn build_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => load_config(p, c.strict)?,
        None => RunConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.out = o.clone();
    }
    if let Some(j) = c.jobs {
        cfg.jobs = j;
    }
    if !c.set.is_empty() {
        let mut text = cfg.to_kv();
        for s in &c.set {
            let (k, v) =
                s.split_once('=').ok_or_else(|| SimError::Config(format!("--set expects KEY=VALUE, got `{s}`")))?;
            let k = k.trim();
            let known = cfg.entries().iter().any(|(name, _)| *name == k);
            if !known {
                return Err(SimError::Config(format!("--set: unknown key '{k}'")));
            }
            text = text
                .lines()
                .map(|l| if l.split('=').next().map(str::trim) == Some(k) { format!("{k} = {}", v.trim()) } else { l.to_string() })
                .collect::<Vec<_>>()
                .join("\n");
        }
        cfg = RunConfig::from_kv(&text, true)?;
    }
    Ok(cfg)
}

fn out_file(cfg: &RunConfig, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(&cfg.out)?;
    Ok(cfg.out.join(name))
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = build_config(&cli.common)?;
    if cfg.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build_global()
            .map_err(|e| SimError::Config(format!("cannot start {} workers: {e}", cfg.jobs)))?;
    }
    let outputs = match cli.cmd {
        Cmd::Characterize => {
            let res = recipes::characterize(&cfg)?;
            for f in &res.failures {
                log::warn!("cell failed: {}", f.error);
            }
            let p = out_file(&cfg, "results.csv")?;
            res.write_csv(std::fs::File::create(&p)?)?;
            if let Some(s) = res.stats(|_| true) {
                println!("{} rows, min {} mean {:.1}", s.count, s.min, s.mean);
            }
            vec![p]
        }
        Cmd::Attack => {
            let recs = recipes::attack(&cfg)?;
            let p = out_file(&cfg, "attack.csv")?;
            write_csv(std::fs::File::create(&p)?, &ATTACK_COLUMNS, &recs)?;
            for r in &recs {
                println!("victim {}: {} flips after {} hammers", r.victim, r.victim_flips, r.hammers);
            }
            vec![p]
        }
        Cmd::TrrEval { pattern, n } => {
            let t = match pattern.as_str() {
                "nsided" | "rh" => Technique::RowHammer { n },
                "simra" => Technique::Simra { n },
                other => return Err(SimError::Config(format!("unknown TRR pattern `{other}`"))),
            };
            cfg.trr.get_or_insert_with(Default::default);
            let recs = recipes::trr_eval(&cfg, &[t], cfg.trr_seeds)?;
            let p = out_file(&cfg, "trr.csv")?;
            write_csv(std::fs::File::create(&p)?, &TRR_COLUMNS, &recs)?;
            for row in report::trr_summary(&recs)? {
                println!("{} trr={}: {:.1} flips", row.technique, row.trr, row.mean_flips);
            }
            vec![p]
        }
        Cmd::MitigationEval { variant, period } => {
            if !variant.is_empty() {
                cfg.perf_variants = variant.iter().map(|v| Variant::parse(v)).collect::<Result<_>>()?;
            }
            if !period.is_empty() {
                cfg.perf_periods = period.iter().map(|p| parse_ns(p)).collect::<Result<_>>()?;
            }
            let recs = recipes::mitigation_eval(&cfg)?;
            let p = out_file(&cfg, "perf.csv")?;
            write_csv(std::fs::File::create(&p)?, &PERF_COLUMNS, &recs)?;
            for (m, per, o) in pudsim::perf::mean_overhead(&recs) {
                println!("{m} @ {per} ns: {o:.2}%");
            }
            vec![p]
        }
        Cmd::TraceGen { file } => {
            let p = out_file(&cfg, &file)?;
            let n = recipes::trace_gen(&cfg, &p)?;
            println!("{n} commands");
            vec![p]
        }
        Cmd::Report { kind } => report_cmd(&cfg, kind)?,
    };
    let command = std::env::args().collect::<Vec<_>>().join(" ");
    write_manifest(&cfg.out, &cfg, &command, &outputs)?;
    Ok(())
}

fn report_cmd(cfg: &RunConfig, kind: ReportKind) -> Result<Vec<PathBuf>> {
    match kind {
        ReportKind::Change { baseline, test, vendor, results } => {
            let mut all = Vec::new();
            for item in &results {
                let (name, path) =
                    item.split_once('=').ok_or_else(|| SimError::Config(format!("expected PROFILE=FILE, got `{item}`")))?;
                let profile = load_profile(name)?;
                let records = read_records(std::fs::File::open(Path::new(path))?)?;
                match all.iter_mut().find(|p: &&mut ProfileResults| p.profile == profile.name) {
                    Some(p) => p.records.extend(records),
                    None => all.push(ProfileResults { profile: profile.name, vendor: profile.vendor, records }),
                }
            }
            let filter = ReportFilter { vendor, profile: None };
            let (rows, minima) =
                report::hcfirst_change(&all, PatternKind::parse(&baseline)?, PatternKind::parse(&test)?, &filter)?;
            report::emit_change_report(&cfg.out, &rows, &minima)
        }
        ReportKind::Trr { input } => {
            let recs = read_trr_records(std::fs::File::open(&input)?)?;
            Ok(vec![report::emit_trr_report(&cfg.out, &report::trr_summary(&recs)?)?])
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
