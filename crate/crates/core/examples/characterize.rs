//! First-flip hammer counts of RowHammer, CoMRA and SiMRA on one chip profile.
//!
//! cargo run --release --example characterize -- [profile] [results.csv]

use pudsim::config::RunConfig;
use pudsim::harness::{run_sweep, write_records, SweepGrid};
use pudsim::patterns::{PatternKind, PatternSpec};

fn main() -> pudsim::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let cfg = RunConfig { profile: args.get(1).cloned().unwrap_or(RunConfig::default().profile), ..RunConfig::default() };
    let setup = cfg.chip_setup()?;
    println!("profile {} ({} {})", setup.profile.name, setup.profile.vendor, setup.profile.density);
    let victims: Vec<u32> = (0..24).map(|k| 41 + 40 * k).collect();
    let mut all = Vec::new();
    // a 32-row group has no row on both sides, so SiMRA-32 hammers block-edge victims from one side
    let edges: Vec<u32> = (0..12).map(|k| 95 + 64 * k).collect();
    let runs = [
        (PatternKind::RhDouble, vec![2], false),
        (PatternKind::ComraDouble, vec![2], false),
        (PatternKind::Simra, vec![2, 4, 8, 16], false),
        (PatternKind::Simra, vec![32], true),
    ];
    for (kind, ns, single_sided) in runs {
        let base = PatternSpec { single_sided, ..PatternSpec::new(kind, victims[0]) };
        let grid = SweepGrid { ns, ..SweepGrid::single(&base, cfg.temp_c) };
        let rows = if single_sided { &edges } else { &victims };
        let res = run_sweep(&setup, &base, &grid, rows, &cfg.bisection, cfg.seed)?;
        for &n in &grid.ns {
            if let Some(s) = res.stats(|r| r.n == n) {
                let label = if kind == PatternKind::Simra { format!("simra-{n}") } else { kind.to_string() };
                println!(
                    "{label:>14}: {} rows, min {:>6} mean {:>9.1} {}s",
                    s.count,
                    s.min,
                    s.mean,
                    kind.hammer_unit()
                );
            }
        }
        for f in &res.failures {
            eprintln!("row {} failed: {}", f.row, f.error);
        }
        all.extend(res.records);
    }
    if let Some(path) = args.get(2) {
        write_records(&all, std::fs::File::create(path)?)?;
        println!("wrote {} records to {path}", all.len());
    }
    Ok(())
}
