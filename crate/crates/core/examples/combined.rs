//! Spending part of a row's budget with CoMRA and SiMRA before RowHammer.
//!
//! For each victim the multi-row first-flip counts are measured first; the
//! combined pattern then runs 90% of them as a prefix and counts how many
//! RowHammer pairs are still needed.
//!
//! cargo run --release --example combined -- [fraction]

use pudsim::config::RunConfig;
use pudsim::harness::{run_sweep, SweepGrid};
use pudsim::patterns::{CombinedMix, PatternKind, PatternSpec};

fn main() -> pudsim::Result<()> {
    let fraction = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.9);
    let cfg = RunConfig::default();
    let setup = cfg.chip_setup()?;
    let victims: Vec<u32> = (0..12).map(|k| 41 + 80 * k).collect();
    let rh = PatternSpec::new(PatternKind::RhDouble, victims[0]);
    let rh_res = run_sweep(&setup, &rh, &SweepGrid::single(&rh, cfg.temp_c), &victims, &cfg.bisection, cfg.seed)?;
    println!("{:>5} {:>10} {:>10} {:>10} {:>10}", "row", "rh-only", "comra", "simra", "both");
    let mixes = [
        CombinedMix { comra: true, simra: false },
        CombinedMix { comra: false, simra: true },
        CombinedMix { comra: true, simra: true },
    ];
    let mut columns = Vec::new();
    for mix in mixes {
        let spec = PatternSpec { fraction, mix, ..PatternSpec::new(PatternKind::Combined, victims[0]) };
        let res = run_sweep(&setup, &spec, &SweepGrid::single(&spec, cfg.temp_c), &victims, &cfg.bisection, cfg.seed)?;
        columns.push(res.records);
    }
    let show = |h: Option<u64>| h.map_or("-".to_string(), |v| v.to_string());
    for (i, r) in rh_res.records.iter().enumerate() {
        println!(
            "{:>5} {:>10} {:>10} {:>10} {:>10}",
            r.row,
            show(r.hcfirst),
            show(columns[0].get(i).and_then(|c| c.hcfirst)),
            show(columns[1].get(i).and_then(|c| c.hcfirst)),
            show(columns[2].get(i).and_then(|c| c.hcfirst)),
        );
    }
    Ok(())
}
