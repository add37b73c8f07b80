//! PRAC performance overhead under PuD traffic across PuD periods.
//!
//! cargo run --release --example prac_overhead -- [mixes] [out.csv]

use pudsim::dram::ns;
use pudsim::mitigation::{blast_factor, LowestHcFirst, PracPlan};
use pudsim::perf::{evaluate, mean_overhead, write_perf_file, Mix, PerfConfig, Variant};

fn main() -> pudsim::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let mixes: u32 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let plan = PracPlan {
        lowest: LowestHcFirst { rh: 4000.0, comra: 400.0, simra: 20.0 },
        theta: 4123.0,
        blast: blast_factor(0.47, 2),
        per_activation: [1.0, 5.0, 100.0],
    };
    let periods: Vec<u64> = [125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0, 16000.0].map(ns).to_vec();
    let variants = [Variant::PoNaive, Variant::PoWorstCase, Variant::AoWorstCase];
    let recs = evaluate(&PerfConfig::default(), &Mix::generate(mixes, 7), &periods, &variants, &plan, 7)?;
    for (m, p, o) in mean_overhead(&recs) {
        println!("{m:>14} {p:>10} ns  {o:7.2}%");
    }
    if let Some(path) = args.get(2) {
        write_perf_file(path.as_ref(), &recs)?;
    }
    Ok(())
}
