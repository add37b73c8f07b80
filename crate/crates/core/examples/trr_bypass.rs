//! Bitflips of double-sided RowHammer and a SiMRA-32 sampler bypass, with
//! and without a 450-entry sampling TRR, over one refresh window.
//!
//! cargo run --release --example trr_bypass -- [seeds]

use pudsim::config::RunConfig;
use pudsim::mitigation::TrrConfig;
use pudsim::recipes::{trr_eval, trr_reduction, Technique};

fn main() -> pudsim::Result<()> {
    let seeds = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let mut cfg = RunConfig { victims: vec![95], ..RunConfig::default() };
    cfg.trr = Some(TrrConfig::default());
    let techniques = [Technique::RowHammer { n: 2 }, Technique::Simra { n: 32 }];
    let recs = trr_eval(&cfg, &techniques, seeds)?;
    for t in techniques {
        let label = t.label();
        let flips = |on: bool| recs.iter().filter(|r| r.technique == label && r.trr == on).map(|r| r.flips).sum::<u64>();
        println!(
            "{label:>10}: {:>6} flips without TRR, {:>6} with TRR, reduction {:.2}%",
            flips(false),
            flips(true),
            100.0 * trr_reduction(&recs, &label)?
        );
    }
    Ok(())
}
