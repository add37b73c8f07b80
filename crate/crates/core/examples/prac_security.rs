//! PRAC sized for RowHammer alone versus kind-aware worst-case counters,
//! under SiMRA and CoMRA hammering of a chip whose rows all flip at 4123.
//!
//! cargo run --release --example prac_security

use pudsim::chip::ChipSetup;
use pudsim::disturbance::{ChipProfile, ThresholdMap};
use pudsim::dram::Device;
use pudsim::harness::prepare_chip;
use pudsim::mitigation::{blast_factor, safe_threshold, LowestHcFirst, PracConfig, PracMode, PracPlan};
use pudsim::patterns::{generate, PatternKind, PatternSpec};

const THETA: f64 = 4123.0;

fn main() -> pudsim::Result<()> {
    let dev = Device::small(1024, 512, 8)?;
    let mut setup = ChipSetup::new(dev, ChipProfile::constant(THETA), ThresholdMap::constant(1024, THETA))?;
    let t_rc = setup.dev.timing.t_rc;
    let blast = blast_factor(0.47, 2);
    let plan = PracPlan {
        lowest: LowestHcFirst { rh: 4000.0, comra: 400.0, simra: 20.0 },
        theta: THETA,
        blast,
        per_activation: [1.0, 5.0, 100.0],
    };
    let rh_only = PracConfig::new(PracMode::PerfOptimized, safe_threshold(THETA, blast, 1.0, 1.0)?, [1; 3], t_rc);
    let configs = [("none", None), ("rowhammer-only", Some(rh_only)), ("worst-case", Some(plan.worst_case(PracMode::PerfOptimized, t_rc)?))];
    let attacks = [
        PatternSpec::new(PatternKind::RhDouble, 97).with_budget(20_000),
        PatternSpec::new(PatternKind::ComraDouble, 97).with_budget(5_000),
        PatternSpec::new(PatternKind::Simra, 97).with_n(16).with_budget(2_000),
    ];
    for (name, prac) in configs {
        if let Some(p) = &prac {
            println!("{name}: weights {:?}, back-off threshold {}", p.weights, p.rdt);
        }
        setup.prac = prac;
        for spec in &attacks {
            let s = generate(spec, None, &setup.dev)?;
            let mut chip = prepare_chip(&setup, spec, &s.meta.aggressors, 0)?;
            chip.run(s.iter())?;
            let rfms = chip.prac().map_or(0, |p| p.rfms);
            println!("  {:<20} {:>6} flips, {:>6} RFMs", format!("{}-{}", spec.kind, spec.n), chip.flip_count(), rfms);
        }
    }
    Ok(())
}
