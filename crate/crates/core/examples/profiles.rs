//! Shipped chip profiles and the threshold populations sampled from them.
//!
//! cargo run --example profiles

use pudsim::disturbance::sample_thresholds;
use pudsim::dram::SubarrayLayout;
use pudsim::profiles::all_shipped;

fn main() -> pudsim::Result<()> {
    let layout = SubarrayLayout::uniform(10_000, 500)?;
    println!("{:<16} {:>8} {:>8} {:>9} {:>9} {:>8}", "profile", "min", "sampled", "mean", "sampled", "simra");
    for p in all_shipped()? {
        let th = sample_thresholds(&p, &layout, 1)?;
        let v = th.values();
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let simra = p.simra.map_or("-".into(), |s| format!("{:.0}", s.min));
        println!("{:<16} {:>8.0} {:>8.0} {:>9.0} {:>9.0} {:>8}", p.name, p.rh.min, min, p.rh.mean, mean, simra);
    }
    Ok(())
}
