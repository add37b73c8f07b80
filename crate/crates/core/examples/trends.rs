//! How temperature and aggressor on-time move first-flip counts.
//!
//! cargo run --release --example trends

use pudsim::config::RunConfig;
use pudsim::disturbance::contribution;
use pudsim::dram::{ns, ActKind};
use pudsim::harness::{run_sweep, SweepGrid};
use pudsim::patterns::{PatternKind, PatternSpec};

fn main() -> pudsim::Result<()> {
    let cfg = RunConfig::default();
    let setup = cfg.chip_setup()?;
    let victims: Vec<u32> = (0..16).map(|k| 41 + 60 * k).collect();

    let temps = vec![50.0, 60.0, 70.0, 80.0];
    println!("mean first-flip count by temperature");
    for (kind, n) in [(PatternKind::RhDouble, 2), (PatternKind::ComraDouble, 2), (PatternKind::Simra, 4)] {
        let base = PatternSpec::new(kind, victims[0]).with_n(n);
        let grid = SweepGrid { temps: temps.clone(), ..SweepGrid::single(&base, 80.0) };
        let res = run_sweep(&setup, &base, &grid, &victims, &cfg.bisection, cfg.seed)?;
        let means: Vec<String> = temps
            .iter()
            .map(|&t| res.stats(|r| r.temp_c == t).map_or("-".into(), |s| format!("{:.0}", s.mean)))
            .collect();
        println!("  {:<14} {}", format!("{kind}-{n}"), means.join("  "));
    }

    println!("per-hammer disturbance relative to t_AggON = 36 ns");
    for kind in ActKind::ALL {
        let c = |t: f64| contribution(kind, None, 80.0, ns(t), 1, &setup.profile);
        let base = c(36.0)?;
        let row: Vec<String> = [144.0, 7800.0, 70_200.0].iter().map(|&t| Ok(format!("{:.1}x", c(t)? / base))).collect::<pudsim::Result<_>>()?;
        println!("  {:<6} 144 ns {}  7.8 us {}  70.2 us {}", kind.as_str(), row[0], row[1], row[2]);
    }
    Ok(())
}
