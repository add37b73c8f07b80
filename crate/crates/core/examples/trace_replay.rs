//! Writes a pattern as a command trace, reads it back and replays it.
//!
//! cargo run --example trace_replay -- [trace.txt]

use pudsim::config::RunConfig;
use pudsim::dram::{parse_trace, write_trace};
use pudsim::harness::prepare_chip;
use pudsim::patterns::{generate, PatternKind, PatternSpec};

fn main() -> pudsim::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "simra_trace.txt".into());
    let cfg = RunConfig::default();
    let setup = cfg.chip_setup()?;
    let spec = PatternSpec::new(PatternKind::Simra, 97).with_n(8).with_budget(2000);
    let stream = generate(&spec, None, &setup.dev)?;
    let events = stream.collect().events;
    let mut f = std::fs::File::create(&path)?;
    write_trace(&mut f, &events)?;
    println!("{} commands to {path}; first lines:", events.len());
    let text = std::fs::read_to_string(&path)?;
    for line in text.lines().take(4) {
        println!("  {line}");
    }

    let replay = parse_trace(&text)?;
    let mut chip = prepare_chip(&setup, &spec, &stream.meta.aggressors, cfg.seed)?;
    chip.run(replay)?;
    let mut direct = prepare_chip(&setup, &spec, &stream.meta.aggressors, cfg.seed)?;
    direct.run(stream.iter())?;
    println!("replayed flips {}, direct flips {}", chip.flip_count(), direct.flip_count());
    Ok(())
}
