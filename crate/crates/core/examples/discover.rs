//! Recovers a hidden subarray layout and SiMRA group map from copy and
//! multi-row activation probes alone.
//!
//! cargo run --example discover -- [seed]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pudsim::chip::ChipSetup;
use pudsim::disturbance::{ChipProfile, ThresholdMap};
use pudsim::dram::{Device, Geometry, SimraGroupMap, SubarrayLayout};
use pudsim::harness::{discover_simra_groups, discover_subarrays, probe_group};

fn main() -> pudsim::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = 1024;
    let layout = SubarrayLayout::random(&mut rng, rows, 32, 256)?;
    let groups = SimraGroupMap::random(&mut rng, &layout);
    let dev = Device::new(Geometry { banks: 1, rows, row_bytes: 8, ..Geometry::default() }, layout.clone(), groups.clone())?;
    let setup = ChipSetup::new(dev, ChipProfile::constant(1e12), ThresholdMap::constant(rows, 1e12))?;

    let found = discover_subarrays(&setup)?;
    let map = discover_simra_groups(&setup, &found)?;
    println!("hidden subarrays: {:?}", layout.sizes());
    println!("found subarrays:  {:?}", found.sizes());
    if let SimraGroupMap::Aligned { span_bits } = &map {
        let sizes: Vec<u32> = span_bits.iter().map(|&s| if s == 0 { 0 } else { 1 << s }).collect();
        println!("largest group per subarray: {sizes:?}");
    }
    println!("exact match: {}", found == layout && map == groups);

    // one concrete group: the pair that differs in the top bits of the first block
    let e = found.extents()[0];
    if let Some(g) = map.group(&found, e.first + 3, e.first) {
        println!("ACT {} PRE ACT {} opens {:?}", e.first + 3, e.first, probe_group(&setup, e.first + 3, e.first, None)?);
        assert_eq!(probe_group(&setup, e.first + 3, e.first, None)?, g);
    }
    Ok(())
}
