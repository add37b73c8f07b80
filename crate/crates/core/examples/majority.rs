//! Bitwise majority through SiMRA: writes N rows, opens them together with
//! a violated ACT-PRE-ACT, and reads the result back.
//!
//! cargo run --example majority

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pudsim::dram::{majority_overwrite, ns, CommandEvent, Device, Ps, GROUP_SIZES};
use pudsim::chip::ChipSetup;
use pudsim::disturbance::{ChipProfile, ThresholdMap};

fn main() -> pudsim::Result<()> {
    let dev = Device::small(512, 512, 8)?;
    let setup = ChipSetup::new(dev, ChipProfile::constant(1e12), ThresholdMap::constant(512, 1e12))?;
    let (t, w) = (setup.dev.timing, setup.dev.dram.simra_window);
    let mut chip = setup.build(0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut now: Ps = ns(10.0);
    for n in GROUP_SIZES {
        let n = n as u32;
        let base = 64;
        let rows: Vec<[u8; 8]> = (0..n).map(|_| rng.next_u64().to_le_bytes()).collect();
        for (j, data) in rows.iter().enumerate() {
            chip.execute(&CommandEvent::act(now, 0, base + j as u32))?;
            chip.execute(&CommandEvent::wr(now + ns(10.0), 0, data.to_vec()))?;
            chip.execute(&CommandEvent::pre(now + t.t_ras, 0))?;
            now += t.t_rc;
        }
        // lowest and highest row of the block differ in every in-block bit
        chip.execute(&CommandEvent::act(now, 0, base + n - 1))?;
        chip.execute(&CommandEvent::pre(now + w, 0))?;
        chip.execute(&CommandEvent::act(now + 2 * w, 0, base))?;
        chip.execute(&CommandEvent::pre(now + 2 * w + t.t_ras, 0))?;
        chip.finish()?;
        now += 2 * w + t.t_rc;

        let refs: Vec<&[u8]> = rows.iter().map(|r| &r[..]).collect();
        let want = majority_overwrite(&refs, setup.dev.dram.tie_bias)?;
        let got = chip.row_data(base);
        let same = (0..n).all(|j| chip.row_data(base + j) == got);
        println!("SiMRA-{n:<2}: result {} (all {n} rows equal: {same}, matches per-bit majority: {})", hex::encode(got), got == want);
    }
    Ok(())
}
