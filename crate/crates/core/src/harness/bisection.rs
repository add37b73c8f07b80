use crate::chip::{Chip, ChipSetup};
use crate::error::{Result, SimError};
use crate::patterns::{generate, PatternSpec, PriorHcFirst};
use crate::rng::SeedTree;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionConfig {
    /// Relative width of the final bracket.
    pub tolerance: f64,
    pub repeats: u32,
    /// Largest hammer count probed; defaults to what fits in one refresh window.
    pub cap: Option<u64>,
}

impl Default for BisectionConfig {
    fn default() -> Self {
        Self { tolerance: 0.01, repeats: 5, cap: None }
    }
}

impl BisectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(SimError::Config(format!("bisection tolerance must be positive, got {}", self.tolerance)));
        }
        if self.repeats == 0 {
            return Err(SimError::Config("bisection needs at least one repeat".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HcFirst {
    /// First-flip hammer count, `None` when nothing flipped within the cap.
    pub hammers: Option<u64>,
    /// Victim bitflips observed at that count.
    pub flips: usize,
    pub probes: u32,
}

/// Builds a chip with the victim holding the negated aggressor data.
pub fn prepare_chip(setup: &ChipSetup, spec: &PatternSpec, aggressors: &[u32], seed: u64) -> Result<Chip> {
    let mut chip = setup.build(seed)?;
    chip.fill_all(spec.dp_victim);
    for &r in aggressors {
        chip.fill_row(r, spec.dp_aggr);
    }
    Ok(chip)
}

/// Hammers per refresh window for `spec`, after any multi-row prefix.
pub fn default_cap(setup: &ChipSetup, spec: &PatternSpec, prior: Option<&PriorHcFirst>) -> Result<u64> {
    let s = generate(&PatternSpec { budget: 0, start: 0, ..spec.clone() }, prior, &setup.dev)?;
    let window = setup.dev.timing.t_refw;
    Ok(window.saturating_sub(s.end()) / s.meta.period.max(1))
}

/// Whether the victim flips within `n` hammers; stops at the first flip.
fn probe(setup: &ChipSetup, spec: &PatternSpec, prior: Option<&PriorHcFirst>, n: u64, seed: u64) -> Result<bool> {
    let s = generate(&PatternSpec { budget: n, ..spec.clone() }, prior, &setup.dev)?;
    let mut chip = prepare_chip(setup, spec, &s.meta.aggressors, seed)?;
    let v = spec.victim;
    chip.run_until(s.iter(), |f| f.row == v)
}

/// Victim bitflips after exactly `n` hammers.
pub fn victim_flips(setup: &ChipSetup, spec: &PatternSpec, prior: Option<&PriorHcFirst>, n: u64, seed: u64) -> Result<usize> {
    let s = generate(&PatternSpec { budget: n, ..spec.clone() }, prior, &setup.dev)?;
    let mut chip = prepare_chip(setup, spec, &s.meta.aggressors, seed)?;
    chip.run(s.iter())?;
    Ok(chip.flips().iter().filter(|f| f.row == spec.victim).count())
}

/// Hammer count at which the victim first flips, by bisection.
///
/// The bracket starts at `[0, cap]` with the cap probed first, and narrows
/// until the smallest flipping count is within `tolerance` of the largest
/// non-flipping one. Repeats use fresh chips and sub-seeds; the minimum is
/// reported. Patterns without random elements run once, since every repeat
/// would be identical.
pub fn find_hcfirst(
    setup: &ChipSetup,
    spec: &PatternSpec,
    prior: Option<&PriorHcFirst>,
    cfg: &BisectionConfig,
    seed: u64,
) -> Result<HcFirst> {
    cfg.validate()?;
    let cap = match cfg.cap {
        Some(c) => c,
        None => default_cap(setup, spec, prior)?,
    };
    let randomized = generate(&PatternSpec { budget: 1, ..spec.clone() }, prior, &setup.dev)?.meta.partial;
    let repeats = if randomized { cfg.repeats } else { 1 };
    let tree = SeedTree::new(seed);
    let mut best = HcFirst { hammers: None, flips: 0, probes: 0 };
    let mut best_seed = 0;
    for r in 0..repeats {
        let sub = tree.child("repeat", u64::from(r)).root();
        best.probes += 1;
        if !probe(setup, spec, prior, cap, sub)? {
            continue;
        }
        let (mut lo, mut hi) = (0u64, cap);
        while hi - lo > 1 && (hi - lo) as f64 > cfg.tolerance * lo as f64 {
            let mid = lo + (hi - lo) / 2;
            best.probes += 1;
            if probe(setup, spec, prior, mid, sub)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        if best.hammers.is_none_or(|b| hi < b) {
            best.hammers = Some(hi);
            best_seed = sub;
        }
    }
    if let Some(h) = best.hammers {
        best.flips = victim_flips(setup, spec, prior, h, best_seed)?;
    }
    Ok(best)
}

/// Reference answer: hammer index of the victim's first flip in one long run.
pub fn first_flip_by_scan(
    setup: &ChipSetup,
    spec: &PatternSpec,
    prior: Option<&PriorHcFirst>,
    cap: u64,
    seed: u64,
) -> Result<Option<u64>> {
    let s = generate(&PatternSpec { budget: cap, ..spec.clone() }, prior, &setup.dev)?;
    let prefix_end = generate(&PatternSpec { budget: 0, ..spec.clone() }, prior, &setup.dev)?.end();
    let mut chip = prepare_chip(setup, spec, &s.meta.aggressors, seed)?;
    let v = spec.victim;
    if !chip.run_until(s.iter(), |f| f.row == v)? {
        return Ok(None);
    }
    let t = chip.flips().iter().find(|f| f.row == v).map(|f| f.time).unwrap_or(0);
    // an activation is charged when its row closes, inside hammer `k` at offset < period
    Ok(Some((t.saturating_sub(prefix_end)) / s.meta.period + 1))
}
