use rand_distr::{Distribution, StandardNormal};

use super::profile::{ChipProfile, KindStats};
use crate::dram::SubarrayLayout;
use crate::error::{Result, SimError};
use crate::harness::region::{classify_region, Region};
use crate::rng::SeedTree;

/// Per physical row disturbance threshold, sampled once per experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdMap {
    theta: Vec<f64>,
    bit_seed: u64,
}

impl ThresholdMap {
    pub fn constant(rows: u32, theta: f64) -> Self {
        Self { theta: vec![theta.max(1.0); rows as usize], bit_seed: 0 }
    }

    pub fn from_values(theta: Vec<f64>, bit_seed: u64) -> Self {
        Self { theta: theta.into_iter().map(|t| t.max(1.0)).collect(), bit_seed }
    }

    pub fn theta(&self, row: u32) -> f64 {
        self.theta[row as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.theta
    }

    pub fn set(&mut self, row: u32, theta: f64) {
        self.theta[row as usize] = theta.max(1.0);
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Bit position of the `k`-th weakest cell of `row`.
    pub fn weak_bit(&self, row: u32, k: u32, row_bits: usize) -> usize {
        let mut x = self.bit_seed ^ (u64::from(row) << 32) ^ u64::from(k).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        x ^= x >> 31;
        (x % row_bits.max(1) as u64) as usize
    }
}

fn min_over_mean(z: &[f64], sigma: f64) -> f64 {
    let zmin = z.iter().copied().fold(f64::INFINITY, f64::min);
    // Scale by exp(-sigma * zmin) to keep the sum finite for large sigma.
    let mean = z.iter().map(|&v| (sigma * (v - zmin)).exp()).sum::<f64>() / z.len() as f64;
    1.0 / mean
}

/// Log-normal parameters `(mu, sigma)` for which `exp(mu + sigma * z)` has
/// exactly the target minimum and mean over this particular sample `z`.
pub fn fit_lognormal(z: &[f64], stats: KindStats) -> Result<(f64, f64)> {
    if stats.min > stats.mean || stats.min <= 0.0 {
        return Err(SimError::Calibration(format!("infeasible statistics min {} > mean {}", stats.min, stats.mean)));
    }
    if z.len() < 2 || stats.min == stats.mean {
        return Ok((stats.mean.ln(), 0.0));
    }
    let target = stats.min / stats.mean;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while min_over_mean(z, hi) > target {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(SimError::Calibration("cannot reach the requested min/mean ratio".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if min_over_mean(z, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let sigma = 0.5 * (lo + hi);
    let mean_unit = z.iter().map(|&v| (sigma * v).exp()).sum::<f64>() / z.len() as f64;
    Ok((stats.mean.ln() - mean_unit.ln(), sigma))
}

/// Samples one threshold per physical row.
///
/// Standard normal deviates are drawn from the seed, then the log-normal is
/// fitted so that this population has the profile's row-hammer minimum and
/// mean. Region multipliers are normalized to average one before being applied.
pub fn sample_thresholds(profile: &ChipProfile, layout: &SubarrayLayout, seed: u64) -> Result<ThresholdMap> {
    profile.validate()?;
    let rows = layout.rows() as usize;
    let tree = SeedTree::new(seed);
    let mut rng = tree.stream("thresholds");
    let z: Vec<f64> = (0..rows).map(|_| StandardNormal.sample(&mut rng)).collect();
    let (mu, sigma) = fit_lognormal(&z, profile.rh)?;
    let mult: Vec<f64> = (0..rows as u32)
        .map(|r| {
            let e = layout.extent_of(r).expect("layout covers every row");
            profile.region[Region::index(classify_region(r, e))]
        })
        .collect();
    let norm = mult.iter().sum::<f64>() / rows.max(1) as f64;
    let theta = z.iter().zip(&mult).map(|(&zi, &m)| (mu + sigma * zi).exp() * m / norm).collect();
    Ok(ThresholdMap::from_values(theta, tree.seed("weak-bits")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_profile_is_constant() {
        let p = ChipProfile::constant(1000.0);
        let l = SubarrayLayout::uniform(512, 128).unwrap();
        let t = sample_thresholds(&p, &l, 3).unwrap();
        assert!(t.values().iter().all(|&v| (v - 1000.0).abs() < 1e-9));
    }

    #[test]
    fn same_seed_same_map() {
        let p = ChipProfile::with_stats("x", KindStats { min: 25_000.0, mean: 63_240.0 });
        let l = SubarrayLayout::uniform(1024, 512).unwrap();
        assert_eq!(sample_thresholds(&p, &l, 9).unwrap(), sample_thresholds(&p, &l, 9).unwrap());
        assert_ne!(sample_thresholds(&p, &l, 9).unwrap(), sample_thresholds(&p, &l, 10).unwrap());
    }

    #[test]
    fn fit_hits_targets_on_the_sample() {
        let z: Vec<f64> = (0..1000).map(|i| ((i as f64 + 0.5) / 1000.0 - 0.5) * 6.0).collect();
        let (mu, s) = fit_lognormal(&z, KindStats { min: 26.0, mean: 16_140.0 }).unwrap();
        let v: Vec<f64> = z.iter().map(|&x| (mu + s * x).exp()).collect();
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!((min / 26.0 - 1.0).abs() < 1e-6);
        assert!((mean / 16_140.0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn infeasible_rejected() {
        assert!(fit_lognormal(&[0.0, 1.0], KindStats { min: 5.0, mean: 1.0 }).is_err());
    }
}
