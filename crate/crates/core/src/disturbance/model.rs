use super::profile::{kind_index, ChipProfile, FlipDir};
use super::thresholds::ThresholdMap;
use crate::dram::{ActKind, AnalogEffect, Ps};
use crate::error::{Result, SimError};

/// Operating conditions shared by every contribution of an experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conditions {
    pub temp_c: f64,
}

impl Default for Conditions {
    fn default() -> Self {
        Self { temp_c: 80.0 }
    }
}

/// One disturbance error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bitflip {
    pub row: u32,
    pub bit: usize,
    pub direction: FlipDir,
    pub time: Ps,
    pub kind: ActKind,
}

/// Hammer units one hammer of `kind` delivers to a victim at `dist`.
///
/// For multi-row kinds this is the amount a victim sandwiched between two
/// activated rows receives; `accumulate` splits it evenly over those rows.
pub fn contribution(
    kind: ActKind,
    dp: Option<(u8, u8)>,
    temp_c: f64,
    t_on: Ps,
    dist: u32,
    profile: &ChipProfile,
) -> Result<f64> {
    if dist == 0 {
        return Err(SimError::Config("aggressor distance must be at least 1".into()));
    }
    let f_dp = dp.map_or(1.0, |(a, v)| profile.f_dp(kind, a, v));
    Ok(profile.base(kind)
        * f_dp
        * profile.f_temp(kind, temp_c)
        * profile.f_on(kind, t_on)
        * profile.d_factor.powi(dist as i32 - 1))
}

/// Share of a kind's contribution carried by each activated row.
pub fn per_row_share(kind: ActKind) -> f64 {
    match kind {
        ActKind::RowHammer => 1.0,
        ActKind::Comra | ActKind::Simra => 0.5,
    }
}

pub fn flip_direction(kind: ActKind, profile: &ChipProfile) -> FlipDir {
    profile.direction[kind_index(kind)]
}

/// Looks a kind up by name first; unknown names are configuration errors.
pub fn flip_direction_named(kind: &str, profile: &ChipProfile) -> Result<FlipDir> {
    Ok(flip_direction(ActKind::parse(kind)?, profile))
}

/// Accumulated effective hammer units per physical row.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceState {
    h: Vec<f64>,
    last_refresh: Vec<Ps>,
    flipped: Vec<u32>,
    row_bits: usize,
}

impl DisturbanceState {
    pub fn new(rows: u32, row_bytes: usize) -> Self {
        let n = rows as usize;
        Self { h: vec![0.0; n], last_refresh: vec![0; n], flipped: vec![0; n], row_bits: row_bytes * 8 }
    }

    pub fn h(&self, row: u32) -> f64 {
        self.h[row as usize]
    }

    pub fn last_refresh(&self, row: u32) -> Ps {
        self.last_refresh[row as usize]
    }

    /// Distinct bits of `row` flipped so far.
    pub fn flipped_bits(&self, row: u32) -> u32 {
        self.flipped[row as usize]
    }

    pub fn total_flipped(&self) -> u64 {
        self.flipped.iter().map(|&f| u64::from(f)).sum()
    }

    pub fn reset(&mut self) {
        self.h.fill(0.0);
        self.last_refresh.fill(0);
        self.flipped.fill(0);
    }

    fn check_flips(&mut self, v: usize, th: &ThresholdMap, p: &ChipProfile, time: Ps, kind: ActKind, out: &mut Vec<Bitflip>) {
        let theta = th.theta(v as u32);
        while (self.flipped[v] as usize) < self.row_bits
            && self.h[v] >= theta * p.escalation.powi(self.flipped[v] as i32)
        {
            let k = self.flipped[v];
            out.push(Bitflip {
                row: v as u32,
                bit: th.weak_bit(v as u32, k, self.row_bits),
                direction: flip_direction(kind, p),
                time,
                kind,
            });
            self.flipped[v] += 1;
        }
    }

    /// Applies effects in order and returns the bitflips they cause.
    ///
    /// `data(row)` gives the representative byte of a row for the
    /// data-pattern multiplier.
    pub fn accumulate(
        &mut self,
        effects: &[AnalogEffect],
        th: &ThresholdMap,
        p: &ChipProfile,
        cond: &Conditions,
        data: &dyn Fn(u32) -> u8,
    ) -> Vec<Bitflip> {
        let mut out = Vec::new();
        let n = self.h.len() as i64;
        for e in effects {
            match e {
                AnalogEffect::Activation { time, rows, kind, t_on } => {
                    let k = *kind;
                    let scale = p.base(k) * p.f_temp(k, cond.temp_c) * p.f_on(k, *t_on) * per_row_share(k);
                    for &r in rows {
                        let ra = data(r);
                        let mut fd = 1.0;
                        for dist in 1..=p.max_distance {
                            for v in [r as i64 - dist as i64, r as i64 + dist as i64] {
                                if v < 0 || v >= n {
                                    log::trace!("victim {v} of aggressor {r} outside the bank");
                                    continue;
                                }
                                let vu = v as u32;
                                if rows.len() > 1 && rows.contains(&vu) {
                                    continue;
                                }
                                let c = scale * fd * p.f_dp(k, ra, data(vu));
                                self.h[v as usize] += c;
                                self.check_flips(v as usize, th, p, *time, k, &mut out);
                            }
                            fd *= p.d_factor;
                        }
                    }
                }
                AnalogEffect::Refresh { time, rows } => {
                    for &r in rows {
                        if let Some(h) = self.h.get_mut(r as usize) {
                            *h = 0.0;
                            self.last_refresh[r as usize] = *time;
                        }
                    }
                }
                _ => {}
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dram::ns;

    fn act(time: Ps, rows: Vec<u32>, kind: ActKind) -> AnalogEffect {
        AnalogEffect::Activation { time, rows, kind, t_on: ns(36.0) }
    }

    #[test]
    fn contribution_examples() {
        let p = ChipProfile::constant(1000.0);
        let c = |k, t| contribution(k, None, 80.0, t, 1, &p).unwrap();
        assert_eq!(c(ActKind::RowHammer, ns(36.0)), 1.0);
        assert_eq!(c(ActKind::Simra, ns(36.0)), 200.0);
        assert_eq!(c(ActKind::Comra, ns(36.0)), 10.0);
        assert!((c(ActKind::RowHammer, ns(70200.0)) - 31.15).abs() < 1e-9);
        assert!(contribution(ActKind::RowHammer, None, 80.0, 0, 0, &p).is_err());
        let far = contribution(ActKind::RowHammer, None, 80.0, ns(36.0), 2, &p).unwrap();
        assert!((far - p.d_factor).abs() < 1e-12);
    }

    #[test]
    fn double_sided_pairs_flip_at_500() {
        let p = ChipProfile::constant(1000.0);
        let th = ThresholdMap::constant(16, 1000.0);
        let mut s = DisturbanceState::new(16, 8);
        let mut first = None;
        for pair in 1..=999u64 {
            let fx = [act(pair * 10, vec![7], ActKind::RowHammer), act(pair * 10 + 5, vec![9], ActKind::RowHammer)];
            let flips = s.accumulate(&fx, &th, &p, &Conditions::default(), &|_| 0x55);
            if flips.iter().any(|f| f.row == 8) && first.is_none() {
                first = Some(pair);
            }
        }
        assert_eq!(first, Some(500));
    }

    #[test]
    fn refresh_resets() {
        let p = ChipProfile::constant(1000.0);
        let th = ThresholdMap::constant(16, 1000.0);
        let mut s = DisturbanceState::new(16, 8);
        for i in 0..400 {
            s.accumulate(&[act(i, vec![7], ActKind::RowHammer), act(i, vec![9], ActKind::RowHammer)], &th, &p, &Conditions::default(), &|_| 0);
        }
        s.accumulate(&[AnalogEffect::Refresh { time: 500, rows: vec![8] }], &th, &p, &Conditions::default(), &|_| 0);
        assert_eq!(s.h(8), 0.0);
        let mut flips = Vec::new();
        for i in 0..400 {
            flips.extend(s.accumulate(&[act(600 + i, vec![7], ActKind::RowHammer)], &th, &p, &Conditions::default(), &|_| 0));
        }
        assert!(flips.iter().all(|f| f.row != 8));
    }

    #[test]
    fn sandwiching_simra_flips_at_26() {
        let p = ChipProfile::constant(200.0 * 26.0);
        let th = ThresholdMap::constant(64, 200.0 * 26.0);
        let mut s = DisturbanceState::new(64, 8);
        let mut first = None;
        for op in 1..=40u64 {
            let flips = s.accumulate(&[act(op, vec![0, 2, 4, 6], ActKind::Simra)], &th, &p, &Conditions::default(), &|_| 0);
            if first.is_none() && flips.iter().any(|f| f.row == 3) {
                first = Some(op);
            }
        }
        assert_eq!(first, Some(26));
    }

    #[test]
    fn directions() {
        let mut p = ChipProfile::constant(10.0);
        assert_eq!(flip_direction(ActKind::RowHammer, &p), flip_direction(ActKind::Simra, &p).opposite());
        p.direction = [FlipDir::OneToZero; 3];
        assert_eq!(flip_direction(ActKind::Simra, &p), FlipDir::OneToZero);
        assert!(flip_direction_named("bogus", &p).is_err());
    }
}
