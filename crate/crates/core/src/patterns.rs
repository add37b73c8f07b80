//! Compiles declarative access patterns into timed command streams.
//!
//! Streams are stored as repeated command templates and expanded lazily, so
//! multi-million command attacks never sit in memory at once.

use crate::dram::{ns, CommandEvent, CommandKind, Device, Ps, SimraGroupMap};
use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PatternKind {
    RhSingle,
    RhDouble,
    RhFarDouble,
    RowPress,
    ComraSingle,
    ComraDouble,
    Simra,
    Combined,
    NSidedBypass,
}

impl PatternKind {
    pub const ALL: [PatternKind; 9] = [
        PatternKind::RhSingle,
        PatternKind::RhDouble,
        PatternKind::RhFarDouble,
        PatternKind::RowPress,
        PatternKind::ComraSingle,
        PatternKind::ComraDouble,
        PatternKind::Simra,
        PatternKind::Combined,
        PatternKind::NSidedBypass,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PatternKind::RhSingle => "rh-single",
            PatternKind::RhDouble => "rh-double",
            PatternKind::RhFarDouble => "rh-far-double",
            PatternKind::RowPress => "rowpress",
            PatternKind::ComraSingle => "comra-single",
            PatternKind::ComraDouble => "comra-double",
            PatternKind::Simra => "simra",
            PatternKind::Combined => "combined",
            PatternKind::NSidedBypass => "nsided-bypass",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| SimError::Config(format!("unknown pattern `{s}`")))
    }

    /// Unit in which the hammer count of this pattern is expressed.
    pub fn hammer_unit(self) -> &'static str {
        match self {
            PatternKind::RhSingle => "act",
            PatternKind::RhDouble | PatternKind::RhFarDouble | PatternKind::RowPress | PatternKind::Combined => {
                "act-pair"
            }
            PatternKind::ComraSingle | PatternKind::ComraDouble => "copy-cycle",
            PatternKind::Simra => "simra-op",
            PatternKind::NSidedBypass => "per-aggressor",
        }
    }
}

impl std::fmt::Display for PatternKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Multi-row prefix of a combined pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CombinedMix {
    pub comra: bool,
    pub simra: bool,
}

/// Declarative description of one access pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternSpec {
    pub kind: PatternKind,
    pub bank: u32,
    /// Physical victim row the aggressors are placed around.
    pub victim: u32,
    /// SiMRA group size, or aggressor count for the bypass pattern.
    pub n: u32,
    /// How long each aggressor stays open.
    pub t_aggon: Ps,
    /// PRE-to-ACT gap of multi-row activation.
    pub gap: Ps,
    /// ACT-to-PRE gap of the first SiMRA activation.
    pub act_pre: Ps,
    /// Copy from the far/upper row into the near/lower row instead.
    pub reverse: bool,
    pub budget: u64,
    pub far_gap: u32,
    /// Fraction of the multi-row first-flip count spent before RowHammer.
    pub fraction: f64,
    pub mix: CombinedMix,
    /// Bypass with SiMRA operations instead of N single-row aggressors.
    pub bypass_simra: bool,
    pub dummy: Option<u32>,
    /// Explicit SiMRA bus pair (physical rows).
    pub simra_pair: Option<(u32, u32)>,
    /// Single-sided placement for SiMRA (victim at the group edge).
    pub single_sided: bool,
    pub dp_aggr: u8,
    pub dp_victim: u8,
    pub start: Ps,
}

impl PatternSpec {
    pub fn new(kind: PatternKind, victim: u32) -> Self {
        Self {
            kind,
            bank: 0,
            victim,
            n: 2,
            t_aggon: ns(36.0),
            gap: match kind {
                PatternKind::Simra => ns(3.0),
                _ => ns(7.5),
            },
            act_pre: ns(3.0),
            reverse: false,
            budget: 1,
            far_gap: 100,
            fraction: 0.0,
            mix: CombinedMix::default(),
            bypass_simra: false,
            dummy: None,
            simra_pair: None,
            single_sided: false,
            dp_aggr: 0x00,
            dp_victim: 0xff,
            start: 0,
        }
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_n(mut self, n: u32) -> Self {
        self.n = n;
        self
    }

    pub fn with_data(mut self, aggr: u8, victim: u8) -> Self {
        self.dp_aggr = aggr;
        self.dp_victim = victim;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_aggon == 0 || self.gap == 0 || self.act_pre == 0 {
            return Err(SimError::Spec("pattern gaps must be positive".into()));
        }
        if self.kind == PatternKind::Simra && ![2, 4, 8, 16, 32].contains(&self.n) {
            return Err(SimError::Spec(format!("SiMRA-N needs N in {{2,4,8,16,32}}, got {}", self.n)));
        }
        if self.kind == PatternKind::NSidedBypass && !self.bypass_simra && !(1..=10).contains(&self.n) {
            return Err(SimError::Spec(format!("bypass needs 1..=10 aggressors, got {}", self.n)));
        }
        if self.kind == PatternKind::Combined && !(0.0..1.0).contains(&self.fraction) {
            return Err(SimError::Spec(format!("combined fraction {} outside [0, 1)", self.fraction)));
        }
        Ok(())
    }
}

/// Description of what a stream does, alongside its commands.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StreamMeta {
    pub hammers: u64,
    pub hammer_unit: &'static str,
    /// Multi-row hammers issued before the counted RowHammer part.
    pub prefix_hammers: u64,
    /// Physical rows that hold aggressor data, including internal group rows.
    pub aggressors: Vec<u32>,
    /// Rows issued on the command bus.
    pub bus_rows: Vec<u32>,
    pub partial: bool,
    /// Duration of one hammer, or of one refresh cycle for the bypass.
    pub period: Ps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Step {
    at: Ps,
    kind: CommandKind,
    row: u32,
}

#[derive(Debug, Clone, PartialEq)]
struct Segment {
    steps: Vec<Step>,
    period: Ps,
    repeats: u64,
}

/// Lazily expanded command stream.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternStream {
    bank: u32,
    start: Ps,
    segments: Vec<Segment>,
    pub meta: StreamMeta,
}

/// Materialized command stream.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandStream {
    pub events: Vec<CommandEvent>,
    pub meta: StreamMeta,
}

impl PatternStream {
    pub fn iter(&self) -> StreamIter<'_> {
        StreamIter { s: self, seg: 0, rep: 0, step: 0, base: self.start }
    }

    pub fn len(&self) -> u64 {
        self.segments.iter().map(|s| s.steps.len() as u64 * s.repeats).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Time just past the stream.
    pub fn end(&self) -> Ps {
        self.start + self.segments.iter().map(|s| s.period * s.repeats).sum::<Ps>()
    }

    pub fn collect(&self) -> CommandStream {
        CommandStream { events: self.iter().collect(), meta: self.meta.clone() }
    }

    /// Count of ACTs per segment repetition, for window checks.
    fn max_acts_between_refs(&self) -> usize {
        let mut best = 0;
        for seg in &self.segments {
            let mut run = 0;
            for s in &seg.steps {
                match s.kind {
                    CommandKind::Act => {
                        run += 1;
                        best = best.max(run);
                    }
                    CommandKind::Ref => run = 0,
                    _ => {}
                }
            }
        }
        best
    }
}

pub struct StreamIter<'a> {
    s: &'a PatternStream,
    seg: usize,
    rep: u64,
    step: usize,
    base: Ps,
}

impl Iterator for StreamIter<'_> {
    type Item = CommandEvent;

    fn next(&mut self) -> Option<CommandEvent> {
        loop {
            let seg = self.s.segments.get(self.seg)?;
            if self.rep >= seg.repeats || seg.steps.is_empty() {
                self.base += seg.period * seg.repeats.saturating_sub(self.rep);
                self.seg += 1;
                self.rep = 0;
                self.step = 0;
                continue;
            }
            let st = seg.steps[self.step];
            let time = self.base + st.at;
            self.step += 1;
            if self.step == seg.steps.len() {
                self.step = 0;
                self.rep += 1;
                self.base += seg.period;
            }
            return Some(CommandEvent::new(time, st.kind, self.s.bank, st.row));
        }
    }
}

struct Builder<'a> {
    dev: &'a Device,
    steps: Vec<Step>,
    t: Ps,
}

impl<'a> Builder<'a> {
    fn new(dev: &'a Device) -> Self {
        Self { dev, steps: Vec::new(), t: 0 }
    }

    fn act(&mut self, physical: u32) -> Result<()> {
        let row = self.dev.logical(physical)?;
        self.steps.push(Step { at: self.t, kind: CommandKind::Act, row });
        Ok(())
    }

    fn pre(&mut self) {
        self.steps.push(Step { at: self.t, kind: CommandKind::Pre, row: 0 });
    }

    fn refresh(&mut self) {
        self.steps.push(Step { at: self.t, kind: CommandKind::Ref, row: 0 });
    }

    /// ACT, hold for `t_on`, PRE, then wait `after`.
    fn open_close(&mut self, physical: u32, t_on: Ps, after: Ps) -> Result<()> {
        self.act(physical)?;
        self.t += t_on;
        self.pre();
        self.t += after;
        Ok(())
    }

    fn simra_op(&mut self, r1: u32, r2: u32, spec: &PatternSpec) -> Result<()> {
        self.act(r1)?;
        self.t += spec.act_pre;
        self.pre();
        self.t += spec.gap;
        self.open_close(r2, spec.t_aggon, self.dev.timing.t_rp)
    }

    fn comra_cycle(&mut self, src: u32, dst: u32, spec: &PatternSpec) -> Result<()> {
        self.open_close(src, spec.t_aggon, spec.gap)?;
        self.open_close(dst, spec.t_aggon, self.dev.timing.t_rp)
    }

    fn segment(self, repeats: u64) -> Segment {
        Segment { steps: self.steps, period: self.t, repeats }
    }
}

fn in_bank(dev: &Device, row: i64) -> Result<u32> {
    if row < 0 || row >= i64::from(dev.geometry.rows) {
        return Err(SimError::Spec(format!("aggressor row {row} outside the bank")));
    }
    Ok(row as u32)
}

/// Aggressor rows of the single-row RowHammer family.
fn rh_aggressors(kind: PatternKind, dev: &Device, v: u32) -> Result<Vec<u32>> {
    let v = i64::from(v);
    match kind {
        PatternKind::RhSingle => Ok(vec![in_bank(dev, v - 1).or_else(|_| in_bank(dev, v + 1))?]),
        PatternKind::RhDouble | PatternKind::RowPress | PatternKind::Combined => {
            Ok(vec![in_bank(dev, v - 1)?, in_bank(dev, v + 1)?])
        }
        PatternKind::RhFarDouble => Ok(vec![in_bank(dev, v - 2)?, in_bank(dev, v + 2)?]),
        _ => Err(SimError::Spec(format!("{kind} is not a RowHammer pattern"))),
    }
}

/// Source and destination of a CoMRA pattern around `spec.victim`.
pub fn comra_rows(spec: &PatternSpec, dev: &Device) -> Result<(u32, u32)> {
    let v = i64::from(spec.victim);
    let (near, far) = match spec.kind {
        PatternKind::ComraDouble | PatternKind::Combined => (in_bank(dev, v - 1)?, in_bank(dev, v + 1)?),
        PatternKind::ComraSingle => {
            let g = i64::from(spec.far_gap.max(1));
            let up = in_bank(dev, v + 1).and_then(|n| Ok((n, in_bank(dev, v + 1 + g)?)));
            match up {
                Ok((n, f)) if dev.layout.same_subarray(n, f) && dev.layout.same_subarray(n, spec.victim) => (n, f),
                _ => (in_bank(dev, v - 1)?, in_bank(dev, v - 1 - g)?),
            }
        }
        k => return Err(SimError::Spec(format!("{k} is not a CoMRA pattern"))),
    };
    if !dev.layout.same_subarray(near, far) {
        return Err(SimError::Spec(format!("CoMRA rows {near} and {far} are in different subarrays")));
    }
    Ok(if spec.reverse { (far, near) } else { (near, far) })
}

/// Candidate bus pairs whose groups may touch rows near `v`.
fn candidate_pairs(dev: &Device, v: u32) -> Vec<(u32, u32)> {
    match &dev.groups {
        SimraGroupMap::Table(t) => t.keys().copied().collect(),
        SimraGroupMap::Aligned { .. } => {
            let rows = dev.geometry.rows;
            let lo = v.saturating_sub(40);
            let hi = (v + 40).min(rows - 1);
            let mut out = Vec::new();
            for r2 in lo..=hi {
                let Some(e) = dev.layout.extent_of(r2) else { continue };
                for mask in 1..32u32 {
                    let o1 = (r2 - e.first) ^ mask;
                    if o1 < e.count {
                        out.push((e.first + o1, r2));
                    }
                }
            }
            out
        }
    }
}

/// Picks a SiMRA bus pair whose group of `n` rows hammers `v`.
///
/// Double-sided groups hold both neighbors of `v`; single-sided groups hold
/// exactly one. With `hidden`, pairs whose bus rows have neighbors outside
/// the group are avoided so that a neighbor-refreshing sampler only ever
/// refreshes group rows.
pub fn simra_pair(dev: &Device, v: u32, n: u32, single_sided: bool, hidden: bool) -> Result<(u32, u32, Vec<u32>)> {
    let mut best: Option<((u32, u32, u32, u32), (u32, u32, Vec<u32>))> = None;
    for (r1, r2) in candidate_pairs(dev, v) {
        let Some(g) = dev.groups.group(&dev.layout, r1, r2) else { continue };
        if g.len() as u32 != n || g.contains(&v) {
            continue;
        }
        let below = v > 0 && g.contains(&(v - 1));
        let above = g.contains(&(v + 1));
        let fits = if single_sided { below != above } else { below && above };
        if !fits {
            continue;
        }
        let second = u32::from(single_sided && (g.contains(&(v + 2)) || (v > 1 && g.contains(&(v - 2)))));
        let exposed = if hidden {
            [r1, r2]
                .iter()
                .flat_map(|&r| [r.wrapping_sub(2), r.wrapping_sub(1), r + 1, r + 2])
                .filter(|x| !g.contains(x) && *x != r1 && *x != r2)
                .count() as u32
        } else {
            0
        };
        let key = (u32::from(below && single_sided), second, exposed, r2.abs_diff(v));
        if best.as_ref().is_none_or(|(k, _)| key < *k) {
            best = Some((key, (r1, r2, g)));
        }
    }
    best.map(|(_, p)| p).ok_or_else(|| {
        SimError::Spec(format!(
            "no {}-sided SiMRA-{n} group around row {v}",
            if single_sided { "single" } else { "double" }
        ))
    })
}

fn resolve_simra(spec: &PatternSpec, dev: &Device, hidden: bool) -> Result<(u32, u32, Vec<u32>)> {
    match spec.simra_pair {
        Some((r1, r2)) => {
            let g = dev
                .groups
                .group(&dev.layout, r1, r2)
                .ok_or_else(|| SimError::Spec(format!("SiMRA pair ({r1}, {r2}) activates no group")))?;
            if g.len() as u32 != spec.n {
                return Err(SimError::Spec(format!("SiMRA pair ({r1}, {r2}) opens {} rows, not {}", g.len(), spec.n)));
            }
            Ok((r1, r2, g))
        }
        None => simra_pair(dev, spec.victim, spec.n, spec.single_sided, hidden),
    }
}

fn check_budget(budget: u64) -> Result<()> {
    if budget > u64::MAX / 2 {
        return Err(SimError::Spec("hammer budget too large".into()));
    }
    Ok(())
}

fn stream(spec: &PatternSpec, segments: Vec<Segment>, meta: StreamMeta) -> PatternStream {
    PatternStream { bank: spec.bank, start: spec.start, segments, meta }
}

/// Single-row RowHammer and RowPress patterns.
pub fn gen_rowhammer(spec: &PatternSpec, dev: &Device) -> Result<PatternStream> {
    spec.validate()?;
    check_budget(spec.budget)?;
    let rows = rh_aggressors(spec.kind, dev, spec.victim)?;
    let t_on = spec.t_aggon;
    let mut b = Builder::new(dev);
    for &r in &rows {
        b.open_close(r, t_on, dev.timing.t_rp)?;
    }
    let period = b.t;
    let meta = StreamMeta {
        hammers: spec.budget,
        hammer_unit: spec.kind.hammer_unit(),
        aggressors: rows.clone(),
        bus_rows: rows,
        period,
        ..Default::default()
    };
    Ok(stream(spec, vec![b.segment(spec.budget)], meta))
}

/// Repeated copy cycles between a source and destination row.
pub fn gen_comra(spec: &PatternSpec, dev: &Device) -> Result<PatternStream> {
    spec.validate()?;
    check_budget(spec.budget)?;
    let (src, dst) = comra_rows(spec, dev)?;
    let mut b = Builder::new(dev);
    b.comra_cycle(src, dst, spec)?;
    let meta = StreamMeta {
        hammers: spec.budget,
        hammer_unit: spec.kind.hammer_unit(),
        aggressors: vec![src, dst],
        bus_rows: vec![src, dst],
        period: b.t,
        ..Default::default()
    };
    Ok(stream(spec, vec![b.segment(spec.budget)], meta))
}

/// Repeated ACT-PRE-ACT multi-row activations.
pub fn gen_simra(spec: &PatternSpec, dev: &Device) -> Result<PatternStream> {
    spec.validate()?;
    check_budget(spec.budget)?;
    let (r1, r2, group) = resolve_simra(spec, dev, false)?;
    let mut b = Builder::new(dev);
    b.simra_op(r1, r2, spec)?;
    let meta = StreamMeta {
        hammers: spec.budget,
        hammer_unit: spec.kind.hammer_unit(),
        aggressors: group,
        bus_rows: vec![r1, r2],
        partial: spec.act_pre <= dev.dram.partial_gap,
        period: b.t,
        ..Default::default()
    };
    Ok(stream(spec, vec![b.segment(spec.budget)], meta))
}

/// First-flip counts of the multi-row kinds on the targeted victim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PriorHcFirst {
    pub comra: Option<u64>,
    pub simra: Option<u64>,
}

/// Multi-row prefix followed by `spec.budget` double-sided RowHammer pairs.
///
/// When both multi-row kinds are mixed each takes half the fraction so the
/// prefix as a whole stays at `fraction` of the victim's threshold.
pub fn gen_combined(spec: &PatternSpec, prior: &PriorHcFirst, dev: &Device) -> Result<PatternStream> {
    spec.validate()?;
    check_budget(spec.budget)?;
    let kinds = u32::from(spec.mix.comra) + u32::from(spec.mix.simra);
    let share = if kinds == 0 { 0.0 } else { spec.fraction / f64::from(kinds) };
    let mut segments = Vec::new();
    let mut aggressors = rh_aggressors(PatternKind::Combined, dev, spec.victim)?;
    let mut bus_rows = aggressors.clone();
    let mut prefix = 0;
    let mut partial = false;
    if spec.mix.comra {
        let hc = prior
            .comra
            .ok_or_else(|| SimError::Spec("combined pattern needs a prior CoMRA first-flip count".into()))?;
        let k = (share * hc as f64).floor() as u64;
        let cspec = PatternSpec { kind: PatternKind::Combined, gap: ns(7.5), ..spec.clone() };
        let (src, dst) = comra_rows(&cspec, dev)?;
        let mut b = Builder::new(dev);
        b.comra_cycle(src, dst, &cspec)?;
        segments.push(b.segment(k));
        prefix += k;
    }
    if spec.mix.simra {
        let hc = prior
            .simra
            .ok_or_else(|| SimError::Spec("combined pattern needs a prior SiMRA first-flip count".into()))?;
        let k = (share * hc as f64).floor() as u64;
        let sspec = PatternSpec { kind: PatternKind::Simra, gap: ns(3.0), ..spec.clone() };
        let (r1, r2, group) = resolve_simra(&sspec, dev, false)?;
        let mut b = Builder::new(dev);
        b.simra_op(r1, r2, &sspec)?;
        segments.push(b.segment(k));
        prefix += k;
        partial = sspec.act_pre <= dev.dram.partial_gap;
        aggressors.extend(group);
        bus_rows.extend([r1, r2]);
    }
    let mut b = Builder::new(dev);
    for &r in &aggressors[..2] {
        b.open_close(r, spec.t_aggon, dev.timing.t_rp)?;
    }
    let period = b.t;
    segments.push(b.segment(spec.budget));
    aggressors.sort_unstable();
    aggressors.dedup();
    bus_rows.sort_unstable();
    bus_rows.dedup();
    let meta = StreamMeta {
        hammers: spec.budget,
        hammer_unit: PatternKind::Combined.hammer_unit(),
        prefix_hammers: prefix,
        aggressors,
        bus_rows,
        partial,
        period,
    };
    Ok(stream(spec, segments, meta))
}

/// Sampler-bypass pattern: each refresh interval carries the maximum ACT
/// count, one interval for the aggressors and three for a dummy row, until
/// every aggressor received `spec.budget` hammers.
pub fn gen_nsided_bypass(spec: &PatternSpec, dev: &Device) -> Result<PatternStream> {
    spec.validate()?;
    check_budget(spec.budget)?;
    let t = &dev.timing;
    let per_window = t.acts_per_refi as usize;
    let rows = dev.geometry.rows;
    let v = spec.victim;
    let dummy = spec.dummy.unwrap_or((v + rows / 2) % rows);
    let slot = t.t_rc.max(t.t_ras + t.t_rp);
    let mut b = Builder::new(dev);
    let (aggressors, bus_rows, per_cycle) = if spec.bypass_simra {
        let (r1, r2, group) = resolve_simra(&PatternSpec { kind: PatternKind::Simra, ..spec.clone() }, dev, true)?;
        let ops = per_window / 2;
        // the bypass keeps nominal row-open time and the SiMRA gaps regardless of `spec.gap`
        let w = dev.dram.simra_window;
        let sspec = PatternSpec { t_aggon: t.t_ras, act_pre: w, gap: w, ..spec.clone() };
        for i in 0..ops {
            b.t = 2 * i as Ps * slot;
            b.simra_op(r1, r2, &sspec)?;
        }
        (group, vec![r1, r2], ops as u64)
    } else {
        let n = spec.n as usize;
        let rows: Vec<u32> = (0..spec.n).map(|i| in_bank(dev, i64::from(v) - 1 + 2 * i64::from(i))).collect::<Result<_>>()?;
        let each = per_window / n;
        if each == 0 {
            return Err(SimError::Spec(format!("{n} aggressors do not fit in {per_window} ACTs")));
        }
        for i in 0..each * n {
            b.t = i as Ps * slot;
            b.open_close(rows[i % n], t.t_ras, 0)?;
        }
        (rows.clone(), rows, each as u64)
    };
    if aggressors.contains(&dummy) {
        return Err(SimError::Spec(format!("dummy row {dummy} collides with an aggressor")));
    }
    b.t = t.t_refi - 1;
    b.refresh();
    for w in 1..4u64 {
        for i in 0..per_window {
            b.t = w * t.t_refi + i as Ps * slot;
            b.open_close(dummy, t.t_ras, 0)?;
        }
        b.t = (w + 1) * t.t_refi - 1;
        b.refresh();
    }
    b.t = 4 * t.t_refi;
    let cycles = spec.budget.div_ceil(per_cycle);
    let period = b.t;
    let s = stream(
        spec,
        vec![b.segment(cycles)],
        StreamMeta {
            hammers: cycles * per_cycle,
            hammer_unit: PatternKind::NSidedBypass.hammer_unit(),
            aggressors,
            bus_rows,
            period,
            ..Default::default()
        },
    );
    if s.max_acts_between_refs() > per_window {
        return Err(SimError::Spec(format!("more than {per_window} ACTs scheduled in one refresh interval")));
    }
    Ok(s)
}

/// Dispatches on `spec.kind`; combined patterns need `prior`.
pub fn generate(spec: &PatternSpec, prior: Option<&PriorHcFirst>, dev: &Device) -> Result<PatternStream> {
    match spec.kind {
        PatternKind::RhSingle | PatternKind::RhDouble | PatternKind::RhFarDouble | PatternKind::RowPress => {
            gen_rowhammer(spec, dev)
        }
        PatternKind::ComraSingle | PatternKind::ComraDouble => gen_comra(spec, dev),
        PatternKind::Simra => gen_simra(spec, dev),
        PatternKind::Combined => gen_combined(
            spec,
            prior.ok_or_else(|| SimError::Spec("combined pattern needs prior first-flip counts".into()))?,
            dev,
        ),
        PatternKind::NSidedBypass => gen_nsided_bypass(spec, dev),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dev() -> Device {
        Device::small(1024, 512, 8).unwrap()
    }

    fn acts(s: &CommandStream) -> usize {
        s.events.iter().filter(|e| e.kind == CommandKind::Act).count()
    }

    #[test]
    fn comra_double_three_cycles() {
        let d = dev();
        let s = gen_comra(&PatternSpec::new(PatternKind::ComraDouble, 100).with_budget(3), &d).unwrap().collect();
        assert_eq!(acts(&s), 6);
        assert_eq!(s.meta.hammers, 3);
        let e = &s.events;
        assert_eq!((e[0].addr.row, e[2].addr.row), (99, 101));
        assert_eq!(e[2].time - e[1].time, ns(7.5));
        let mut rev = PatternSpec::new(PatternKind::ComraDouble, 100).with_budget(3);
        rev.reverse = true;
        let r = gen_comra(&rev, &d).unwrap().collect();
        assert_eq!((r.events[0].addr.row, r.events[2].addr.row), (101, 99));
        assert_eq!(r.events.len(), s.events.len());
        assert!(gen_comra(&PatternSpec::new(PatternKind::ComraDouble, 100).with_budget(0), &d)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn comra_rejects_cross_subarray() {
        let d = dev();
        assert!(gen_comra(&PatternSpec::new(PatternKind::ComraDouble, 512), &d).is_err());
        let s = gen_comra(&PatternSpec::new(PatternKind::ComraSingle, 10), &d).unwrap();
        assert_eq!(s.meta.aggressors, vec![11, 111]);
        let s = gen_comra(&PatternSpec::new(PatternKind::ComraSingle, 500), &d).unwrap();
        assert_eq!(s.meta.aggressors, vec![499, 399]);
    }

    #[test]
    fn simra_groups_resolve() {
        let d = dev();
        for n in [2, 4, 8, 16] {
            let s = gen_simra(&PatternSpec::new(PatternKind::Simra, 97).with_n(n), &d).unwrap();
            let g = &s.meta.aggressors;
            assert_eq!(g.len(), n as usize);
            assert!(g.contains(&96) && g.contains(&98) && !g.contains(&97));
            assert_eq!(s.collect().events.iter().filter(|e| e.kind == CommandKind::Act).count(), 2);
        }
        assert!(gen_simra(&PatternSpec::new(PatternKind::Simra, 97).with_n(32), &d).is_err());
        // 99 and 101 differ in two address bits, so no pair of rows sandwiches 100
        assert!(gen_simra(&PatternSpec::new(PatternKind::Simra, 100).with_n(2), &d).is_err());
        let mut single = PatternSpec::new(PatternKind::Simra, 95).with_n(32);
        single.single_sided = true;
        let s = gen_simra(&single, &d).unwrap();
        assert_eq!(s.meta.aggressors, (96..128).collect::<Vec<_>>());
        single.n = 2;
        let s = gen_simra(&single, &d).unwrap();
        assert!(s.meta.aggressors.contains(&96) && !s.meta.aggressors.contains(&97));
    }

    #[test]
    fn partial_flag_follows_first_gap() {
        let d = dev();
        let mut spec = PatternSpec::new(PatternKind::Simra, 100).with_n(4);
        spec.act_pre = ns(1.5);
        assert!(gen_simra(&spec, &d).unwrap().meta.partial);
        spec.act_pre = ns(3.0);
        assert!(!gen_simra(&spec, &d).unwrap().meta.partial);
    }

    #[test]
    fn rowpress_at_tras_equals_rowhammer() {
        let d = dev();
        let rh = gen_rowhammer(&PatternSpec::new(PatternKind::RhDouble, 50).with_budget(10), &d).unwrap().collect();
        let rp = gen_rowhammer(&PatternSpec::new(PatternKind::RowPress, 50).with_budget(10), &d).unwrap().collect();
        assert_eq!(rh.events, rp.events);
    }

    #[test]
    fn combined_blocks() {
        let d = dev();
        let mut spec = PatternSpec::new(PatternKind::Combined, 97).with_budget(5).with_n(4);
        spec.fraction = 0.9;
        spec.mix.comra = true;
        let prior = PriorHcFirst { comra: Some(1000), simra: Some(40) };
        let s = gen_combined(&spec, &prior, &d).unwrap();
        assert_eq!(s.meta.prefix_hammers, 900);
        assert_eq!(s.len(), 900 * 4 + 5 * 4);
        spec.mix.simra = true;
        spec.fraction = 0.5;
        let s = gen_combined(&spec, &prior, &d).unwrap();
        assert_eq!(s.meta.prefix_hammers, 250 + 10);
        assert!(gen_combined(&spec, &PriorHcFirst::default(), &d).is_err());
        spec.fraction = 0.0;
        spec.mix = CombinedMix::default();
        let pure = gen_combined(&spec, &prior, &d).unwrap().collect();
        let rh = gen_rowhammer(&PatternSpec::new(PatternKind::RhDouble, 97).with_budget(5), &d).unwrap().collect();
        assert_eq!(pure.events, rh.events);
    }

    #[test]
    fn bypass_windows() {
        let d = dev();
        let spec = PatternSpec::new(PatternKind::NSidedBypass, 200).with_n(2).with_budget(78 * 3);
        let s = gen_nsided_bypass(&spec, &d).unwrap().collect();
        let mut run = 0;
        let mut per_row = std::collections::BTreeMap::new();
        for e in &s.events {
            match e.kind {
                CommandKind::Act => {
                    run += 1;
                    *per_row.entry(e.addr.row).or_insert(0) += 1;
                }
                CommandKind::Ref => {
                    assert_eq!(run, 156);
                    run = 0;
                }
                _ => {}
            }
        }
        assert_eq!(per_row[&199], 78 * 3);
        assert_eq!(per_row[&201], 78 * 3);
        assert_eq!(per_row[&((200 + 512) % 1024)], 468 * 3);
        assert!(s.events.windows(2).all(|w| w[0].time < w[1].time));
        let one = gen_nsided_bypass(&PatternSpec::new(PatternKind::NSidedBypass, 200).with_n(1).with_budget(156), &d)
            .unwrap()
            .collect();
        assert_eq!(one.events.iter().filter(|e| e.kind == CommandKind::Act && e.addr.row == 199).count(), 156);
    }

    #[test]
    fn simra_bypass_hides_bus_rows() {
        let d = dev();
        let mut spec = PatternSpec::new(PatternKind::NSidedBypass, 95).with_n(32).with_budget(78);
        spec.bypass_simra = true;
        spec.single_sided = true;
        let s = gen_nsided_bypass(&spec, &d).unwrap();
        let (r1, r2) = (s.meta.bus_rows[0], s.meta.bus_rows[1]);
        for r in [r1 - 1, r1 + 1, r2 - 1, r2 + 1] {
            assert!(s.meta.aggressors.contains(&r), "{r}");
        }
        let c = s.collect();
        assert_eq!(c.events.iter().filter(|e| e.kind == CommandKind::Act).count(), 156 + 468);
    }

    #[test]
    fn dispatch_and_names() {
        for k in PatternKind::ALL {
            assert_eq!(PatternKind::parse(k.as_str()).unwrap(), k);
        }
        assert!(generate(&PatternSpec::new(PatternKind::Combined, 100), None, &dev()).is_err());
    }
}
