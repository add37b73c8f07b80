use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;

use crate::dram::{ns, ActKind, Ps, TimingParams};
use crate::error::{Result, SimError};
use crate::mitigation::{PracConfig, PracState};
use crate::rng::{SeedTree, SimRng};

use super::sched::{schedule, QueuedRow};

/// Memory system and workload sizing.
#[derive(Debug, Clone, PartialEq)]
pub struct PerfConfig {
    pub ranks: u32,
    pub banks_per_rank: u32,
    pub rows: u32,
    /// Cache lines per row, for streaming cores.
    pub lines_per_row: u32,
    pub timing: TimingParams,
    pub t_rcd: Ps,
    pub t_cl: Ps,
    pub t_burst: Ps,
    pub t_turnaround: Ps,
    /// Consecutive row hits served before an older miss.
    pub cap: u32,
    /// Instructions each core retires before its finish time is taken.
    pub instructions: u64,
    pub instr_per_request: u64,
    pub instr_per_pud_op: u64,
    /// Banks the PuD core rotates over.
    pub pud_banks: u32,
    pub simra_window: Ps,
    pub comra_gap: Ps,
    /// Longest stretch of simulated time with no completed request.
    pub watchdog: Ps,
}

impl Default for PerfConfig {
    fn default() -> Self {
        Self {
            ranks: 2,
            banks_per_rank: 8,
            rows: 1024,
            lines_per_row: 32,
            timing: TimingParams::default(),
            t_rcd: ns(14.0),
            t_cl: ns(14.0),
            t_burst: ns(4.0),
            t_turnaround: ns(2.0),
            cap: 4,
            instructions: 100_000,
            instr_per_request: 50,
            instr_per_pud_op: 5_000,
            pud_banks: 2,
            simra_window: ns(3.0),
            comra_gap: ns(7.5),
            watchdog: ns(5_000_000.0),
        }
    }
}

impl PerfConfig {
    pub fn banks(&self) -> u32 {
        self.ranks * self.banks_per_rank
    }

    pub fn validate(&self) -> Result<()> {
        if self.banks() == 0 || self.rows < 64 || self.lines_per_row == 0 {
            return Err(SimError::Config("perf model needs banks, at least 64 rows and lines per row".into()));
        }
        if self.cap == 0 || self.instructions == 0 || self.instr_per_request == 0 || self.instr_per_pud_op == 0 {
            return Err(SimError::Config("cap and instruction counts must be positive".into()));
        }
        if self.pud_banks == 0 || self.pud_banks > self.banks() {
            return Err(SimError::Config(format!("pud_banks must be in 1..={}", self.banks())));
        }
        self.timing.validate()
    }
}

/// Access pattern of one core.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Workload {
    /// Walks every line of a row before moving to the next bank.
    Stream,
    /// Uniform over all banks and rows.
    Random,
    /// Stays on the previous row with probability `locality`, else jumps
    /// within a small hot set.
    RowLocal { locality: f64, hot_rows: u32 },
}

impl Workload {
    pub fn as_str(&self) -> &'static str {
        match self {
            Workload::Stream => "stream",
            Workload::Random => "random",
            Workload::RowLocal { .. } => "row-local",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoreSpec {
    pub workload: Workload,
    /// Compute time between two requests.
    pub gap: Ps,
    /// Outstanding requests allowed.
    pub mlp: u32,
}

/// Conventional cores sharing the channel with one PuD core.
#[derive(Debug, Clone, PartialEq)]
pub struct Mix {
    pub id: u32,
    pub cores: Vec<CoreSpec>,
}

impl Mix {
    /// `count` mixes of four conventional cores with drawn workloads.
    pub fn generate(count: u32, seed: u64) -> Vec<Mix> {
        let tree = SeedTree::new(seed);
        (0..count)
            .map(|id| {
                let mut rng = tree.child("mix", u64::from(id)).stream("cores");
                let cores = (0..4)
                    .map(|_| {
                        let workload = match rng.gen_range(0..3) {
                            0 => Workload::Stream,
                            1 => Workload::Random,
                            _ => Workload::RowLocal { locality: rng.gen_range(0.6..0.95), hot_rows: rng.gen_range(4..32) },
                        };
                        CoreSpec { workload, gap: ns(rng.gen_range(5.0..40.0)), mlp: rng.gen_range(1..=4) }
                    })
                    .collect();
                Mix { id, cores }
            })
            .collect()
    }
}

/// Outcome of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    /// Instructions per nanosecond, per core; the PuD core comes last.
    pub rates: Vec<f64>,
    pub backoffs: u64,
    pub rfms: u64,
    pub end: Ps,
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Line,
    Pud { group: u32 },
}

#[derive(Debug, Clone, Copy)]
struct Req {
    core: usize,
    row: u32,
    op: Op,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Ev {
    Issue(usize),
    Done(usize, usize),
}

struct Bank {
    queue: Vec<Req>,
    open: Option<u32>,
    last_act: Ps,
    busy: bool,
    streak: u32,
    prac: Option<PracState>,
}

enum Gen {
    Stream { bank: u32, row: u32, line: u32 },
    Random,
    RowLocal { locality: f64, hot: Vec<(u32, u32)>, cur: (u32, u32) },
    Pud { period: Ps, next_op: u32, last_issue: Option<Ps> },
}

struct Core {
    gen: Gen,
    rng: SimRng,
    gap: Ps,
    mlp: u32,
    outstanding: u32,
    stalled: bool,
    retired: u64,
    finish: Option<Ps>,
}

struct Sim<'a> {
    cfg: &'a PerfConfig,
    now: Ps,
    seq: u64,
    events: BinaryHeap<Reverse<(Ps, u64, Ev)>>,
    banks: Vec<Bank>,
    cores: Vec<Core>,
    bus_free: Ps,
    last_rank: u32,
}

impl Core {
    fn next_req(&mut self, cfg: &PerfConfig, core: usize) -> (usize, Req) {
        let banks = cfg.banks();
        let line = |bank: u32, row: u32| (bank as usize, Req { core, row, op: Op::Line });
        match &mut self.gen {
            Gen::Stream { bank, row, line: l } => {
                let out = line(*bank, *row);
                *l += 1;
                if *l == cfg.lines_per_row {
                    *l = 0;
                    *bank = (*bank + 1) % banks;
                    if *bank == 0 {
                        *row = (*row + 1) % cfg.rows;
                    }
                }
                out
            }
            Gen::Random => {
                let (b, r) = (self.rng.gen_range(0..banks), self.rng.gen_range(0..cfg.rows));
                line(b, r)
            }
            Gen::RowLocal { locality, hot, cur } => {
                if !self.rng.gen_bool(*locality) {
                    *cur = hot[self.rng.gen_range(0..hot.len())];
                }
                line(cur.0, cur.1)
            }
            Gen::Pud { next_op, last_issue, .. } => {
                let k = *next_op;
                *next_op += 1;
                *last_issue = None;
                // one 32-row group per PuD bank, at the bottom of the bank
                let bank = (k % cfg.pud_banks) * banks / cfg.pud_banks;
                (bank as usize, Req { core, row: 0, op: Op::Pud { group: 0 } })
            }
        }
    }
}

impl<'a> Sim<'a> {
    fn push(&mut self, t: Ps, ev: Ev) {
        self.seq += 1;
        self.events.push(Reverse((t, self.seq, ev)));
    }

    fn issue(&mut self, c: usize) -> Result<()> {
        let (b, req) = self.cores[c].next_req(self.cfg, c);
        let now = self.now;
        let core = &mut self.cores[c];
        core.outstanding += 1;
        match &mut core.gen {
            Gen::Pud { last_issue, .. } => *last_issue = Some(now),
            _ => {
                if core.outstanding < core.mlp {
                    let t = now + core.gap;
                    self.push(t, Ev::Issue(c));
                } else {
                    core.stalled = true;
                }
            }
        }
        self.banks[b].queue.push(req);
        self.try_schedule(b)
    }

    fn done(&mut self, b: usize, c: usize) -> Result<()> {
        self.banks[b].busy = false;
        let now = self.now;
        let (target, per) = match self.cores[c].gen {
            Gen::Pud { .. } => (self.cfg.instructions, self.cfg.instr_per_pud_op),
            _ => (self.cfg.instructions, self.cfg.instr_per_request),
        };
        let core = &mut self.cores[c];
        core.outstanding -= 1;
        core.retired += per;
        if core.finish.is_none() && core.retired >= target {
            core.finish = Some(now);
        }
        let next = match &core.gen {
            Gen::Pud { period, last_issue, .. } => Some(now.max(last_issue.unwrap_or(now) + period)),
            _ if core.stalled => {
                core.stalled = false;
                Some(now + core.gap)
            }
            _ => None,
        };
        if let Some(t) = next {
            self.push(t, Ev::Issue(c));
        }
        self.try_schedule(b)
    }

    /// Issues RFMs while the bank's back-off is pending.
    fn service_backoff(bank: &mut Bank, mut t: Ps) -> Ps {
        if let Some(p) = bank.prac.as_mut() {
            while p.backoff_pending() {
                let refreshed = p.rfm();
                t += p.config().rfm_latency(refreshed.len());
            }
        }
        t
    }

    fn count(bank: &mut Bank, rows: &[u32], kind: ActKind, t_rc: Ps) -> Result<Ps> {
        match bank.prac.as_mut() {
            // a single counter update hides in the normal row cycle
            Some(p) => Ok(p.update(rows, kind)?.saturating_sub(t_rc)),
            None => Ok(0),
        }
    }

    fn try_schedule(&mut self, b: usize) -> Result<()> {
        let cfg = self.cfg;
        let tm = &cfg.timing;
        let bank = &mut self.banks[b];
        if bank.busy {
            return Ok(());
        }
        let rows: Vec<QueuedRow> = bank
            .queue
            .iter()
            .map(|r| QueuedRow { row: matches!(r.op, Op::Line).then_some(r.row) })
            .collect();
        let Some(i) = schedule(&rows, bank.open, bank.streak, cfg.cap) else {
            return Ok(());
        };
        let req = bank.queue.remove(i);
        let mut t = self.now;
        let precharge = |bank: &mut Bank, t: Ps| -> Ps {
            if bank.open.take().is_some() {
                t.max(bank.last_act + tm.t_ras) + tm.t_rp
            } else {
                t
            }
        };
        let done = match req.op {
            Op::Line => {
                let ready = if bank.open == Some(req.row) {
                    bank.streak += 1;
                    t + cfg.t_cl
                } else {
                    t = precharge(bank, t);
                    t = Self::service_backoff(bank, t);
                    let extra = Self::count(bank, &[req.row], ActKind::RowHammer, tm.t_rc)?;
                    bank.last_act = t;
                    bank.open = Some(req.row);
                    bank.streak = 0;
                    t + extra + cfg.t_rcd + cfg.t_cl
                };
                let rank = b as u32 / cfg.banks_per_rank;
                let turn = if rank != self.last_rank { cfg.t_turnaround } else { 0 };
                let start = ready.max(self.bus_free + turn);
                self.bus_free = start + cfg.t_burst;
                self.last_rank = rank;
                self.bus_free
            }
            Op::Pud { group } => {
                t = precharge(bank, t);
                t = Self::service_backoff(bank, t);
                let members: Vec<u32> = (group..group + 32).collect();
                let extra = Self::count(bank, &members, ActKind::Simra, tm.t_rc)?;
                t += 2 * cfg.simra_window + tm.t_ras + tm.t_rp + extra;
                let (src, dst) = (group + 32, group + 33);
                let mut extra = Self::count(bank, &[src], ActKind::Comra, tm.t_rc)?;
                extra += Self::count(bank, &[dst], ActKind::Comra, tm.t_rc)?;
                t += 2 * tm.t_ras + cfg.comra_gap + tm.t_rp + extra;
                bank.last_act = t;
                bank.streak = 0;
                t
            }
        };
        bank.busy = true;
        self.push(done, Ev::Done(b, req.core));
        Ok(())
    }
}

/// Runs the given cores to completion and reports per-core progress rates.
///
/// `pud_period` adds a PuD core issuing one SiMRA-32 and one CoMRA
/// operation per period. `prac` enables PRAC on every bank.
pub fn run(
    cfg: &PerfConfig,
    cores: &[(usize, CoreSpec)],
    pud_period: Option<Ps>,
    prac: Option<&PracConfig>,
    seed: u64,
) -> Result<RunStats> {
    cfg.validate()?;
    let tree = SeedTree::new(seed);
    let banks = (0..cfg.banks())
        .map(|_| {
            Ok(Bank {
                queue: Vec::new(),
                open: None,
                last_act: 0,
                busy: false,
                streak: 0,
                prac: prac.map(|p| PracState::new(p.clone(), cfg.rows)).transpose()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut all: Vec<Core> = Vec::new();
    for &(slot, spec) in cores {
        if spec.mlp == 0 {
            return Err(SimError::Config("core mlp must be at least 1".into()));
        }
        let mut rng = tree.child("core", slot as u64).stream("addresses");
        let gen = match spec.workload {
            Workload::Stream => Gen::Stream { bank: rng.gen_range(0..cfg.banks()), row: rng.gen_range(0..cfg.rows), line: 0 },
            Workload::Random => Gen::Random,
            Workload::RowLocal { locality, hot_rows } => {
                if !(0.0..=1.0).contains(&locality) || hot_rows == 0 {
                    return Err(SimError::Config("row-local needs locality in [0, 1] and a hot row".into()));
                }
                let hot: Vec<(u32, u32)> =
                    (0..hot_rows).map(|_| (rng.gen_range(0..cfg.banks()), rng.gen_range(0..cfg.rows))).collect();
                Gen::RowLocal { locality, cur: hot[0], hot }
            }
        };
        all.push(Core { gen, rng, gap: spec.gap, mlp: spec.mlp, outstanding: 0, stalled: false, retired: 0, finish: None });
    }
    if let Some(period) = pud_period {
        if period == 0 {
            return Err(SimError::Config("PuD period must be positive".into()));
        }
        let rng = tree.child("core", cores.len() as u64).stream("addresses");
        all.push(Core {
            gen: Gen::Pud { period, next_op: 0, last_issue: None },
            rng,
            gap: 0,
            mlp: 1,
            outstanding: 0,
            stalled: false,
            retired: 0,
            finish: None,
        });
    }
    if all.is_empty() {
        return Err(SimError::Config("a run needs at least one core".into()));
    }
    let mut sim = Sim {
        cfg,
        now: 0,
        seq: 0,
        events: BinaryHeap::new(),
        banks,
        cores: all,
        bus_free: 0,
        last_rank: 0,
    };
    for c in 0..sim.cores.len() {
        sim.push(0, Ev::Issue(c));
    }
    let mut last_progress = 0;
    while sim.cores.iter().any(|c| c.finish.is_none()) {
        let Some(Reverse((t, _, ev))) = sim.events.pop() else {
            return Err(SimError::Diagnostic("perf model ran out of events".into()));
        };
        sim.now = t;
        match ev {
            Ev::Issue(c) => sim.issue(c)?,
            Ev::Done(b, c) => {
                last_progress = t;
                sim.done(b, c)?;
            }
        }
        if sim.now - last_progress > cfg.watchdog {
            return Err(SimError::Diagnostic(format!(
                "no request completed for {} ns at {} ns",
                cfg.watchdog / 1000,
                sim.now / 1000
            )));
        }
    }
    let rates = sim.cores.iter().map(|c| cfg.instructions as f64 / (c.finish.unwrap_or(1).max(1) as f64 / 1000.0)).collect();
    let (mut backoffs, mut rfms) = (0, 0);
    for b in &sim.banks {
        if let Some(p) = &b.prac {
            backoffs += p.backoffs;
            rfms += p.rfms;
        }
    }
    Ok(RunStats { rates, backoffs, rfms, end: sim.now })
}
