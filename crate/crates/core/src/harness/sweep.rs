use std::io::{Read, Write};

use rayon::prelude::*;

use super::bisection::{find_hcfirst, BisectionConfig};
use super::region::{classify_region, Region};
use crate::chip::ChipSetup;
use crate::dram::{fmt_ns, parse_ns, ActKind, Ps};
use crate::error::{Result, SimError};
use crate::patterns::{PatternKind, PatternSpec, PriorHcFirst};
use crate::rng::SeedTree;

pub const RESULT_COLUMNS: [&str; 13] = [
    "pattern", "kind", "N", "dp_aggr", "dp_victim", "temp_c", "t_aggon_ns", "gap_ns", "region", "row", "hcfirst",
    "flips", "seed",
];

/// Activation kind a pattern's hammers are counted in.
pub fn pattern_act_kind(kind: PatternKind) -> ActKind {
    match kind {
        PatternKind::ComraSingle | PatternKind::ComraDouble => ActKind::Comra,
        PatternKind::Simra => ActKind::Simra,
        _ => ActKind::RowHammer,
    }
}

/// Full-factorial sweep coordinates. Victim data is the negated aggressor byte.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepGrid {
    pub data_patterns: Vec<u8>,
    pub temps: Vec<f64>,
    pub t_aggon: Vec<Ps>,
    pub gaps: Vec<Ps>,
    pub ns: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub dp: u8,
    pub temp_c: f64,
    pub t_aggon: Ps,
    pub gap: Ps,
    pub n: u32,
}

impl SweepGrid {
    /// One cell holding the coordinates of `base`.
    pub fn single(base: &PatternSpec, temp_c: f64) -> Self {
        Self {
            data_patterns: vec![base.dp_aggr],
            temps: vec![temp_c],
            t_aggon: vec![base.t_aggon],
            gaps: vec![base.gap],
            ns: vec![base.n],
        }
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &n in &self.ns {
            for &temp_c in &self.temps {
                for &t_aggon in &self.t_aggon {
                    for &gap in &self.gaps {
                        for &dp in &self.data_patterns {
                            out.push(Cell { dp, temp_c, t_aggon, gap, n });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub pattern: PatternKind,
    pub kind: ActKind,
    pub n: u32,
    pub dp_aggr: u8,
    pub dp_victim: u8,
    pub temp_c: f64,
    pub t_aggon: Ps,
    pub gap: Ps,
    pub region: Region,
    pub row: u32,
    pub hcfirst: Option<u64>,
    pub flips: usize,
    pub seed: u64,
}

impl ExperimentRecord {
    fn fields(&self) -> [String; 13] {
        [
            self.pattern.as_str().to_string(),
            self.kind.as_str().to_string(),
            self.n.to_string(),
            format!("{:02x}", self.dp_aggr),
            format!("{:02x}", self.dp_victim),
            format!("{}", self.temp_c),
            fmt_ns(self.t_aggon),
            fmt_ns(self.gap),
            self.region.as_str().to_string(),
            self.row.to_string(),
            self.hcfirst.map_or_else(|| "no-flip".to_string(), |h| h.to_string()),
            self.flips.to_string(),
            self.seed.to_string(),
        ]
    }

    fn from_fields(f: &csv::StringRecord) -> Result<Self> {
        let get = |i: usize| f.get(i).ok_or_else(|| SimError::Config(format!("results row missing column {i}")));
        let num = |i: usize| -> Result<u64> {
            get(i)?.parse().map_err(|_| SimError::Config(format!("bad number in column {}", RESULT_COLUMNS[i])))
        };
        let byte = |i: usize| -> Result<u8> {
            u8::from_str_radix(get(i)?, 16).map_err(|_| SimError::Config(format!("bad byte in {}", RESULT_COLUMNS[i])))
        };
        Ok(Self {
            pattern: PatternKind::parse(get(0)?)?,
            kind: ActKind::parse(get(1)?)?,
            n: num(2)? as u32,
            dp_aggr: byte(3)?,
            dp_victim: byte(4)?,
            temp_c: get(5)?.parse().map_err(|_| SimError::Config("bad temp_c".into()))?,
            t_aggon: parse_ns(get(6)?)?,
            gap: parse_ns(get(7)?)?,
            region: Region::parse(get(8)?)?,
            row: num(9)? as u32,
            hcfirst: match get(10)? {
                "no-flip" => None,
                _ => Some(num(10)?),
            },
            flips: num(11)? as usize,
            seed: num(12)?,
        })
    }
}

/// A sweep cell that could not be measured.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub cell: Cell,
    pub row: u32,
    pub error: String,
}

/// Summary over rows that flipped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub count: usize,
    pub min: u64,
    pub mean: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub max: u64,
}

fn quantile(sorted: &[u64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    let next = sorted[(i + 1).min(sorted.len() - 1)] as f64;
    sorted[i] as f64 * (1.0 - frac) + next * frac
}

pub fn summarize(values: impl IntoIterator<Item = u64>) -> Option<Stats> {
    let mut v: Vec<u64> = values.into_iter().collect();
    if v.is_empty() {
        return None;
    }
    v.sort_unstable();
    Some(Stats {
        count: v.len(),
        min: v[0],
        mean: v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64,
        p25: quantile(&v, 0.25),
        median: quantile(&v, 0.5),
        p75: quantile(&v, 0.75),
        max: v[v.len() - 1],
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentResult {
    pub records: Vec<ExperimentRecord>,
    pub failures: Vec<CellFailure>,
}

impl ExperimentResult {
    /// Statistics of the first-flip counts of matching records; no-flip rows are left out.
    pub fn stats(&self, filter: impl Fn(&ExperimentRecord) -> bool) -> Option<Stats> {
        summarize(self.records.iter().filter(|r| filter(r)).filter_map(|r| r.hcfirst))
    }

    /// Per row and coordinates, the record of the data pattern with the lowest
    /// first-flip count.
    pub fn wcdp(&self) -> Vec<ExperimentRecord> {
        let mut out: Vec<ExperimentRecord> = Vec::new();
        for r in &self.records {
            let same = |o: &ExperimentRecord| {
                o.pattern == r.pattern
                    && o.n == r.n
                    && o.temp_c == r.temp_c
                    && o.t_aggon == r.t_aggon
                    && o.gap == r.gap
                    && o.row == r.row
            };
            match out.iter_mut().find(|o| same(o)) {
                Some(o) => {
                    let better = match (r.hcfirst, o.hcfirst) {
                        (Some(a), Some(b)) => a < b,
                        (Some(_), None) => true,
                        _ => false,
                    };
                    if better {
                        *o = r.clone();
                    }
                }
                None => out.push(r.clone()),
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_records(&self.records, w)
    }
}

pub fn write_records<W: Write>(records: &[ExperimentRecord], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(RESULT_COLUMNS)?;
    for r in records {
        wr.write_record(r.fields())?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(r: R) -> Result<Vec<ExperimentRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers()?.clone();
    if header.iter().ne(RESULT_COLUMNS) {
        return Err(SimError::Config(format!("unexpected results header: {:?}", header)));
    }
    rd.records().map(|rec| ExperimentRecord::from_fields(&rec?)).collect()
}

/// Victim row's first-flip counts for the multi-row kinds mixed into `spec`.
pub fn combined_priors(setup: &ChipSetup, spec: &PatternSpec, cfg: &BisectionConfig, seed: u64) -> Result<PriorHcFirst> {
    let mut prior = PriorHcFirst::default();
    if spec.mix.comra {
        let s = PatternSpec { kind: PatternKind::ComraDouble, gap: crate::dram::ns(7.5), ..spec.clone() };
        prior.comra = find_hcfirst(setup, &s, None, cfg, seed)?.hammers;
    }
    if spec.mix.simra {
        let s = PatternSpec { kind: PatternKind::Simra, gap: crate::dram::ns(3.0), ..spec.clone() };
        prior.simra = find_hcfirst(setup, &s, None, cfg, seed)?.hammers;
    }
    Ok(prior)
}

/// Runs the first-flip search for every cell and victim.
///
/// Cells run in parallel; each owns its chip and a seed derived from its
/// position, so the table does not depend on scheduling.
pub fn run_sweep(
    setup: &ChipSetup,
    base: &PatternSpec,
    grid: &SweepGrid,
    victims: &[u32],
    cfg: &BisectionConfig,
    seed: u64,
) -> Result<ExperimentResult> {
    cfg.validate()?;
    let cells = grid.cells();
    let tree = SeedTree::new(seed);
    let jobs: Vec<(usize, Cell, u32)> = cells
        .iter()
        .enumerate()
        .flat_map(|(i, c)| victims.iter().map(move |&v| (i, *c, v)))
        .collect();
    let outcomes: Vec<std::result::Result<ExperimentRecord, CellFailure>> = jobs
        .par_iter()
        .enumerate()
        .map(|(j, &(_, cell, row))| {
            let cell_seed = tree.child("cell", j as u64).root();
            let mut s = setup.clone();
            s.cond.temp_c = cell.temp_c;
            let spec = PatternSpec {
                victim: row,
                dp_aggr: cell.dp,
                dp_victim: !cell.dp,
                t_aggon: cell.t_aggon,
                gap: cell.gap,
                n: cell.n,
                ..base.clone()
            };
            let fail = |e: SimError| CellFailure { cell, row, error: e.to_string() };
            let extent = s.dev.layout.extent_of(row).ok_or_else(|| fail(SimError::Address(format!("row {row}"))))?;
            let prior = if base.kind == PatternKind::Combined {
                Some(combined_priors(&s, &spec, cfg, cell_seed).map_err(fail)?)
            } else {
                None
            };
            let hc = find_hcfirst(&s, &spec, prior.as_ref(), cfg, cell_seed).map_err(fail)?;
            Ok(ExperimentRecord {
                pattern: base.kind,
                kind: pattern_act_kind(base.kind),
                n: cell.n,
                dp_aggr: cell.dp,
                dp_victim: !cell.dp,
                temp_c: cell.temp_c,
                t_aggon: cell.t_aggon,
                gap: cell.gap,
                region: classify_region(row, extent),
                row,
                hcfirst: hc.hammers,
                flips: hc.flips,
                seed: cell_seed,
            })
        })
        .collect();
    let mut out = ExperimentResult::default();
    for o in outcomes {
        match o {
            Ok(r) => out.records.push(r),
            Err(f) => {
                log::warn!("sweep cell at row {} failed: {}", f.row, f.error);
                out.failures.push(f);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disturbance::{ChipProfile, ThresholdMap};
    use crate::dram::{ns, Device};

    fn setup() -> ChipSetup {
        let dev = Device::small(256, 128, 8).unwrap();
        ChipSetup::new(dev, ChipProfile::constant(400.0), ThresholdMap::constant(256, 400.0)).unwrap()
    }

    #[test]
    fn data_pattern_sweep_fills_wcdp() {
        let s = setup();
        let base = PatternSpec::new(PatternKind::RhDouble, 0);
        let grid = SweepGrid { data_patterns: vec![0x00, 0xff, 0xaa, 0x55], ..SweepGrid::single(&base, 80.0) };
        let res = run_sweep(&s, &base, &grid, &[20, 70], &BisectionConfig::default(), 4).unwrap();
        assert_eq!(res.records.len(), 8);
        let w = res.wcdp();
        assert_eq!(w.len(), 2);
        // checkerboard is the worst case for RowHammer in the default tables
        assert!(w.iter().all(|r| r.dp_aggr == 0xaa || r.dp_aggr == 0x55));
        let mut buf = Vec::new();
        res.write_csv(&mut buf).unwrap();
        assert_eq!(read_records(buf.as_slice()).unwrap(), res.records);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("pattern,kind,N,dp_aggr,dp_victim,temp_c,t_aggon_ns,gap_ns,region,row,hcfirst,flips,seed\n"));
    }

    #[test]
    fn empty_grid_empty_table() {
        let s = setup();
        let base = PatternSpec::new(PatternKind::RhDouble, 0);
        let grid = SweepGrid { temps: vec![], ..SweepGrid::single(&base, 80.0) };
        let res = run_sweep(&s, &base, &grid, &[20], &BisectionConfig::default(), 4).unwrap();
        assert!(res.records.is_empty() && res.failures.is_empty());
    }

    #[test]
    fn failures_do_not_stop_the_sweep() {
        let s = setup();
        let base = PatternSpec::new(PatternKind::Simra, 0).with_n(2);
        let grid = SweepGrid { gaps: vec![ns(3.0)], ..SweepGrid::single(&base, 80.0) };
        let res = run_sweep(&s, &base, &grid, &[97, 100], &BisectionConfig::default(), 1).unwrap();
        assert_eq!(res.records.len(), 1);
        assert_eq!(res.failures.len(), 1);
        assert_eq!(res.failures[0].row, 100);
    }

    #[test]
    fn summary_statistics() {
        let s = summarize([4, 1, 3, 2]).unwrap();
        assert_eq!((s.min, s.max, s.count), (1, 4, 4));
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.median, 2.5);
        assert!(summarize(Vec::new()).is_none());
    }
}
