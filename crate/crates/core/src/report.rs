//! Aggregates of experiment results, written as CSV tables.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Result, SimError};
use crate::harness::ExperimentRecord;
use crate::patterns::PatternKind;
use crate::recipes::{write_csv, TrrRecord};

/// Characterization results of one chip profile.
#[derive(Debug, Clone)]
pub struct ProfileResults {
    pub profile: String,
    pub vendor: String,
    pub records: Vec<ExperimentRecord>,
}

/// Which records to include.
#[derive(Debug, Clone, Default)]
pub struct ReportFilter {
    pub vendor: Option<String>,
    pub profile: Option<String>,
}

impl ReportFilter {
    fn keep(&self, p: &ProfileResults) -> bool {
        self.vendor.as_ref().is_none_or(|v| *v == p.vendor) && self.profile.as_ref().is_none_or(|n| *n == p.profile)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChangeRow {
    pub profile: String,
    pub vendor: String,
    pub row: u32,
    pub baseline: u64,
    pub test: u64,
    /// Relative reduction of the first-flip count, in percent.
    pub change_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimumRow {
    pub vendor: String,
    pub pattern: String,
    pub min_hcfirst: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrrSummaryRow {
    pub technique: String,
    pub trr: bool,
    pub tests: usize,
    pub mean_flips: f64,
}

pub const CHANGE_COLUMNS: [&str; 6] = ["profile", "vendor", "row", "baseline", "test", "change_pct"];
pub const MINIMA_COLUMNS: [&str; 3] = ["vendor", "pattern", "min_hcfirst"];
pub const TRR_SUMMARY_COLUMNS: [&str; 4] = ["technique", "trr", "tests", "mean_flips"];

/// Per-row first-flip change from `baseline` to `test` pattern, sorted from
/// the largest reduction to the largest increase, plus the lowest count per
/// vendor and pattern.
pub fn hcfirst_change(
    results: &[ProfileResults],
    baseline: PatternKind,
    test: PatternKind,
    filter: &ReportFilter,
) -> Result<(Vec<ChangeRow>, Vec<MinimumRow>)> {
    let kept: Vec<&ProfileResults> = results.iter().filter(|p| filter.keep(p)).collect();
    if kept.is_empty() {
        return Err(SimError::Config("report filter matches no results".into()));
    }
    let mut rows = Vec::new();
    let mut minima: BTreeMap<(String, String), u64> = BTreeMap::new();
    for p in &kept {
        let lowest = |kind: PatternKind| -> BTreeMap<u32, u64> {
            let mut m = BTreeMap::new();
            for r in p.records.iter().filter(|r| r.pattern == kind) {
                if let Some(h) = r.hcfirst {
                    let e = m.entry(r.row).or_insert(h);
                    *e = (*e).min(h);
                }
            }
            m
        };
        let (b, t) = (lowest(baseline), lowest(test));
        for (row, &hb) in &b {
            if let Some(&ht) = t.get(row) {
                rows.push(ChangeRow {
                    profile: p.profile.clone(),
                    vendor: p.vendor.clone(),
                    row: *row,
                    baseline: hb,
                    test: ht,
                    change_pct: 100.0 * (hb as f64 - ht as f64) / hb as f64,
                });
            }
        }
        for (kind, m) in [(baseline, &b), (test, &t)] {
            if let Some(&lo) = m.values().min() {
                let e = minima.entry((p.vendor.clone(), kind.as_str().to_string())).or_insert(lo);
                *e = (*e).min(lo);
            }
        }
    }
    if rows.is_empty() {
        return Err(SimError::Metric("no row flipped under both patterns".into()));
    }
    rows.sort_by(|a, b| b.change_pct.total_cmp(&a.change_pct).then(a.profile.cmp(&b.profile)).then(a.row.cmp(&b.row)));
    let minima = minima
        .into_iter()
        .map(|((vendor, pattern), min_hcfirst)| MinimumRow { vendor, pattern, min_hcfirst })
        .collect();
    Ok((rows, minima))
}

/// Mean bitflips per technique with and without TRR.
pub fn trr_summary(records: &[TrrRecord]) -> Result<Vec<TrrSummaryRow>> {
    if records.is_empty() {
        return Err(SimError::Config("no TRR results to summarize".into()));
    }
    let mut acc: Vec<(String, bool, usize, u64)> = Vec::new();
    for r in records {
        match acc.iter_mut().find(|a| a.0 == r.technique && a.1 == r.trr) {
            Some(a) => {
                a.2 += 1;
                a.3 += r.flips;
            }
            None => acc.push((r.technique.clone(), r.trr, 1, r.flips)),
        }
    }
    Ok(acc
        .into_iter()
        .map(|(technique, trr, tests, flips)| TrrSummaryRow { technique, trr, tests, mean_flips: flips as f64 / tests as f64 })
        .collect())
}

/// Writes the change distribution and minima CSVs into `dir`.
pub fn emit_change_report(dir: &Path, rows: &[ChangeRow], minima: &[MinimumRow]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let a = dir.join("hcfirst_change.csv");
    let b = dir.join("hcfirst_minima.csv");
    write_csv(std::fs::File::create(&a)?, &CHANGE_COLUMNS, rows)?;
    write_csv(std::fs::File::create(&b)?, &MINIMA_COLUMNS, minima)?;
    Ok(vec![a, b])
}

pub fn emit_trr_report(dir: &Path, rows: &[TrrSummaryRow]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let p = dir.join("trr_summary.csv");
    write_csv(std::fs::File::create(&p)?, &TRR_SUMMARY_COLUMNS, rows)?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dram::{ns, ActKind};
    use crate::harness::Region;

    fn rec(pattern: PatternKind, row: u32, h: Option<u64>) -> ExperimentRecord {
        ExperimentRecord {
            pattern,
            kind: ActKind::RowHammer,
            n: 2,
            dp_aggr: 0,
            dp_victim: 0xff,
            temp_c: 80.0,
            t_aggon: ns(36.0),
            gap: ns(7.5),
            region: Region::Middle,
            row,
            hcfirst: h,
            flips: 1,
            seed: 0,
        }
    }

    fn results() -> Vec<ProfileResults> {
        use PatternKind::*;
        vec![ProfileResults {
            profile: "a".into(),
            vendor: "V".into(),
            records: vec![
                rec(RhDouble, 1, Some(100)),
                rec(ComraDouble, 1, Some(50)),
                rec(RhDouble, 2, Some(100)),
                rec(ComraDouble, 2, Some(150)),
                rec(RhDouble, 3, Some(80)),
                rec(ComraDouble, 3, None),
            ],
        }]
    }

    #[test]
    fn change_sorted_most_positive_first() {
        let (rows, minima) =
            hcfirst_change(&results(), PatternKind::RhDouble, PatternKind::ComraDouble, &ReportFilter::default()).unwrap();
        assert_eq!(rows.iter().map(|r| r.change_pct).collect::<Vec<_>>(), vec![50.0, -50.0]);
        assert_eq!(minima.len(), 2);
        assert!(minima.iter().any(|m| m.pattern == "rh-double" && m.min_hcfirst == 80));
    }

    #[test]
    fn empty_filter_is_an_error() {
        let f = ReportFilter { vendor: Some("W".into()), profile: None };
        assert!(hcfirst_change(&results(), PatternKind::RhDouble, PatternKind::ComraDouble, &f).is_err());
        assert!(trr_summary(&[]).is_err());
    }

    #[test]
    fn trr_means() {
        let r = |t: &str, on: bool, f: u64| TrrRecord { technique: t.into(), trr: on, seed: 0, victim: 1, flips: f };
        let s = trr_summary(&[r("x", false, 10), r("x", false, 20), r("x", true, 0)]).unwrap();
        assert_eq!(s[0].mean_flips, 15.0);
        assert_eq!((s[1].tests, s[1].mean_flips), (1, 0.0));
    }
}
