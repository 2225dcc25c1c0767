//! Offline evaluation: build test cases, rank each candidate pool, and
//! aggregate recall, NDCG, AUC and median percentile with activity and
//! pool-size filters.

mod cases;
mod metrics;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::models::Scorer;

pub use cases::{build_cases, build_test_cases, TestCase};
pub use metrics::{
    auc_single_positive, ndcg_at_k, percentile_of_positive, rank_candidates, recall_at_k, RankedCase,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub k: usize,
    /// Minimum author train photos for a case to count in recall / NDCG.
    pub min_activity: u32,
    /// Minimum pool size for a case to count in recall / NDCG.
    pub min_candidates: usize,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            k: 10,
            min_activity: 10,
            min_candidates: 10,
            exec: Exec::default(),
        }
    }
}

/// Aggregate metrics. Absent values mean no case survived the filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub k: usize,
    pub min_activity: u32,
    pub min_candidates: usize,
    pub total_cases: usize,
    pub recall_at_k: Option<f64>,
    pub ndcg_at_k: Option<f64>,
    /// Cases passing both the activity and pool-size filters.
    pub filtered_cases: usize,
    pub mauc: Option<f64>,
    pub auc_cases: usize,
    /// Single-candidate cases, for which AUC is undefined.
    pub auc_excluded: usize,
    pub med_perc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub ranked: Vec<RankedCase>,
    pub report: MetricReport,
}

/// Score and rank one case.
pub fn rank_case(scorer: &dyn Scorer, case_id: u64, case: &TestCase) -> Result<RankedCase> {
    let scores = scorer.score(case_id, case.user, &case.candidates);
    rank_candidates(scores, 0)
}

/// Rank every case (in parallel when enabled) and aggregate.
pub fn evaluate(cases: &[TestCase], scorer: &dyn Scorer, cfg: &EvalConfig) -> Result<Evaluation> {
    let ranked = cfg
        .exec
        .map(cases, |i, case| rank_case(scorer, i as u64, case))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let report = aggregate(cases, &ranked, cfg)?;
    Ok(Evaluation { ranked, report })
}

/// Mean AUC over all cases with at least two candidates.
pub fn mean_auc(cases: &[TestCase], scorer: &dyn Scorer, exec: Exec) -> Result<Option<f64>> {
    let cfg = EvalConfig { exec, ..EvalConfig::default() };
    Ok(evaluate(cases, scorer, &cfg)?.report.mauc)
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Lower median; `None` for an empty sample.
fn lower_median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    Some(xs[(xs.len() - 1) / 2])
}

pub fn aggregate(cases: &[TestCase], ranked: &[RankedCase], cfg: &EvalConfig) -> Result<MetricReport> {
    if cases.is_empty() {
        return Err(Error::InvalidSplit("no evaluation cases".into()));
    }
    assert_eq!(cases.len(), ranked.len());
    let filtered: Vec<&RankedCase> = cases
        .iter()
        .zip(ranked)
        .filter(|(c, r)| r.n_candidates >= cfg.min_candidates && c.author_train_count >= cfg.min_activity)
        .map(|(_, r)| r)
        .collect();
    let aucs: Vec<f64> = ranked.iter().filter_map(auc_single_positive).collect();
    Ok(MetricReport {
        k: cfg.k,
        min_activity: cfg.min_activity,
        min_candidates: cfg.min_candidates,
        total_cases: cases.len(),
        recall_at_k: mean(filtered.iter().map(|r| recall_at_k(r, cfg.k))),
        ndcg_at_k: mean(filtered.iter().map(|r| ndcg_at_k(r, cfg.k))),
        filtered_cases: filtered.len(),
        mauc: mean(aucs.iter().copied()),
        auc_excluded: ranked.len() - aucs.len(),
        auc_cases: aucs.len(),
        med_perc: lower_median(ranked.iter().map(percentile_of_positive).collect()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: u32,
    pub med_perc: Option<f64>,
    pub cases: usize,
}

/// Median percentile over cases whose author has at least `t` train photos,
/// for each `t` in `thresholds` (non-decreasing).
pub fn activity_sweep(cases: &[TestCase], ranked: &[RankedCase], thresholds: &[u32]) -> Result<Vec<SweepRow>> {
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidConfig("sweep thresholds must be non-decreasing".into()));
    }
    Ok(thresholds
        .iter()
        .map(|&t| {
            let percs: Vec<f64> = cases
                .iter()
                .zip(ranked)
                .filter(|(c, _)| c.author_train_count >= t)
                .map(|(_, r)| percentile_of_positive(r))
                .collect();
            SweepRow {
                threshold: t,
                cases: percs.len(),
                med_perc: lower_median(percs),
            }
        })
        .collect())
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "null".to_owned(), |v| format!("{v:.6}"))
}

pub const REPORT_TSV_HEADER: &str = "model\tMRecall@k\tMNDCG@k\tMAUC\tMedPerc";

impl MetricReport {
    /// One TSV row: model, recall, NDCG, MAUC, MedPerc.
    pub fn tsv_row(&self, model: &str) -> String {
        format!(
            "{model}\t{}\t{}\t{}\t{}",
            fmt_opt(self.recall_at_k),
            fmt_opt(self.ndcg_at_k),
            fmt_opt(self.mauc),
            fmt_opt(self.med_perc)
        )
    }

    pub fn tsv_header(&self) -> String {
        REPORT_TSV_HEADER.replace("@k", &format!("@{}", self.k))
    }
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for l in lines {
        writeln!(w, "{l}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_report_tsv(report: &MetricReport, model: &str, path: impl AsRef<Path>) -> Result<()> {
    write_lines(path.as_ref(), [report.tsv_header(), report.tsv_row(model)])
}

/// Per-case audit dump.
pub fn write_case_dump(ranked: &[RankedCase], path: impl AsRef<Path>) -> Result<()> {
    let header = "case_id\tn_candidates\tpositive_rank\tauc\tpercentile".to_owned();
    let rows = ranked.iter().enumerate().map(|(i, r)| {
        format!(
            "{i}\t{}\t{}\t{}\t{}",
            r.n_candidates,
            r.positive_rank,
            fmt_opt(auc_single_positive(r)),
            percentile_of_positive(r)
        )
    });
    write_lines(path.as_ref(), std::iter::once(header).chain(rows))
}

pub fn write_sweep(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    let header = "threshold\tmed_perc\tcases".to_owned();
    let body = rows
        .iter()
        .map(|r| format!("{}\t{}\t{}", r.threshold, fmt_opt(r.med_perc), r.cases));
    write_lines(path.as_ref(), std::iter::once(header).chain(body))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case(n: usize, activity: u32) -> TestCase {
        TestCase {
            user: 0,
            item: 0,
            positive: 0,
            candidates: (0..n as u32).collect(),
            author_train_count: activity,
        }
    }

    fn at_rank(rank: usize, n: usize) -> RankedCase {
        let mut s: Vec<f64> = (0..n).map(|i| -(i as f64)).collect();
        s.swap(0, rank - 1);
        rank_candidates(s, 0).unwrap()
    }

    #[test]
    fn two_passing_cases() {
        let cases = [case(10, 10), case(10, 12)];
        let ranked = [at_rank(1, 10), at_rank(3, 10)];
        let r = aggregate(&cases, &ranked, &EvalConfig::default()).unwrap();
        assert_eq!(r.recall_at_k, Some(1.0));
        assert_eq!(r.ndcg_at_k, Some(0.75));
        assert_eq!(r.filtered_cases, 2);
        assert_eq!(r.med_perc, Some(10.0));
    }

    #[test]
    fn small_pool_only_counts_for_auc() {
        let cases = [case(9, 50)];
        let ranked = [at_rank(2, 9)];
        let r = aggregate(&cases, &ranked, &EvalConfig::default()).unwrap();
        assert_eq!((r.recall_at_k, r.ndcg_at_k, r.filtered_cases), (None, None, 0));
        assert_eq!(r.mauc, Some(7.0 / 8.0));
        assert_eq!(r.auc_cases, 1);
    }

    #[test]
    fn singleton_excluded_from_auc() {
        let cases = [case(1, 50), case(3, 50)];
        let ranked = [at_rank(1, 1), at_rank(1, 3)];
        let r = aggregate(&cases, &ranked, &EvalConfig::default()).unwrap();
        assert_eq!((r.auc_cases, r.auc_excluded, r.mauc), (1, 1, Some(1.0)));
        // percentiles 100 and 33.3: lower median
        assert!((r.med_perc.unwrap() - 100.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_cases_error() {
        assert!(aggregate(&[], &[], &EvalConfig::default()).is_err());
    }

    #[test]
    fn sweep_thresholds() {
        let cases = [case(4, 0), case(4, 5), case(4, 20)];
        let ranked = [at_rank(4, 4), at_rank(2, 4), at_rank(1, 4)];
        let rows = activity_sweep(&cases, &ranked, &[0, 5, 21]).unwrap();
        assert_eq!(rows[0], SweepRow { threshold: 0, med_perc: Some(50.0), cases: 3 });
        assert_eq!(rows[1], SweepRow { threshold: 5, med_perc: Some(25.0), cases: 2 });
        assert_eq!(rows[2], SweepRow { threshold: 21, med_perc: None, cases: 0 });
        assert!(activity_sweep(&cases, &ranked, &[5, 0]).is_err());
    }

    #[test]
    fn tsv_nulls() {
        let cases = [case(2, 0)];
        let r = aggregate(&cases, &[at_rank(1, 2)], &EvalConfig::default()).unwrap();
        assert_eq!(r.tsv_row("rnd"), "rnd\tnull\tnull\t1.000000\t50.000000");
        assert_eq!(r.tsv_header(), "model\tMRecall@10\tMNDCG@10\tMAUC\tMedPerc");
    }
}
