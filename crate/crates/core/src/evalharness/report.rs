//! Result files: a per-fold TSV table and a JSON summary.

use serde::Serialize;

use super::{Comparison, GridPoint, Method, SetupResult};
use crate::error::Result;

pub const TSV_HEADER: &str = "source\ttarget\tmethod\tfold\tpivots\thidden_or_k\tdev_acc\ttest_acc";

fn opt(v: Option<usize>) -> String {
    v.map_or_else(|| "-".to_owned(), |n| n.to_string())
}

/// One row per (setup, method, fold) with the chosen hyperparameters.
pub fn results_tsv(results: &[SetupResult]) -> String {
    let mut out = String::from(TSV_HEADER);
    out.push('\n');
    for r in results {
        for f in &r.per_fold {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\n",
                r.source,
                r.target,
                r.method,
                f.fold_index,
                opt(f.chosen.pivots),
                opt(f.chosen.dim),
                f.dev_accuracy,
                f.test_accuracy
            ));
        }
    }
    out
}

#[derive(Serialize)]
struct FoldSummary {
    fold: usize,
    chosen: GridPoint,
    dev_accuracy: f64,
    test_accuracy: f64,
}

#[derive(Serialize)]
struct SetupSummary<'a> {
    source: &'a str,
    target: &'a str,
    method: Method,
    mean_test_accuracy: f64,
    folds: Vec<FoldSummary>,
}

#[derive(Serialize)]
struct ComparisonSummary<'a> {
    source: &'a str,
    target: &'a str,
    #[serde(flatten)]
    comparison: &'a Comparison,
}

#[derive(Serialize)]
struct Summary<'a> {
    format_version: u32,
    setups: Vec<SetupSummary<'a>>,
    comparisons: Vec<ComparisonSummary<'a>>,
}

/// `comparisons` pairs each comparison with the (source, target) it belongs to.
pub fn summary_json(
    results: &[SetupResult],
    comparisons: &[(String, String, Comparison)],
) -> Result<String> {
    let summary = Summary {
        format_version: 1,
        setups: results
            .iter()
            .map(|r| SetupSummary {
                source: &r.source,
                target: &r.target,
                method: r.method,
                mean_test_accuracy: r.mean_test_accuracy,
                folds: r
                    .per_fold
                    .iter()
                    .map(|f| FoldSummary {
                        fold: f.fold_index,
                        chosen: f.chosen,
                        dev_accuracy: f.dev_accuracy,
                        test_accuracy: f.test_accuracy,
                    })
                    .collect(),
            })
            .collect(),
        comparisons: comparisons
            .iter()
            .map(|(s, t, c)| ComparisonSummary {
                source: s,
                target: t,
                comparison: c,
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&summary)?;
    s.push('\n');
    Ok(s)
}
