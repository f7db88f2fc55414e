//! Paired comparison statistics for two classifiers on a shared test set.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::factorial::ln_binomial;

use crate::embeddings::cosine;
use crate::error::{Error, Result};

/// Disagreement counts: `b` = A correct and B wrong, `c` = A wrong and B correct.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub b: u64,
    pub c: u64,
}

impl ContingencyTable {
    pub fn from_predictions(gold: &[u8], preds_a: &[u8], preds_b: &[u8]) -> Result<Self> {
        check_lengths(gold, preds_a, preds_b)?;
        let mut t = ContingencyTable::default();
        for ((g, a), b) in gold.iter().zip(preds_a).zip(preds_b) {
            match (a == g, b == g) {
                (true, false) => t.b += 1,
                (false, true) => t.c += 1,
                _ => {}
            }
        }
        Ok(t)
    }
}

fn check_lengths(gold: &[u8], a: &[u8], b: &[u8]) -> Result<()> {
    if gold.len() != a.len() || gold.len() != b.len() {
        return Err(Error::invalid(format!(
            "prediction lengths differ: gold {}, A {}, B {}",
            gold.len(),
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McNemarResult {
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McNemarVariant {
    /// Continuity-corrected chi-square with one degree of freedom.
    #[default]
    ChiSquare,
    /// Two-sided exact binomial test on the discordant pairs.
    Exact,
}

/// Upper tail of the chi-square distribution with one degree of freedom.
pub fn chi_square1_upper_tail(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    erfc((x / 2.0).sqrt())
}

/// Continuity-corrected McNemar statistic `(|b - c| - 1)^2 / (b + c)`.
/// With no discordant pairs the statistic is 0 and p is 1.
pub fn mcnemar(table: ContingencyTable) -> McNemarResult {
    let n = table.b + table.c;
    if n == 0 {
        return McNemarResult {
            statistic: 0.0,
            p_value: 1.0,
        };
    }
    let diff = table.b.abs_diff(table.c) as f64 - 1.0;
    let statistic = diff * diff / n as f64;
    McNemarResult {
        statistic,
        p_value: chi_square1_upper_tail(statistic).clamp(f64::MIN_POSITIVE, 1.0),
    }
}

/// Exact two-sided binomial p-value, `min(1, 2 P[X <= min(b, c)])` for
/// `X ~ Binomial(b + c, 1/2)`.
pub fn mcnemar_exact(table: ContingencyTable) -> f64 {
    let n = table.b + table.c;
    if n == 0 {
        return 1.0;
    }
    let k = table.b.min(table.c);
    let ln_half_n = n as f64 * 0.5f64.ln();
    let tail: f64 = (0..=k).map(|i| (ln_binomial(n, i) + ln_half_n).exp()).sum();
    (2.0 * tail).min(1.0)
}

pub fn p_value(table: ContingencyTable, variant: McNemarVariant) -> f64 {
    match variant {
        McNemarVariant::ChiSquare => mcnemar(table).p_value,
        McNemarVariant::Exact => mcnemar_exact(table),
    }
}

/// A setup-level difference counts as significant only if it is significant
/// in every fold.
pub fn setup_significance(
    fold_tables: &[ContingencyTable],
    alpha: f64,
    variant: McNemarVariant,
) -> Result<bool> {
    if fold_tables.is_empty() {
        return Err(Error::invalid("significance needs at least one fold"));
    }
    Ok(fold_tables.iter().all(|&t| p_value(t, variant) < alpha))
}

/// Per-class counts of examples one model gets right and the other wrong.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassDisagreements {
    pub a_only_positive: u64,
    pub a_only_negative: u64,
    pub b_only_positive: u64,
    pub b_only_negative: u64,
}

pub fn class_disagreements(
    gold: &[u8],
    preds_a: &[u8],
    preds_b: &[u8],
) -> Result<ClassDisagreements> {
    check_lengths(gold, preds_a, preds_b)?;
    let mut out = ClassDisagreements::default();
    for ((g, a), b) in gold.iter().zip(preds_a).zip(preds_b) {
        let positive = *g == 1;
        match (a == g, b == g, positive) {
            (true, false, true) => out.a_only_positive += 1,
            (true, false, false) => out.a_only_negative += 1,
            (false, true, true) => out.b_only_positive += 1,
            (false, true, false) => out.b_only_negative += 1,
            _ => {}
        }
    }
    Ok(out)
}

/// Rank (1 = most similar) of the cosine of pair `(i, j)` among all document
/// pairs. Tied cosines share the better rank.
fn pair_rank(reprs: &[Vec<f64>], i: usize, j: usize) -> usize {
    let target = cosine(&reprs[i], &reprs[j]);
    let mut better = 0;
    for a in 0..reprs.len() {
        for b in a + 1..reprs.len() {
            if cosine(&reprs[a], &reprs[b]) > target {
                better += 1;
            }
        }
    }
    better + 1
}

/// `rank_A - rank_B` of the cosine similarity of one document pair. Pairs with
/// a zero vector elsewhere in the set score cosine 0.
pub fn similarity_rank_diff(
    reprs_a: &[Vec<f64>],
    reprs_b: &[Vec<f64>],
    doc_pair: (usize, usize),
) -> Result<i64> {
    let (i, j) = doc_pair;
    let n = reprs_a.len();
    if n < 2 || reprs_b.len() != n {
        return Err(Error::invalid(format!(
            "need at least 2 documents with both models (got {} and {})",
            n,
            reprs_b.len()
        )));
    }
    if i == j || i >= n || j >= n {
        return Err(Error::invalid(format!(
            "bad document pair ({i}, {j}) for {n} documents"
        )));
    }
    for (name, reprs) in [("A", reprs_a), ("B", reprs_b)] {
        for d in [i, j] {
            if reprs[d].iter().all(|&v| v == 0.0) {
                return Err(Error::invalid(format!(
                    "model {name} represents document {d} by a zero vector"
                )));
            }
        }
    }
    Ok(pair_rank(reprs_a, i, j) as i64 - pair_rank(reprs_b, i, j) as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mcnemar_examples() {
        let r = mcnemar(ContingencyTable { b: 15, c: 5 });
        assert!((r.statistic - 4.05).abs() < 1e-12);
        assert!((r.p_value - 0.0441).abs() < 1e-3);
        let r = mcnemar(ContingencyTable { b: 5, c: 5 });
        assert!((r.statistic - 0.1).abs() < 1e-12);
        assert!((r.p_value - 0.7518).abs() < 1e-3);
        let r = mcnemar(ContingencyTable { b: 0, c: 0 });
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
        let r = mcnemar(ContingencyTable { b: 4, c: 3 });
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
    }

    #[test]
    fn mcnemar_symmetric() {
        for (b, c) in [(3, 9), (0, 4), (20, 1)] {
            let x = mcnemar(ContingencyTable { b, c });
            let y = mcnemar(ContingencyTable { b: c, c: b });
            assert_eq!(x, y);
            assert_eq!(
                mcnemar_exact(ContingencyTable { b, c }),
                mcnemar_exact(ContingencyTable { b: c, c: b })
            );
        }
    }

    #[test]
    fn exact_small_cases() {
        // b=0, c=4: 2 * (1/16)
        assert!((mcnemar_exact(ContingencyTable { b: 0, c: 4 }) - 0.125).abs() < 1e-12);
        // b=1, c=5: 2 * (1 + 6) / 64
        assert!((mcnemar_exact(ContingencyTable { b: 1, c: 5 }) - 14.0 / 64.0).abs() < 1e-12);
        assert_eq!(mcnemar_exact(ContingencyTable { b: 3, c: 3 }), 1.0);
    }

    #[test]
    fn significance_examples() {
        // Tables chosen so the chi-square p-values fall just below or above 0.05.
        let sig = ContingencyTable { b: 15, c: 5 };
        let weak = ContingencyTable { b: 12, c: 5 };
        assert!(mcnemar(weak).p_value > 0.05);
        let v = McNemarVariant::ChiSquare;
        assert!(setup_significance(&[sig; 5], 0.05, v).unwrap());
        assert!(!setup_significance(&[sig, sig, sig, sig, weak], 0.05, v).unwrap());
        assert!(setup_significance(&[], 0.05, v).is_err());
        assert!(!setup_significance(&[sig], 0.0, v).unwrap());
        assert!(setup_significance(&[ContingencyTable { b: 3, c: 0 }], 1.0, v).unwrap());
    }

    #[test]
    fn disagreement_examples() {
        let d = class_disagreements(&[1, 1, 0], &[1, 0, 0], &[0, 0, 0]).unwrap();
        assert_eq!(
            d,
            ClassDisagreements {
                a_only_positive: 1,
                ..Default::default()
            }
        );
        let d = class_disagreements(&[1, 0, 1], &[0, 1, 1], &[0, 1, 1]).unwrap();
        assert_eq!(d, ClassDisagreements::default());
        assert!(class_disagreements(&[1], &[1, 0], &[1]).is_err());
    }

    #[test]
    fn rank_diff_examples() {
        let a = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.1]];
        assert_eq!(similarity_rank_diff(&a, &a, (0, 1)).unwrap(), 0);

        // B: docs 0 and 1 nearly parallel (most similar); A: orthogonal (least).
        let b = vec![vec![1.0, 0.0], vec![1.0, 0.01], vec![0.0, 1.0]];
        assert_eq!(similarity_rank_diff(&a, &b, (0, 1)).unwrap(), 2);

        let z = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(similarity_rank_diff(&z, &a, (0, 1)).is_err());
        assert!(similarity_rank_diff(&a, &a, (1, 1)).is_err());
        assert!(similarity_rank_diff(&a[..1], &a[..1], (0, 0)).is_err());
    }
}
