use pivotrepr::classifier::{train_logreg_traced, HybridVector, LogRegConfig};
use pivotrepr::corpus::Document;
use pivotrepr::embeddings::cosine;
use pivotrepr::evalharness::report::{results_tsv, summary_json, TSV_HEADER};
use pivotrepr::evalharness::{
    class_disagreements, compare, mcnemar, run_setup, setup_significance, similarity_rank_diff,
    ContingencyTable, ExperimentConfig, McNemarVariant, Method, Representation, SetupData,
};
use pivotrepr::features::{count_features, vectorize, PivotRanking};
use pivotrepr::synthgen::{generate, GeneratorConfig, SyntheticCorpora};
use proptest::prelude::*;

fn corpora(seed: u64) -> SyntheticCorpora {
    generate(&GeneratorConfig {
        source_labeled_size: 400,
        source_unlabeled_size: 500,
        target_unlabeled_size: 500,
        target_test_size: 200,
        seed,
        ..GeneratorConfig::default()
    })
    .unwrap()
}

fn small_config(method: Method, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        method,
        seed,
        ..ExperimentConfig::default()
    };
    cfg.pivot_grid = vec![8, 12];
    cfg.hidden_grid = vec![8];
    cfg.svd_grid = vec![4, 8];
    cfg.sclmi_pivots = 12;
    cfg.sgns.dimension = 8;
    cfg.sgns.epochs = 2;
    cfg.sgd.max_epochs = 5;
    cfg.folds.k = 3;
    cfg.folds.train_size = 240;
    cfg.folds.dev_size = 80;
    cfg
}

fn data(c: &SyntheticCorpora) -> SetupData<'_> {
    SetupData {
        source_labeled: &c.source_labeled,
        source_unlabeled: &c.source_unlabeled,
        target_unlabeled: &c.target_unlabeled,
        target_test: &c.target_test,
    }
}

/// Rank of pair `(i, j)` among all pairs by descending cosine, ties sharing
/// the better rank, by explicit enumeration.
fn brute_rank(reprs: &[Vec<f64>], i: usize, j: usize) -> i64 {
    let target = cosine(&reprs[i], &reprs[j]);
    let mut all = Vec::new();
    for a in 0..reprs.len() {
        for b in a + 1..reprs.len() {
            all.push(cosine(&reprs[a], &reprs[b]));
        }
    }
    assert_eq!(all.len(), reprs.len() * (reprs.len() - 1) / 2);
    1 + all.iter().filter(|&&c| c > target).count() as i64
}

proptest! {
    #[test]
    fn class_disagreements_match_a_scan(
        rows in prop::collection::vec((0u8..2, 0u8..2, 0u8..2), 0..200)
    ) {
        let gold: Vec<u8> = rows.iter().map(|r| r.0).collect();
        let a: Vec<u8> = rows.iter().map(|r| r.1).collect();
        let b: Vec<u8> = rows.iter().map(|r| r.2).collect();
        let d = class_disagreements(&gold, &a, &b).unwrap();
        let mut want = [0u64; 4];
        for i in 0..gold.len() {
            let (ca, cb) = (a[i] == gold[i], b[i] == gold[i]);
            let slot = match (ca, cb, gold[i]) {
                (true, false, 1) => 0,
                (true, false, _) => 1,
                (false, true, 1) => 2,
                (false, true, _) => 3,
                _ => continue,
            };
            want[slot] += 1;
        }
        prop_assert_eq!(
            [d.a_only_positive, d.a_only_negative, d.b_only_positive, d.b_only_negative],
            want
        );
        let t = ContingencyTable::from_predictions(&gold, &a, &b).unwrap();
        prop_assert_eq!(t.b, want[0] + want[1]);
        prop_assert_eq!(t.c, want[2] + want[3]);
    }

    #[test]
    fn rank_diff_matches_enumeration(
        a in prop::collection::vec(prop::collection::vec(0.1f64..1.0, 3), 8),
        b in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 8),
        i in 0usize..8,
        j in 0usize..8,
    ) {
        prop_assume!(i != j);
        prop_assume!(b[i].iter().any(|v| *v != 0.0) && b[j].iter().any(|v| *v != 0.0));
        let got = similarity_rank_diff(&a, &b, (i, j)).unwrap();
        prop_assert_eq!(got, brute_rank(&a, i, j) - brute_rank(&b, i, j));
        prop_assert_eq!(similarity_rank_diff(&a, &a, (i, j)).unwrap(), 0);
    }

    #[test]
    fn mcnemar_is_symmetric(b in 0u64..500, c in 0u64..500) {
        let x = mcnemar(ContingencyTable { b, c });
        let y = mcnemar(ContingencyTable { b: c, c: b });
        prop_assert_eq!(x, y);
        prop_assert!(x.p_value > 0.0 && x.p_value <= 1.0);
        let t = [ContingencyTable { b, c }];
        prop_assert!(!setup_significance(&t, 0.0, McNemarVariant::ChiSquare).unwrap());
        if b + c > 1 && b != c {
            prop_assert_eq!(
                setup_significance(&t, 1.0, McNemarVariant::ChiSquare).unwrap(),
                x.p_value < 1.0
            );
        }
    }
}

#[test]
fn no_da_gives_target_only_words_zero_weight() {
    let c = corpora(21);
    let counts = count_features(&c.source_unlabeled, &c.target_unlabeled).unwrap();
    let train: Vec<&Document> = c.source_labeled.documents().iter().collect();
    let space = PivotRanking::new(&counts, &train, 10, 10)
        .unwrap()
        .vocabulary_space()
        .unwrap();
    let set: Vec<(HybridVector, u8)> = train
        .iter()
        .map(|d| {
            (
                Representation::None.features(d, &space).unwrap(),
                d.label.unwrap(),
            )
        })
        .collect();
    let trace = train_logreg_traced(
        &set,
        &LogRegConfig {
            seed: 3,
            ..LogRegConfig::default()
        },
    )
    .unwrap();
    assert!(trace.final_gradient_norm < LogRegConfig::default().tolerance);
    assert!(trace
        .objective_history
        .windows(2)
        .all(|w| w[1] <= w[0] + 1e-12));

    let mut target_only = 0;
    for (i, entry) in space.features().iter().enumerate() {
        if entry.key.display().starts_with("tgt") {
            let in_source = train
                .iter()
                .any(|d| vectorize(d, &space).x_full.contains(i));
            assert!(!in_source);
            assert_eq!(trace.model.sparse_weights[i], 0.0, "{}", entry.key);
            target_only += 1;
        }
    }
    assert!(target_only > 0);
    assert!(trace.model.dense_weights.is_empty());
}

#[test]
fn run_setup_is_deterministic_and_consistent() {
    let c = corpora(22);
    for method in Method::ALL {
        let cfg = small_config(method, 5);
        let a = run_setup(data(&c), &cfg).unwrap();
        let b = run_setup(data(&c), &cfg).unwrap();
        assert_eq!(a, b, "{method}");
        assert_eq!(a.per_fold.len(), 3);
        let mean = a.per_fold.iter().map(|f| f.test_accuracy).sum::<f64>() / 3.0;
        assert!((a.mean_test_accuracy - mean).abs() < 1e-12);
        for f in &a.per_fold {
            assert_eq!(f.test_predictions.len(), c.target_test.len());
            let best = f
                .grid
                .iter()
                .map(|g| g.dev_accuracy)
                .fold(f64::MIN, f64::max);
            assert_eq!(f.dev_accuracy, best);
            match method {
                Method::NoDa => assert_eq!(f.chosen.pivots, None),
                Method::AeSclSr => assert_eq!(f.chosen.dim, Some(8)),
                Method::SclMi => assert_eq!(f.chosen.pivots, Some(12)),
                Method::AeScl => assert_eq!(f.grid.len(), 2),
            }
        }
    }
}

#[test]
fn reports_have_stable_layout() {
    let c = corpora(23);
    let ae = run_setup(data(&c), &small_config(Method::AeScl, 1)).unwrap();
    let no_da = run_setup(data(&c), &small_config(Method::NoDa, 1)).unwrap();
    let gold = c.target_test.labels();
    let cmp = compare(&ae, &no_da, &gold, 0.05, McNemarVariant::ChiSquare).unwrap();
    assert_eq!(cmp.fold_tables.len(), 3);

    let tsv = results_tsv(&[ae.clone(), no_da.clone()]);
    let lines: Vec<&str> = tsv.lines().collect();
    assert_eq!(lines[0], TSV_HEADER);
    assert_eq!(lines.len(), 1 + 6);
    assert!(lines[4].starts_with("source\ttarget\tno_da\t0\t-\t-\t"));

    let json = summary_json(&[ae, no_da], &[("source".into(), "target".into(), cmp)]).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["setups"].as_array().unwrap().len(), 2);
    assert!(v["comparisons"][0]["significant"].is_boolean());
}
