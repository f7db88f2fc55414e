//! Source -> target experiments: per-fold pipelines, grid search on the
//! source development split, and paired comparisons between methods.

pub mod report;
pub mod stats;

use std::collections::HashSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{accuracy, predict, train_logreg, HybridVector, LogRegConfig};
use crate::corpus::{
    make_folds, split_unlabeled_holdout, Corpus, CorpusKind, Document, FoldConfig,
};
use crate::embeddings::{build_decoder, rewrite_bigrams, train_sgns, EmbeddingTable, SgnsConfig};
use crate::error::{Error, Result};
use crate::features::{
    count_features, vectorize, CountTable, FeatureKey, FeatureSpace, PivotRanking,
    DEFAULT_NONPIVOT_MIN_COUNT, DEFAULT_PIVOT_MIN_COUNT,
};
use crate::netrepr::{self, init_model, DecoderMode, PivotExample, ReprModel, SgdConfig};
use crate::sclmi::{
    build_projection, project, train_pivot_predictors, PivotPredictorConfig, Projection,
};
use crate::seed::derive_seed;

pub use stats::{
    class_disagreements, mcnemar, mcnemar_exact, setup_significance, similarity_rank_diff,
    ClassDisagreements, ContingencyTable, McNemarResult, McNemarVariant,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    AeScl,
    AeSclSr,
    SclMi,
    NoDa,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::AeScl, Method::AeSclSr, Method::SclMi, Method::NoDa];

    pub fn name(self) -> &'static str {
        match self {
            Method::AeScl => "ae_scl",
            Method::AeSclSr => "ae_scl_sr",
            Method::SclMi => "scl_mi",
            Method::NoDa => "no_da",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        let norm = s.replace('-', "_").to_ascii_lowercase();
        Method::ALL.into_iter().find(|m| m.name() == norm)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    pub pivot_grid: Vec<usize>,
    pub hidden_grid: Vec<usize>,
    pub svd_grid: Vec<usize>,
    pub sclmi_pivots: usize,
    pub pivot_min_count: u64,
    pub nonpivot_min_count: u64,
    pub holdout_ratio: f64,
    pub folds: FoldConfig,
    pub sgd: SgdConfig,
    pub sgns: SgnsConfig,
    pub pivot_predictor: PivotPredictorConfig,
    pub classifier: LogRegConfig,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            method: Method::AeScl,
            pivot_grid: vec![100, 200, 300, 400, 500],
            hidden_grid: vec![100, 300, 500],
            svd_grid: vec![50, 100, 150],
            sclmi_pivots: 1000,
            pivot_min_count: DEFAULT_PIVOT_MIN_COUNT,
            nonpivot_min_count: DEFAULT_NONPIVOT_MIN_COUNT,
            holdout_ratio: 0.2,
            folds: FoldConfig::default(),
            sgd: SgdConfig::default(),
            sgns: SgnsConfig::default(),
            pivot_predictor: PivotPredictorConfig::default(),
            classifier: LogRegConfig::default(),
            seed: 0,
        }
    }
}

/// Hyperparameters of one grid entry. `dim` is the hidden size for the
/// networks and the SVD rank for SCL-MI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridPoint {
    pub pivots: Option<usize>,
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub point: GridPoint,
    pub dev_accuracy: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold_index: usize,
    pub grid: Vec<GridOutcome>,
    pub chosen: GridPoint,
    pub dev_accuracy: f64,
    pub test_accuracy: f64,
    /// Target test predictions of the chosen model, in test-corpus order.
    pub test_predictions: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetupResult {
    pub source: String,
    pub target: String,
    pub method: Method,
    pub per_fold: Vec<FoldResult>,
    pub mean_test_accuracy: f64,
}

/// The four corpora of one adaptation setup.
#[derive(Debug, Clone, Copy)]
pub struct SetupData<'a> {
    pub source_labeled: &'a Corpus,
    pub source_unlabeled: &'a Corpus,
    pub target_unlabeled: &'a Corpus,
    pub target_test: &'a Corpus,
}

impl SetupData<'_> {
    fn validate(&self) -> Result<()> {
        self.source_labeled.require_kind(CorpusKind::Labeled)?;
        self.source_unlabeled.require_kind(CorpusKind::Unlabeled)?;
        self.target_unlabeled.require_kind(CorpusKind::Unlabeled)?;
        self.target_test.require_kind(CorpusKind::Labeled)?;
        if self.target_test.is_empty() {
            return Err(Error::invalid("target test corpus is empty"));
        }
        Ok(())
    }
}

/// Picks the best dev accuracy; ties go to fewer pivots, then the smaller
/// hidden size or SVD rank.
pub fn tune_hyperparams(grid: &[GridOutcome]) -> Option<&GridOutcome> {
    grid.iter().reduce(|best, cand| {
        let key = |g: &GridOutcome| (g.point.pivots.unwrap_or(0), g.point.dim.unwrap_or(0));
        if cand.dev_accuracy > best.dev_accuracy
            || (cand.dev_accuracy == best.dev_accuracy && key(cand) < key(best))
        {
            cand
        } else {
            best
        }
    })
}

/// Learned dense features appended to the original binary features.
pub enum Representation {
    None,
    Network(ReprModel),
    Projection(Projection),
}

impl Representation {
    pub fn features(&self, doc: &Document, space: &FeatureSpace) -> Result<HybridVector> {
        let v = vectorize(doc, space);
        let dense_part = match self {
            Representation::None => Vec::new(),
            Representation::Network(m) => netrepr::encode(m, &v.x_np)?,
            Representation::Projection(p) => project(p, &v.x_np)?,
        };
        Ok(HybridVector {
            sparse_part: v.x_full,
            dense_part,
        })
    }
}

fn labeled_vectors(
    docs: &[&Document],
    space: &FeatureSpace,
    repr: &Representation,
) -> Result<Vec<(HybridVector, u8)>> {
    docs.iter()
        .map(|d| {
            let label = d
                .label
                .ok_or_else(|| Error::invalid(format!("document {} has no label", d.id)))?;
            Ok((repr.features(d, space)?, label))
        })
        .collect()
}

pub fn pivot_examples(docs: &[&Document], space: &FeatureSpace) -> Vec<PivotExample> {
    docs.iter()
        .map(|d| {
            let v = vectorize(d, space);
            PivotExample {
                x_np: v.x_np,
                x_p: v.x_p,
            }
        })
        .collect()
}

/// Bigrams eligible as pivots (frequent in both domains).
pub fn bigram_pivot_candidates(
    counts: &CountTable,
    pivot_min_count: u64,
) -> HashSet<(String, String)> {
    counts
        .iter()
        .filter_map(|(k, (s, t))| match k {
            FeatureKey::Bigram(a, b) if s >= pivot_min_count && t >= pivot_min_count => {
                Some((a.clone(), b.clone()))
            }
            _ => None,
        })
        .collect()
}

/// Embeddings for the frozen decoder, trained on all unlabeled text of both
/// domains after fusing every pivot-eligible bigram into its own token.
pub fn train_pivot_embeddings(
    source_unlabeled: &Corpus,
    target_unlabeled: &Corpus,
    counts: &CountTable,
    pivot_min_count: u64,
    sgns: &SgnsConfig,
) -> Result<EmbeddingTable> {
    let bigrams = bigram_pivot_candidates(counts, pivot_min_count);
    let sentences: Vec<Vec<String>> = source_unlabeled
        .documents()
        .iter()
        .chain(target_unlabeled.documents())
        .map(|d| rewrite_bigrams(&d.tokens, &bigrams))
        .collect();
    train_sgns(&sentences, sgns)
}

struct Shared<'a> {
    data: SetupData<'a>,
    config: &'a ExperimentConfig,
    counts: CountTable,
    unl_train: Vec<&'a Document>,
    unl_val: Vec<&'a Document>,
    embeddings: Option<EmbeddingTable>,
    test_docs: Vec<&'a Document>,
}

struct GridRun {
    outcome: GridOutcome,
    test_predictions: Vec<u8>,
}

impl Shared<'_> {
    fn evaluate(
        &self,
        fold: usize,
        grid_index: usize,
        point: GridPoint,
        space: &FeatureSpace,
        repr: &Representation,
        train: &[&Document],
        dev: &[&Document],
    ) -> Result<GridRun> {
        let train_set = labeled_vectors(train, space, repr)?;
        let dev_set = labeled_vectors(dev, space, repr)?;
        let test_set = labeled_vectors(&self.test_docs, space, repr)?;
        let clf_cfg = LogRegConfig {
            seed: derive_seed(
                self.config.seed,
                "classifier",
                &[fold as u64, grid_index as u64],
            ),
            ..self.config.classifier
        };
        let clf = train_logreg(&train_set, &clf_cfg)?;
        let test_predictions = test_set
            .iter()
            .map(|(x, _)| predict(&clf, x).map(|(_, l)| l))
            .collect::<Result<Vec<u8>>>()?;
        Ok(GridRun {
            outcome: GridOutcome {
                point,
                dev_accuracy: accuracy(&clf, &dev_set)?,
                test_accuracy: accuracy(&clf, &test_set)?,
            },
            test_predictions,
        })
    }

    fn network_grid(&self) -> Vec<GridPoint> {
        let dims: Vec<usize> = match self.config.method {
            Method::AeSclSr => vec![self.config.sgns.dimension],
            _ => self.config.hidden_grid.clone(),
        };
        self.config
            .pivot_grid
            .iter()
            .flat_map(|&p| {
                dims.iter().map(move |&h| GridPoint {
                    pivots: Some(p),
                    dim: Some(h),
                })
            })
            .collect()
    }

    fn run_fold(
        &self,
        fold: usize,
        train: Vec<&Document>,
        dev: Vec<&Document>,
    ) -> Result<FoldResult> {
        let cfg = self.config;
        let ranking = PivotRanking::new(
            &self.counts,
            &train,
            cfg.pivot_min_count,
            cfg.nonpivot_min_count,
        )?;
        let fold_seed =
            |tag: &str, gi: usize| derive_seed(cfg.seed, tag, &[fold as u64, gi as u64]);

        let runs: Vec<GridRun> = match cfg.method {
            Method::NoDa => {
                let space = ranking.vocabulary_space()?;
                let point = GridPoint {
                    pivots: None,
                    dim: None,
                };
                vec![self.evaluate(fold, 0, point, &space, &Representation::None, &train, &dev)?]
            }
            Method::AeScl | Method::AeSclSr => {
                let mode = if cfg.method == Method::AeSclSr {
                    DecoderMode::FrozenDecoder
                } else {
                    DecoderMode::TrainableDecoder
                };
                self.network_grid()
                    .into_par_iter()
                    .enumerate()
                    .map(|(gi, point)| {
                        let space =
                            ranking.space(point.pivots.expect("network grid has pivots"))?;
                        let decoder = match &self.embeddings {
                            Some(table) => Some(build_decoder(table, &space)?),
                            None => None,
                        };
                        let model = init_model(
                            point.dim.expect("network grid has dims"),
                            &space,
                            mode,
                            decoder.as_ref(),
                            fold_seed("repr-init", gi),
                            cfg.sgd.init_scale,
                        )?;
                        let sgd = SgdConfig {
                            seed: fold_seed("repr-sgd", gi),
                            ..cfg.sgd
                        };
                        let (model, _report) = netrepr::train(
                            &model,
                            &pivot_examples(&self.unl_train, &space),
                            &pivot_examples(&self.unl_val, &space),
                            &sgd,
                        )?;
                        self.evaluate(
                            fold,
                            gi,
                            point,
                            &space,
                            &Representation::Network(model),
                            &train,
                            &dev,
                        )
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            Method::SclMi => {
                let space = ranking.space(cfg.sclmi_pivots)?;
                let all_unlabeled: Vec<&Document> = self
                    .unl_train
                    .iter()
                    .chain(&self.unl_val)
                    .copied()
                    .collect();
                let predictors = train_pivot_predictors(
                    &pivot_examples(&all_unlabeled, &space),
                    space.num_nonpivots(),
                    space.num_pivots(),
                    &PivotPredictorConfig {
                        seed: fold_seed("pivot-predictors", 0),
                        ..cfg.pivot_predictor
                    },
                )?;
                let max_k = cfg.svd_grid.iter().copied().max().unwrap_or(0);
                let full = build_projection(&predictors, max_k, fold_seed("svd", 0))?;
                cfg.svd_grid
                    .par_iter()
                    .enumerate()
                    .map(|(gi, &k)| {
                        let theta = crate::dense::DenseMatrix::from_rows(
                            &(0..k)
                                .map(|r| full.theta().row(r).to_vec())
                                .collect::<Vec<_>>(),
                        )?;
                        let repr = Representation::Projection(Projection::from_theta(theta));
                        let point = GridPoint {
                            pivots: Some(cfg.sclmi_pivots),
                            dim: Some(k),
                        };
                        self.evaluate(fold, gi, point, &space, &repr, &train, &dev)
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };

        let best = tune_hyperparams(&runs.iter().map(|r| r.outcome).collect::<Vec<_>>())
            .copied()
            .ok_or_else(|| Error::invalid("hyperparameter grid is empty"))?;
        let chosen = runs
            .iter()
            .find(|r| r.outcome.point == best.point)
            .expect("chosen point comes from the grid");
        Ok(FoldResult {
            fold_index: fold,
            grid: runs.iter().map(|r| r.outcome).collect(),
            chosen: best.point,
            dev_accuracy: best.dev_accuracy,
            test_accuracy: best.test_accuracy,
            test_predictions: chosen.test_predictions.clone(),
        })
    }
}

/// Runs the full protocol for one method on one source -> target setup.
pub fn run_setup(data: SetupData<'_>, config: &ExperimentConfig) -> Result<SetupResult> {
    data.validate()?;
    let grid_empty = match config.method {
        Method::NoDa => false,
        Method::AeScl => config.pivot_grid.is_empty() || config.hidden_grid.is_empty(),
        Method::AeSclSr => config.pivot_grid.is_empty(),
        Method::SclMi => config.svd_grid.is_empty(),
    };
    if grid_empty {
        return Err(Error::invalid(format!(
            "hyperparameter grid for {} is empty",
            config.method
        )));
    }

    let counts = count_features(data.source_unlabeled, data.target_unlabeled)?;
    let folds = make_folds(
        data.source_labeled,
        config.folds.k,
        config.folds.train_size,
        config.folds.dev_size,
        derive_seed(config.seed, "folds", &[]),
    )?;
    let split = split_unlabeled_holdout(
        data.source_unlabeled,
        data.target_unlabeled,
        config.holdout_ratio,
        derive_seed(config.seed, "holdout", &[]),
    )?;
    let (unl_train, unl_val) = split.materialize(data.source_unlabeled, data.target_unlabeled);
    let embeddings = if config.method == Method::AeSclSr {
        let sgns = SgnsConfig {
            seed: derive_seed(config.seed, "sgns", &[]),
            ..config.sgns
        };
        Some(train_pivot_embeddings(
            data.source_unlabeled,
            data.target_unlabeled,
            &counts,
            config.pivot_min_count,
            &sgns,
        )?)
    } else {
        None
    };
    let shared = Shared {
        data,
        config,
        counts,
        unl_train,
        unl_val,
        embeddings,
        test_docs: data.target_test.documents().iter().collect(),
    };

    let per_fold = folds
        .par_iter()
        .map(|f| {
            let train = shared.data.source_labeled.select(&f.train_ids);
            let dev = shared.data.source_labeled.select(&f.dev_ids);
            shared.run_fold(f.fold_index, train, dev)
        })
        .collect::<Result<Vec<_>>>()?;
    let mean_test_accuracy =
        per_fold.iter().map(|f| f.test_accuracy).sum::<f64>() / per_fold.len() as f64;
    Ok(SetupResult {
        source: data.source_labeled.domain_name.clone(),
        target: data.target_test.domain_name.clone(),
        method: config.method,
        per_fold,
        mean_test_accuracy,
    })
}

/// Per-fold paired comparison of two methods on the same setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub method_a: Method,
    pub method_b: Method,
    pub fold_tables: Vec<ContingencyTable>,
    pub fold_p_values: Vec<f64>,
    pub alpha: f64,
    pub variant: McNemarVariant,
    pub significant: bool,
}

pub fn compare(
    a: &SetupResult,
    b: &SetupResult,
    gold: &[u8],
    alpha: f64,
    variant: McNemarVariant,
) -> Result<Comparison> {
    if a.per_fold.len() != b.per_fold.len() {
        return Err(Error::invalid(
            "compared results have different fold counts",
        ));
    }
    let fold_tables = a
        .per_fold
        .iter()
        .zip(&b.per_fold)
        .map(|(fa, fb)| {
            ContingencyTable::from_predictions(gold, &fa.test_predictions, &fb.test_predictions)
        })
        .collect::<Result<Vec<_>>>()?;
    let fold_p_values = fold_tables
        .iter()
        .map(|&t| stats::p_value(t, variant))
        .collect();
    Ok(Comparison {
        method_a: a.method,
        method_b: b.method,
        significant: setup_significance(&fold_tables, alpha, variant)?,
        fold_tables,
        fold_p_values,
        alpha,
        variant,
    })
}
