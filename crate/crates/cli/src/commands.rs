use std::fs;
use std::path::{Path, PathBuf};

use pivotrepr::classifier::{predict, train_logreg, LogRegConfig};
use pivotrepr::corpus::split_unlabeled_holdout;
use pivotrepr::corpus::{Document, POSITIVE};
use pivotrepr::embeddings::{build_decoder, load_embeddings, SgnsConfig};
use pivotrepr::evalharness::report::{results_tsv, summary_json};
use pivotrepr::evalharness::stats::{mcnemar, mcnemar_exact};
use pivotrepr::evalharness::{
    compare, pivot_examples, run_setup, train_pivot_embeddings, ContingencyTable, McNemarVariant,
    Method, Representation, SetupData,
};
use pivotrepr::features::{count_features, CountTable, FeatureSpace, PivotRanking};
use pivotrepr::netrepr::{self, init_model, DecoderMode, ReprModel, SgdConfig};
use pivotrepr::sclmi::{
    build_projection, train_pivot_predictors, PivotPredictorConfig, Projection,
};
use pivotrepr::seed::derive_seed;
use pivotrepr::synthgen::generate;
use pivotrepr::{Error, Result};
use serde::Serialize;

use crate::config::{first_or, RunConfig, SetupCorpora};

/// With `--allow-exact-mcnemar`, tables with fewer discordant pairs than this
/// use the exact binomial test.
pub const EXACT_BELOW: u64 = 25;

pub const FEATURE_SPACE_FILE: &str = "feature_space.json";
pub const REPR_MODEL_FILE: &str = "repr_model.json";
pub const TRAIN_REPORT_FILE: &str = "train_report.json";
pub const PROJECTION_FILE: &str = "projection.json";
pub const EMBEDDINGS_FILE: &str = "embeddings.txt";
pub const CLASSIFIER_FILE: &str = "classifier.json";
pub const PREDICTIONS_FILE: &str = "predictions.tsv";
pub const RESULTS_FILE: &str = "results.tsv";
pub const SUMMARY_FILE: &str = "summary.json";

const PREDICTIONS_HEADER: &str = "id\tgold\tpred\tprob";

fn write_output(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    println!("wrote {}", path.display());
    Ok(path)
}

fn pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn load_setup(config: &RunConfig) -> Result<SetupCorpora> {
    config.check_inputs_exist()?;
    config.first_setup()?.load()
}

fn counts_and_ranking(
    config: &RunConfig,
    data: &SetupCorpora,
) -> Result<(CountTable, PivotRanking)> {
    let exp = &config.experiment;
    let counts = count_features(&data.source_unlabeled, &data.target_unlabeled)?;
    let labeled: Vec<&Document> = data.source_labeled.documents().iter().collect();
    let ranking = PivotRanking::new(
        &counts,
        &labeled,
        exp.pivot_min_count,
        exp.nonpivot_min_count,
    )?;
    Ok((counts, ranking))
}

fn sgns_config(config: &RunConfig) -> SgnsConfig {
    SgnsConfig {
        seed: derive_seed(config.seed(), "sgns", &[]),
        ..config.experiment.sgns
    }
}

pub fn gen_synth(config: &RunConfig, out: &Path) -> Result<()> {
    let corpora = generate(&config.synth)?;
    corpora.write(out)?;
    println!(
        "wrote {} labeled, {} + {} unlabeled, {} test documents to {}",
        corpora.source_labeled.len(),
        corpora.source_unlabeled.len(),
        corpora.target_unlabeled.len(),
        corpora.target_test.len(),
        out.display()
    );
    Ok(())
}

pub fn pivots(config: &RunConfig, out: &Path) -> Result<()> {
    let data = load_setup(config)?;
    let (_, ranking) = counts_and_ranking(config, &data)?;
    let n = first_or(
        config.num_pivots,
        &config.experiment.pivot_grid,
        "pivot count",
    )?;
    let space = ranking.space(n)?;
    write_output(out, FEATURE_SPACE_FILE, &space.to_json()?)?;
    Ok(())
}

pub fn train_embed(config: &RunConfig, out: &Path) -> Result<()> {
    let data = load_setup(config)?;
    let counts = count_features(&data.source_unlabeled, &data.target_unlabeled)?;
    let table = train_pivot_embeddings(
        &data.source_unlabeled,
        &data.target_unlabeled,
        &counts,
        config.experiment.pivot_min_count,
        &sgns_config(config),
    )?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let path = out.join(EMBEDDINGS_FILE);
    table.write(&path)?;
    println!("wrote {} ({} tokens)", path.display(), table.len());
    Ok(())
}

pub fn train_repr(
    config: &RunConfig,
    out: &Path,
    method: Option<Method>,
    embeddings: Option<&Path>,
) -> Result<()> {
    let method = method.unwrap_or(config.experiment.method);
    let exp = &config.experiment;
    let seed = config.seed();
    match method {
        Method::NoDa => return Err(Error::invalid("no_da learns no representation")),
        Method::AeSclSr if embeddings.is_none() => {
            return Err(Error::invalid(
                "ae_scl_sr trains a frozen decoder and needs --embeddings <file>",
            ))
        }
        _ => {}
    }
    let data = load_setup(config)?;
    let (_, ranking) = counts_and_ranking(config, &data)?;

    if method == Method::SclMi {
        let space = ranking.space(config.num_pivots.unwrap_or(exp.sclmi_pivots))?;
        let k = first_or(config.svd_dim, &exp.svd_grid, "SVD rank")?;
        let all: Vec<&Document> = data
            .source_unlabeled
            .documents()
            .iter()
            .chain(data.target_unlabeled.documents())
            .collect();
        let predictors = train_pivot_predictors(
            &pivot_examples(&all, &space),
            space.num_nonpivots(),
            space.num_pivots(),
            &PivotPredictorConfig {
                seed: derive_seed(seed, "pivot-predictors", &[]),
                ..exp.pivot_predictor
            },
        )?;
        let projection = build_projection(&predictors, k, derive_seed(seed, "svd", &[]))?;
        write_output(out, FEATURE_SPACE_FILE, &space.to_json()?)?;
        write_output(out, PROJECTION_FILE, &projection.to_json()?)?;
        return Ok(());
    }

    let space = ranking.space(first_or(config.num_pivots, &exp.pivot_grid, "pivot count")?)?;
    let (mode, decoder, hidden) = match embeddings {
        Some(path) if method == Method::AeSclSr => {
            let table = load_embeddings(path)?;
            let decoder = build_decoder(&table, &space)?;
            (DecoderMode::FrozenDecoder, Some(decoder), table.dimension())
        }
        _ => (
            DecoderMode::TrainableDecoder,
            None,
            first_or(config.hidden_dim, &exp.hidden_grid, "hidden dimension")?,
        ),
    };
    let split = split_unlabeled_holdout(
        &data.source_unlabeled,
        &data.target_unlabeled,
        exp.holdout_ratio,
        derive_seed(seed, "holdout", &[]),
    )?;
    let (train, validation) = split.materialize(&data.source_unlabeled, &data.target_unlabeled);
    let model = init_model(
        hidden,
        &space,
        mode,
        decoder.as_ref(),
        derive_seed(seed, "repr-init", &[]),
        exp.sgd.init_scale,
    )?;
    let sgd = SgdConfig {
        seed: derive_seed(seed, "repr-sgd", &[]),
        ..exp.sgd
    };
    let (model, report) = netrepr::train(
        &model,
        &pivot_examples(&train, &space),
        &pivot_examples(&validation, &space),
        &sgd,
    )?;
    write_output(out, FEATURE_SPACE_FILE, &space.to_json()?)?;
    write_output(out, REPR_MODEL_FILE, &model.to_json()?)?;
    write_output(out, TRAIN_REPORT_FILE, &pretty(&report)?)?;
    println!(
        "{method}: {} epochs, stopped early: {}",
        report.epochs_run, report.stopped_early
    );
    Ok(())
}

fn load_representation(dir: &Path) -> Result<(FeatureSpace, Representation)> {
    let space = FeatureSpace::from_json(&read_text(&dir.join(FEATURE_SPACE_FILE))?)?;
    let model_path = dir.join(REPR_MODEL_FILE);
    let projection_path = dir.join(PROJECTION_FILE);
    let repr = if model_path.is_file() {
        Representation::Network(ReprModel::from_json(&read_text(&model_path)?)?)
    } else if projection_path.is_file() {
        Representation::Projection(Projection::from_json(&read_text(&projection_path)?)?)
    } else {
        return Err(Error::io(
            &model_path,
            std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("neither {REPR_MODEL_FILE} nor {PROJECTION_FILE} found"),
            ),
        ));
    };
    Ok((space, repr))
}

pub fn train_clf(config: &RunConfig, out: &Path, repr_dir: Option<&Path>) -> Result<()> {
    let data = load_setup(config)?;
    let (space, repr) = match repr_dir {
        Some(dir) => load_representation(dir)?,
        None => {
            let (_, ranking) = counts_and_ranking(config, &data)?;
            (ranking.vocabulary_space()?, Representation::None)
        }
    };
    let train = data
        .source_labeled
        .documents()
        .iter()
        .map(|d| Ok((repr.features(d, &space)?, d.label.unwrap_or_default())))
        .collect::<Result<Vec<_>>>()?;
    let clf = train_logreg(
        &train,
        &LogRegConfig {
            seed: derive_seed(config.seed(), "classifier", &[]),
            ..config.experiment.classifier
        },
    )?;
    write_output(out, CLASSIFIER_FILE, &clf.to_json()?)?;

    if let Some(test) = &data.target_test {
        let mut lines = vec![PREDICTIONS_HEADER.to_string()];
        let mut correct = 0usize;
        for d in test.documents() {
            let (p, label) = predict(&clf, &repr.features(d, &space)?)?;
            let gold = d.label.unwrap_or_default();
            correct += usize::from(gold == label);
            lines.push(format!("{}\t{gold}\t{label}\t{p:.6}", d.id));
        }
        lines.push(String::new());
        write_output(out, PREDICTIONS_FILE, &lines.join("\n"))?;
        println!(
            "target accuracy {:.6}",
            correct as f64 / test.len().max(1) as f64
        );
    }
    Ok(())
}

struct Predictions {
    ids: Vec<String>,
    gold: Vec<u8>,
    pred: Vec<u8>,
}

fn parse_label(field: &str, line: usize) -> Result<u8> {
    match field {
        "0" => Ok(0),
        "1" => Ok(POSITIVE),
        _ => Err(Error::Parse {
            line,
            message: format!("label must be 0 or 1, got {field:?}"),
        }),
    }
}

fn load_predictions(path: &Path) -> Result<Predictions> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.starts_with("id\tgold\tpred") => {}
        _ => {
            return Err(Error::invalid(format!(
                "{}: missing '{PREDICTIONS_HEADER}' header",
                path.display()
            )))
        }
    }
    let mut p = Predictions {
        ids: Vec::new(),
        gold: Vec::new(),
        pred: Vec::new(),
    };
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(Error::Parse {
                line: i + 1,
                message: "expected id, gold and pred columns".into(),
            });
        }
        p.ids.push(fields[0].to_string());
        p.gold.push(parse_label(fields[1], i + 1)?);
        p.pred.push(parse_label(fields[2], i + 1)?);
    }
    if p.ids.is_empty() {
        return Err(Error::invalid(format!(
            "{}: no predictions",
            path.display()
        )));
    }
    Ok(p)
}

fn accuracy_of(p: &Predictions) -> f64 {
    let correct = p.gold.iter().zip(&p.pred).filter(|(g, q)| g == q).count();
    correct as f64 / p.gold.len() as f64
}

fn variant_for(tables: &[ContingencyTable], allow_exact: bool) -> McNemarVariant {
    if allow_exact && tables.iter().any(|t| t.b + t.c < EXACT_BELOW) {
        McNemarVariant::Exact
    } else {
        McNemarVariant::ChiSquare
    }
}

#[derive(Serialize)]
struct EvalReport {
    format_version: u32,
    examples: usize,
    accuracy_a: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    accuracy_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    significance: Option<Significance>,
}

#[derive(Serialize)]
struct Significance {
    b: u64,
    c: u64,
    variant: McNemarVariant,
    statistic: Option<f64>,
    p_value: f64,
    alpha: f64,
    significant: bool,
}

pub fn eval(
    config: &RunConfig,
    files: &[PathBuf],
    out: Option<&Path>,
    allow_exact: bool,
) -> Result<()> {
    let a = load_predictions(&files[0])?;
    let mut report = EvalReport {
        format_version: 1,
        examples: a.ids.len(),
        accuracy_a: accuracy_of(&a),
        accuracy_b: None,
        significance: None,
    };
    if let Some(path) = files.get(1) {
        let b = load_predictions(path)?;
        if a.ids != b.ids || a.gold != b.gold {
            return Err(Error::invalid(
                "prediction files must list the same documents with the same gold labels",
            ));
        }
        let table = ContingencyTable::from_predictions(&a.gold, &a.pred, &b.pred)?;
        let variant = variant_for(&[table], allow_exact);
        let (statistic, p_value) = match variant {
            McNemarVariant::ChiSquare => {
                let r = mcnemar(table);
                (Some(r.statistic), r.p_value)
            }
            McNemarVariant::Exact => (None, mcnemar_exact(table)),
        };
        report.accuracy_b = Some(accuracy_of(&b));
        report.significance = Some(Significance {
            b: table.b,
            c: table.c,
            variant,
            statistic,
            p_value,
            alpha: config.alpha,
            significant: p_value < config.alpha,
        });
    }
    let json = pretty(&report)?;
    match out {
        Some(dir) => {
            write_output(dir, "eval.json", &json)?;
        }
        None => print!("{json}"),
    }
    Ok(())
}

pub fn experiment(
    config: &RunConfig,
    out: &Path,
    method: Option<Method>,
    allow_exact: bool,
) -> Result<()> {
    if config.setups.is_empty() {
        return Err(Error::invalid("config lists no [[setups]]"));
    }
    let methods = match method {
        Some(m) => vec![m],
        None => config.methods.clone(),
    };
    if methods.is_empty() {
        return Err(Error::invalid("no methods configured"));
    }
    for s in &config.setups {
        if s.target_test.is_none() {
            return Err(Error::invalid(format!(
                "setup {} -> {} has no target_test",
                s.source, s.target
            )));
        }
    }
    config.check_inputs_exist()?;

    let mut results = Vec::new();
    let mut comparisons = Vec::new();
    for setup in &config.setups {
        let corpora = setup.load()?;
        let target_test = corpora.target_test.as_ref().expect("checked above");
        let data = SetupData {
            source_labeled: &corpora.source_labeled,
            source_unlabeled: &corpora.source_unlabeled,
            target_unlabeled: &corpora.target_unlabeled,
            target_test,
        };
        let mut setup_results = Vec::new();
        for &m in &methods {
            let exp = pivotrepr::evalharness::ExperimentConfig {
                method: m,
                ..config.experiment.clone()
            };
            let r = run_setup(data, &exp)?;
            eprintln!(
                "{} -> {} {m}: mean target accuracy {:.4}",
                setup.source, setup.target, r.mean_test_accuracy
            );
            setup_results.push(r);
        }
        let gold = target_test.labels();
        for (i, a) in setup_results.iter().enumerate() {
            for b in &setup_results[i + 1..] {
                let c = compare(a, b, &gold, config.alpha, McNemarVariant::ChiSquare)?;
                let c = match variant_for(&c.fold_tables, allow_exact) {
                    McNemarVariant::Exact => {
                        compare(a, b, &gold, config.alpha, McNemarVariant::Exact)?
                    }
                    McNemarVariant::ChiSquare => c,
                };
                comparisons.push((setup.source.clone(), setup.target.clone(), c));
            }
        }
        results.extend(setup_results);
    }
    write_output(out, RESULTS_FILE, &results_tsv(&results))?;
    write_output(out, SUMMARY_FILE, &summary_json(&results, &comparisons)?)?;
    Ok(())
}
