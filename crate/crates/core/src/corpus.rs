//! Corpus ingestion: tokenization, n-gram extraction, JSON-lines loading, and
//! the balanced fold / unlabeled holdout splits used by the experiment protocol.

use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureKey;
use crate::seed::{derive_seed, rng_from_seed};

pub const POSITIVE: u8 = 1;
pub const NEGATIVE: u8 = 0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub tokens: Vec<String>,
    /// Sentiment class, 1 = positive and 0 = negative. Absent for unlabeled text.
    pub label: Option<u8>,
}

impl Document {
    pub fn from_text(id: impl Into<String>, text: &str, label: Option<u8>) -> Self {
        Document {
            id: id.into(),
            tokens: tokenize(text),
            label,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusKind {
    Labeled,
    Unlabeled,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub domain_name: String,
    pub kind: CorpusKind,
    documents: Vec<Document>,
}

impl Corpus {
    /// Builds a corpus, checking that labels agree with `kind` and ids are unique.
    pub fn new(
        domain_name: impl Into<String>,
        kind: CorpusKind,
        documents: Vec<Document>,
    ) -> Result<Self> {
        let mut seen = HashSet::with_capacity(documents.len());
        for doc in &documents {
            match (kind, doc.label) {
                (CorpusKind::Labeled, None) => {
                    return Err(Error::invalid(format!("document {} has no label", doc.id)))
                }
                (CorpusKind::Unlabeled, Some(_)) => {
                    return Err(Error::invalid(format!(
                        "document {} is labeled in an unlabeled corpus",
                        doc.id
                    )))
                }
                (_, Some(l)) if l > 1 => {
                    return Err(Error::invalid(format!(
                        "document {} has label {l}, expected 0 or 1",
                        doc.id
                    )))
                }
                _ => {}
            }
            if !seen.insert(doc.id.as_str()) {
                return Err(Error::invalid(format!("duplicate document id {}", doc.id)));
            }
        }
        Ok(Corpus {
            domain_name: domain_name.into(),
            kind,
            documents,
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.documents.iter().filter_map(|d| d.label).collect()
    }

    /// Documents whose id is in `ids`, in corpus order.
    pub fn select<'a>(&'a self, ids: &BTreeSet<String>) -> Vec<&'a Document> {
        self.documents
            .iter()
            .filter(|d| ids.contains(&d.id))
            .collect()
    }

    pub(crate) fn require_kind(&self, kind: CorpusKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "corpus {} is {:?}, expected {:?}",
                self.domain_name, self.kind, kind
            )))
        }
    }
}

/// Lowercases and splits on every maximal run of non-alphanumeric characters.
pub fn tokenize(raw_text: &str) -> Vec<String> {
    raw_text
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// All unigrams in position order followed by all adjacent bigrams in position order.
pub fn extract_ngrams(tokens: &[String]) -> Vec<FeatureKey> {
    let mut out = Vec::with_capacity(tokens.len() * 2);
    out.extend(tokens.iter().map(|t| FeatureKey::Unigram(t.clone())));
    out.extend(
        tokens
            .windows(2)
            .map(|w| FeatureKey::Bigram(w[0].clone(), w[1].clone())),
    );
    out
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: Option<String>,
    text: String,
    label: Option<u8>,
}

#[derive(Serialize)]
struct RecordOut<'a> {
    id: &'a str,
    text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<u8>,
}

/// Loads a JSON-lines corpus. Blank lines are skipped; a missing `id` defaults
/// to the 1-based line number.
pub fn load_corpus(path: &Path, kind: CorpusKind, domain_name: &str) -> Result<Corpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut documents = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let parse_err = |message: String| Error::Parse {
            line: lineno,
            message,
        };
        match (kind, rec.label) {
            (CorpusKind::Labeled, None) => {
                return Err(parse_err("missing \"label\" in labeled corpus".into()))
            }
            (CorpusKind::Unlabeled, Some(_)) => {
                return Err(parse_err("\"label\" present in unlabeled corpus".into()))
            }
            (_, Some(l)) if l > 1 => return Err(parse_err(format!("label {l} is not 0 or 1"))),
            _ => {}
        }
        let id = rec.id.unwrap_or_else(|| lineno.to_string());
        if !seen.insert(id.clone()) {
            return Err(parse_err(format!("duplicate id {id:?}")));
        }
        documents.push(Document::from_text(id, &rec.text, rec.label));
    }
    Corpus::new(domain_name, kind, documents)
}

/// Writes a corpus in the JSON-lines format, with the token sequence joined by
/// single spaces as the text.
pub fn write_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let mut out = String::new();
    for doc in corpus.documents() {
        let rec = RecordOut {
            id: &doc.id,
            text: doc.tokens.join(" "),
            label: doc.label,
        };
        out.push_str(&serde_json::to_string(&rec)?);
        out.push('\n');
    }
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub fold_index: usize,
    pub train_ids: BTreeSet<String>,
    pub dev_ids: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldConfig {
    pub k: usize,
    pub train_size: usize,
    pub dev_size: usize,
}

impl Default for FoldConfig {
    fn default() -> Self {
        FoldConfig {
            k: 5,
            train_size: 1600,
            dev_size: 400,
        }
    }
}

/// Builds `k` class-balanced train/dev splits. Each fold resamples its own
/// balanced subsets, so dev sets of different folds may overlap.
pub fn make_folds(
    corpus: &Corpus,
    k: usize,
    train_size: usize,
    dev_size: usize,
    seed: u64,
) -> Result<Vec<FoldSplit>> {
    corpus.require_kind(CorpusKind::Labeled)?;
    if k == 0 {
        return Err(Error::invalid("fold count must be at least 1"));
    }
    if train_size % 2 != 0 || dev_size % 2 != 0 {
        return Err(Error::invalid(format!(
            "train_size ({train_size}) and dev_size ({dev_size}) must be even"
        )));
    }
    let per_class = (train_size + dev_size) / 2;
    let positives: Vec<&str> = ids_with_label(corpus, POSITIVE);
    let negatives: Vec<&str> = ids_with_label(corpus, NEGATIVE);
    for (name, have) in [("positive", positives.len()), ("negative", negatives.len())] {
        if have < per_class {
            return Err(Error::invalid(format!(
                "need {per_class} {name} documents for {train_size}/{dev_size} folds, have {have}"
            )));
        }
    }

    let folds = (0..k)
        .map(|fold| {
            let mut rng = rng_from_seed(derive_seed(seed, "fold", &[fold as u64]));
            let mut train_ids = BTreeSet::new();
            let mut dev_ids = BTreeSet::new();
            for class in [&positives, &negatives] {
                let mut pool = class.clone();
                pool.shuffle(&mut rng);
                train_ids.extend(pool[..train_size / 2].iter().map(|s| s.to_string()));
                dev_ids.extend(
                    pool[train_size / 2..per_class]
                        .iter()
                        .map(|s| s.to_string()),
                );
            }
            FoldSplit {
                fold_index: fold,
                train_ids,
                dev_ids,
            }
        })
        .collect();
    Ok(folds)
}

fn ids_with_label(corpus: &Corpus, label: u8) -> Vec<&str> {
    corpus
        .documents()
        .iter()
        .filter(|d| d.label == Some(label))
        .map(|d| d.id.as_str())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Source,
    Target,
}

/// A document of the pooled unlabeled data, identified by its domain side and id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PooledId {
    pub side: Side,
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnlabeledSplit {
    pub train_ids: BTreeSet<PooledId>,
    pub validation_ids: BTreeSet<PooledId>,
}

impl UnlabeledSplit {
    /// Resolves the id sets to documents: (train, validation), source documents first.
    pub fn materialize<'a>(
        &self,
        source: &'a Corpus,
        target: &'a Corpus,
    ) -> (Vec<&'a Document>, Vec<&'a Document>) {
        let pick = |ids: &BTreeSet<PooledId>| {
            let mut out = Vec::new();
            for (side, corpus) in [(Side::Source, source), (Side::Target, target)] {
                out.extend(corpus.documents().iter().filter(|d| {
                    ids.contains(&PooledId {
                        side,
                        id: d.id.clone(),
                    })
                }));
            }
            out
        };
        (pick(&self.train_ids), pick(&self.validation_ids))
    }
}

/// Splits each domain's unlabeled data independently at `ratio` (the validation
/// share) and pools the parts across domains.
pub fn split_unlabeled_holdout(
    source: &Corpus,
    target: &Corpus,
    ratio: f64,
    seed: u64,
) -> Result<UnlabeledSplit> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid(format!(
            "holdout ratio {ratio} not in (0, 1)"
        )));
    }
    let mut split = UnlabeledSplit {
        train_ids: BTreeSet::new(),
        validation_ids: BTreeSet::new(),
    };
    for (side, corpus) in [(Side::Source, source), (Side::Target, target)] {
        corpus.require_kind(CorpusKind::Unlabeled)?;
        if corpus.is_empty() {
            return Err(Error::invalid(format!(
                "unlabeled corpus {} is empty",
                corpus.domain_name
            )));
        }
        let mut ids: Vec<&str> = corpus.documents().iter().map(|d| d.id.as_str()).collect();
        let mut rng = rng_from_seed(derive_seed(seed, "unlabeled-holdout", &[side as u64]));
        ids.shuffle(&mut rng);
        let n_val = (ids.len() as f64 * ratio).round() as usize;
        let to_id = |id: &&str| PooledId {
            side,
            id: id.to_string(),
        };
        split.validation_ids.extend(ids[..n_val].iter().map(to_id));
        split.train_ids.extend(ids[n_val..].iter().map(to_id));
    }
    Ok(split)
}
