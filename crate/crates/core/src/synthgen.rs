//! Seeded two-domain sentiment corpora with controllable domain shift.
//!
//! Every document has a polarity. It carries filler words, shared polarity
//! words (which become pivots) and polarity words specific to its domain
//! (which become non-pivots). Domain-specific words of the two domains are
//! disjoint, so a source-trained classifier can only transfer through the
//! shared words unless a representation links the two domain vocabularies.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, write_corpus, Corpus, CorpusKind, Document};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolarityVocab {
    pub positive: Vec<String>,
    pub negative: Vec<String>,
}

impl PolarityVocab {
    fn generated(prefix: &str, n: usize) -> Self {
        PolarityVocab {
            positive: (0..n).map(|i| format!("{prefix}pos{i}")).collect(),
            negative: (0..n).map(|i| format!("{prefix}neg{i}")).collect(),
        }
    }

    fn for_polarity(&self, positive: bool) -> &[String] {
        if positive {
            &self.positive
        } else {
            &self.negative
        }
    }

    fn words(&self) -> impl Iterator<Item = &String> {
        self.positive.iter().chain(&self.negative)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub source_name: String,
    pub target_name: String,
    pub shared_sentiment_vocab: PolarityVocab,
    pub source_sentiment_vocab: PolarityVocab,
    pub target_sentiment_vocab: PolarityVocab,
    pub filler_vocab: Vec<String>,
    /// Inclusive range of filler words per document.
    pub min_filler_words: usize,
    pub max_filler_words: usize,
    /// Number of independent chances per document to emit each kind of polarity word.
    pub sentiment_slots: usize,
    pub pivot_emission_prob: f64,
    pub domain_word_emission_prob: f64,
    pub source_labeled_size: usize,
    pub source_unlabeled_size: usize,
    pub target_unlabeled_size: usize,
    pub target_test_size: usize,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            source_name: "source".into(),
            target_name: "target".into(),
            shared_sentiment_vocab: PolarityVocab::generated("shared", 10),
            source_sentiment_vocab: PolarityVocab::generated("src", 10),
            target_sentiment_vocab: PolarityVocab::generated("tgt", 10),
            filler_vocab: (0..150).map(|i| format!("w{i}")).collect(),
            min_filler_words: 10,
            max_filler_words: 20,
            sentiment_slots: 3,
            pivot_emission_prob: 0.3,
            domain_word_emission_prob: 0.6,
            source_labeled_size: 2000,
            source_unlabeled_size: 2000,
            target_unlabeled_size: 2000,
            target_test_size: 1000,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let groups: [(&str, Vec<&String>); 4] = [
            (
                "shared sentiment",
                self.shared_sentiment_vocab.words().collect(),
            ),
            (
                "source sentiment",
                self.source_sentiment_vocab.words().collect(),
            ),
            (
                "target sentiment",
                self.target_sentiment_vocab.words().collect(),
            ),
            ("filler", self.filler_vocab.iter().collect()),
        ];
        let mut owner: std::collections::HashMap<&str, &str> = Default::default();
        for (name, words) in &groups {
            for w in words {
                if tokenize(w) != vec![(*w).clone()] {
                    return Err(Error::invalid(format!(
                        "vocabulary word {w:?} is not a single lowercase alphanumeric token"
                    )));
                }
                if let Some(prev) = owner.insert(w.as_str(), name) {
                    return Err(Error::invalid(format!(
                        "word {w:?} appears in both the {prev} and {name} vocabularies"
                    )));
                }
            }
        }
        for vocab in [
            &self.shared_sentiment_vocab,
            &self.source_sentiment_vocab,
            &self.target_sentiment_vocab,
        ] {
            if vocab.positive.is_empty() || vocab.negative.is_empty() {
                return Err(Error::invalid(
                    "every sentiment vocabulary needs words of both polarities",
                ));
            }
        }
        if self.filler_vocab.is_empty() {
            return Err(Error::invalid("filler vocabulary is empty"));
        }
        if self.min_filler_words > self.max_filler_words {
            return Err(Error::invalid("min_filler_words exceeds max_filler_words"));
        }
        for (name, p) in [
            ("pivot_emission_prob", self.pivot_emission_prob),
            ("domain_word_emission_prob", self.domain_word_emission_prob),
        ] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::invalid(format!("{name} = {p} is not in (0, 1)")));
            }
        }
        if self.source_labeled_size % 2 != 0 || self.target_test_size % 2 != 0 {
            return Err(Error::invalid(
                "labeled corpus sizes must be even for exact balance",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpora {
    pub source_labeled: Corpus,
    pub source_unlabeled: Corpus,
    pub target_unlabeled: Corpus,
    pub target_test: Corpus,
}

pub const SOURCE_LABELED_FILE: &str = "source_labeled.jsonl";
pub const SOURCE_UNLABELED_FILE: &str = "source_unlabeled.jsonl";
pub const TARGET_UNLABELED_FILE: &str = "target_unlabeled.jsonl";
pub const TARGET_TEST_FILE: &str = "target_test.jsonl";

impl SyntheticCorpora {
    /// Writes the four corpora as JSON lines under `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_corpus(&self.source_labeled, &dir.join(SOURCE_LABELED_FILE))?;
        write_corpus(&self.source_unlabeled, &dir.join(SOURCE_UNLABELED_FILE))?;
        write_corpus(&self.target_unlabeled, &dir.join(TARGET_UNLABELED_FILE))?;
        write_corpus(&self.target_test, &dir.join(TARGET_TEST_FILE))
    }
}

pub fn generate(config: &GeneratorConfig) -> Result<SyntheticCorpora> {
    config.validate()?;
    let src = &config.source_sentiment_vocab;
    let tgt = &config.target_sentiment_vocab;
    let make = |tag: &str, domain: &PolarityVocab, name: &str, n: usize, labeled: bool| {
        let mut rng = rng_from_seed(derive_seed(config.seed, tag, &[]));
        // Exactly half of every corpus is positive; order is shuffled.
        let mut polarities: Vec<bool> = (0..n).map(|i| i < n / 2).collect();
        if n % 2 == 1 {
            polarities[n - 1] = rng.random_bool(0.5);
        }
        polarities.shuffle(&mut rng);
        let docs = polarities
            .into_iter()
            .enumerate()
            .map(|(i, pos)| {
                let text = document_text(config, domain, pos, &mut rng);
                let label = labeled.then_some(u8::from(pos));
                Document::from_text(format!("{tag}-{i}"), &text, label)
            })
            .collect();
        let kind = if labeled {
            CorpusKind::Labeled
        } else {
            CorpusKind::Unlabeled
        };
        Corpus::new(name, kind, docs)
    };
    Ok(SyntheticCorpora {
        source_labeled: make(
            "sl",
            src,
            &config.source_name,
            config.source_labeled_size,
            true,
        )?,
        source_unlabeled: make(
            "su",
            src,
            &config.source_name,
            config.source_unlabeled_size,
            false,
        )?,
        target_unlabeled: make(
            "tu",
            tgt,
            &config.target_name,
            config.target_unlabeled_size,
            false,
        )?,
        target_test: make(
            "tt",
            tgt,
            &config.target_name,
            config.target_test_size,
            true,
        )?,
    })
}

fn document_text(
    config: &GeneratorConfig,
    domain: &PolarityVocab,
    positive: bool,
    rng: &mut Rng,
) -> String {
    let n_fill = rng.random_range(config.min_filler_words..=config.max_filler_words);
    let mut words: Vec<&str> = (0..n_fill)
        .map(|_| config.filler_vocab.choose(rng).expect("non-empty").as_str())
        .collect();
    let shared = config.shared_sentiment_vocab.for_polarity(positive);
    let own = domain.for_polarity(positive);
    for _ in 0..config.sentiment_slots {
        if rng.random_bool(config.pivot_emission_prob) {
            words.push(shared.choose(rng).expect("non-empty"));
        }
        if rng.random_bool(config.domain_word_emission_prob) {
            words.push(own.choose(rng).expect("non-empty"));
        }
    }
    words.shuffle(rng);
    words.join(" ")
}

/// Words of `vocab` that occur in any document of `corpus`.
pub fn vocabulary_hits<'a>(corpus: &Corpus, vocab: &'a PolarityVocab) -> HashSet<&'a str> {
    let words: HashSet<&str> = vocab.words().map(String::as_str).collect();
    let mut hits = HashSet::new();
    for doc in corpus.documents() {
        for t in &doc.tokens {
            if let Some(w) = words.get(t.as_str()) {
                hits.insert(*w);
            }
        }
    }
    hits
}
