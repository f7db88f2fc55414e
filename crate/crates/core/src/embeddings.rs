//! Pivot embeddings for the frozen decoder: a skip-gram negative-sampling
//! trainer, the bigram rewrite that gives bigram pivots their own tokens, and
//! word2vec text-format IO.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dense::{dot, sigmoid, DenseMatrix};
use crate::error::{Error, Result};
use crate::features::{FeatureKey, FeatureSpace};
use crate::seed::{derive_seed, rng_from_seed, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    tokens: Vec<String>,
    vectors: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize) -> Self {
        EmbeddingTable {
            dimension,
            tokens: Vec::new(),
            vectors: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn insert(&mut self, token: String, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                context: "embedding vector",
                expected: self.dimension,
                actual: vector.len(),
            });
        }
        if self.index.contains_key(&token) {
            return Err(Error::invalid(format!(
                "duplicate embedding token {token:?}"
            )));
        }
        self.index.insert(token.clone(), self.tokens.len());
        self.tokens.push(token);
        self.vectors.push(vector);
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index.get(token).map(|&i| self.vectors[i].as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.tokens
            .iter()
            .zip(&self.vectors)
            .map(|(t, v)| (t.as_str(), v.as_slice()))
    }

    /// Writes the word2vec text format, in insertion order.
    pub fn write(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        let io = |e| Error::io(path, e);
        writeln!(w, "{} {}", self.len(), self.dimension).map_err(io)?;
        for (tok, vec) in self.iter() {
            write!(w, "{tok}").map_err(io)?;
            for v in vec {
                write!(w, " {v}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Loads the word2vec text format: a `<count> <dimension>` header followed by
/// one `<token> v1 .. vD` line per token.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = match lines.next() {
        Some(l) => l.map_err(|e| Error::io(path, e))?,
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "empty embedding file".into(),
            })
        }
    };
    let parse_err = |line, message: String| Error::Parse { line, message };
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (count, dim) = match fields.as_slice() {
        [c, d] => match (c.parse::<usize>(), d.parse::<usize>()) {
            (Ok(c), Ok(d)) if d > 0 => (c, d),
            _ => return Err(parse_err(1, format!("bad header {header:?}"))),
        },
        _ => return Err(parse_err(1, format!("bad header {header:?}"))),
    };
    let mut table = EmbeddingTable::new(dim);
    let mut lineno = 1;
    for line in lines {
        lineno += 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts.next().expect("non-empty line").to_owned();
        let values = parts
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| parse_err(lineno, format!("non-numeric value {v:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != dim {
            return Err(parse_err(
                lineno,
                format!("expected {dim} values, found {}", values.len()),
            ));
        }
        if table.get(&token).is_some() {
            return Err(parse_err(lineno, format!("duplicate token {token:?}")));
        }
        table.insert(token, values)?;
    }
    if table.len() != count {
        return Err(parse_err(
            1,
            format!("header declares {count} rows, file has {}", table.len()),
        ));
    }
    Ok(table)
}

/// Token standing for the bigram `(w1, w2)`.
pub fn fused_token(w1: &str, w2: &str) -> String {
    format!("{w1}-{w2}")
}

/// Inserts `w1-w2` between every adjacent pair that is a pivot bigram.
pub fn rewrite_bigrams(
    tokens: &[String],
    bigram_pivots: &HashSet<(String, String)>,
) -> Vec<String> {
    if bigram_pivots.is_empty() {
        return tokens.to_vec();
    }
    let mut out = Vec::with_capacity(tokens.len());
    for (i, tok) in tokens.iter().enumerate() {
        out.push(tok.clone());
        if let Some(next) = tokens.get(i + 1) {
            if bigram_pivots.contains(&(tok.clone(), next.clone())) {
                out.push(fused_token(tok, next));
            }
        }
    }
    out
}

/// Embedding-table token for a feature key.
pub fn embedding_token(key: &FeatureKey) -> String {
    match key {
        FeatureKey::Unigram(w) => w.clone(),
        FeatureKey::Bigram(a, b) => fused_token(a, b),
    }
}

/// Decoder matrix whose row `i` is the embedding of pivot `i`.
pub fn build_decoder(table: &EmbeddingTable, space: &FeatureSpace) -> Result<DenseMatrix> {
    let mut rows = Vec::with_capacity(space.num_pivots());
    let mut missing = Vec::new();
    for key in space.pivots() {
        match table.get(&embedding_token(key)) {
            Some(v) => rows.push(v.to_vec()),
            None => missing.push(key.display()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::invalid(format!(
            "pivots missing from embedding table: {}",
            missing.join(", ")
        )));
    }
    let data = rows.concat();
    DenseMatrix::from_row_major(space.num_pivots(), table.dimension(), data)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgnsConfig {
    pub dimension: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub min_count: usize,
    /// Initial rate, decayed linearly to 1e-4 of its value.
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dimension: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            min_count: 5,
            learning_rate: 0.025,
            seed: 0,
        }
    }
}

const NOISE_EXPONENT: f64 = 0.75;
const PROBE_PAIRS: usize = 2000;

/// Result of [`train_sgns_traced`]: the table and the negative-sampling
/// objective on a fixed probe set after each epoch.
#[derive(Debug, Clone)]
pub struct SgnsTrace {
    pub table: EmbeddingTable,
    pub epoch_objective: Vec<f64>,
}

pub fn train_sgns(corpus: &[Vec<String>], config: &SgnsConfig) -> Result<EmbeddingTable> {
    Ok(train_sgns_traced(corpus, config)?.table)
}

struct Probe {
    center: usize,
    context: usize,
    noise: Vec<usize>,
}

fn objective(input: &DenseMatrix, output: &DenseMatrix, probes: &[Probe]) -> f64 {
    let mut total = 0.0;
    for p in probes {
        let v = input.row(p.center);
        total -= sigmoid(dot(v, output.row(p.context))).max(1e-300).ln();
        for &n in &p.noise {
            total -= sigmoid(-dot(v, output.row(n))).max(1e-300).ln();
        }
    }
    total / probes.len().max(1) as f64
}

/// Skip-gram with negative sampling, single-threaded and seeded.
pub fn train_sgns_traced(corpus: &[Vec<String>], config: &SgnsConfig) -> Result<SgnsTrace> {
    if config.dimension == 0
        || config.window == 0
        || config.negatives == 0
        || config.epochs == 0
        || config.min_count == 0
    {
        return Err(Error::invalid("SGNS counts must all be at least 1"));
    }
    if !(config.learning_rate > 0.0) {
        return Err(Error::invalid("SGNS learning rate must be positive"));
    }
    if corpus.iter().all(Vec::is_empty) {
        return Err(Error::invalid("SGNS corpus is empty"));
    }

    let mut freq: HashMap<&str, usize> = HashMap::new();
    for sent in corpus {
        for t in sent {
            *freq.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut vocab: Vec<(&str, usize)> = freq
        .into_iter()
        .filter(|&(_, c)| c >= config.min_count)
        .collect();
    if vocab.is_empty() {
        return Err(Error::invalid(format!(
            "no token reaches min_count {}",
            config.min_count
        )));
    }
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let ids: HashMap<&str, usize> = vocab
        .iter()
        .enumerate()
        .map(|(i, (t, _))| (*t, i))
        .collect();
    let sentences: Vec<Vec<usize>> = corpus
        .iter()
        .map(|s| {
            s.iter()
                .filter_map(|t| ids.get(t.as_str()).copied())
                .collect()
        })
        .collect();
    let noise = WeightedIndex::new(vocab.iter().map(|(_, c)| (*c as f64).powf(NOISE_EXPONENT)))
        .map_err(|e| Error::invalid(format!("noise distribution: {e}")))?;

    let dim = config.dimension;
    let n_vocab = vocab.len();
    let mut rng = rng_from_seed(derive_seed(config.seed, "sgns", &[]));
    let half = 0.5 / dim as f64;
    let mut input = DenseMatrix::from_row_major(
        n_vocab,
        dim,
        (0..n_vocab * dim)
            .map(|_| rng.random_range(-half..half))
            .collect(),
    )?;
    let mut output = DenseMatrix::zeros(n_vocab, dim);

    let probes = sample_probes(
        &sentences,
        config,
        &noise,
        derive_seed(config.seed, "sgns-probe", &[]),
    );

    let total_tokens: usize = sentences.iter().map(Vec::len).sum();
    let total_work = (total_tokens * config.epochs).max(1) as f64;
    let min_lr = config.learning_rate * 1e-4;
    let mut processed = 0usize;
    let mut grad_in = vec![0.0; dim];
    let mut epoch_objective = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        for sent in &sentences {
            for (pos, &center) in sent.iter().enumerate() {
                let lr = (config.learning_rate * (1.0 - processed as f64 / total_work)).max(min_lr);
                processed += 1;
                let lo = pos.saturating_sub(config.window);
                let hi = (pos + config.window + 1).min(sent.len());
                for (ctx_pos, &context) in sent.iter().enumerate().take(hi).skip(lo) {
                    if ctx_pos == pos {
                        continue;
                    }
                    grad_in.iter_mut().for_each(|g| *g = 0.0);
                    sgns_update(&input, &mut output, center, context, 1.0, lr, &mut grad_in);
                    for _ in 0..config.negatives {
                        let neg = noise.sample(&mut rng);
                        if neg == context {
                            continue;
                        }
                        sgns_update(&input, &mut output, center, neg, 0.0, lr, &mut grad_in);
                    }
                    for (w, g) in input.row_mut(center).iter_mut().zip(&grad_in) {
                        *w += g;
                    }
                }
            }
        }
        epoch_objective.push(objective(&input, &output, &probes));
    }

    let mut table = EmbeddingTable::new(dim);
    for (i, (tok, _)) in vocab.iter().enumerate() {
        table.insert((*tok).to_owned(), input.row(i).to_vec())?;
    }
    Ok(SgnsTrace {
        table,
        epoch_objective,
    })
}

#[inline]
fn sgns_update(
    input: &DenseMatrix,
    output: &mut DenseMatrix,
    center: usize,
    target: usize,
    label: f64,
    lr: f64,
    grad_in: &mut [f64],
) {
    let v = input.row(center);
    let u = output.row_mut(target);
    let g = lr * (label - sigmoid(dot(v, u)));
    for ((gi, ui), vi) in grad_in.iter_mut().zip(u.iter_mut()).zip(v) {
        *gi += g * *ui;
        *ui += g * vi;
    }
}

fn sample_probes(
    sentences: &[Vec<usize>],
    config: &SgnsConfig,
    noise: &WeightedIndex<f64>,
    seed: u64,
) -> Vec<Probe> {
    let mut rng: Rng = rng_from_seed(seed);
    let usable: Vec<&Vec<usize>> = sentences.iter().filter(|s| s.len() >= 2).collect();
    if usable.is_empty() {
        return Vec::new();
    }
    (0..PROBE_PAIRS)
        .map(|_| {
            let s = usable[rng.random_range(0..usable.len())];
            let pos = rng.random_range(0..s.len());
            let lo = pos.saturating_sub(config.window);
            let hi = (pos + config.window + 1).min(s.len());
            let contexts: Vec<usize> = (lo..hi).filter(|&c| c != pos).collect();
            let ctx = contexts[rng.random_range(0..contexts.len())];
            Probe {
                center: s[pos],
                context: s[ctx],
                noise: (0..config.negatives)
                    .map(|_| noise.sample(&mut rng))
                    .collect(),
            }
        })
        .collect()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}
