//! Feature space over unigrams and bigrams: frequency counting, mutual
//! information ranking of pivot candidates, and binary vectorization.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{extract_ngrams, Corpus, CorpusKind, Document};
use crate::error::{Error, Result};

pub const DEFAULT_PIVOT_MIN_COUNT: u64 = 10;
pub const DEFAULT_NONPIVOT_MIN_COUNT: u64 = 10;

/// A unigram or an adjacent-token bigram.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureKey {
    Unigram(String),
    Bigram(String, String),
}

impl FeatureKey {
    pub fn unigram(w: &str) -> Self {
        FeatureKey::Unigram(w.to_owned())
    }

    pub fn bigram(w1: &str, w2: &str) -> Self {
        FeatureKey::Bigram(w1.to_owned(), w2.to_owned())
    }

    pub fn tokens(&self) -> Vec<&str> {
        match self {
            FeatureKey::Unigram(w) => vec![w],
            FeatureKey::Bigram(a, b) => vec![a, b],
        }
    }

    /// Display form: tokens joined by a single space.
    pub fn display(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for FeatureKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureKey::Unigram(w) => f.write_str(w),
            FeatureKey::Bigram(a, b) => write!(f, "{a} {b}"),
        }
    }
}

impl Serialize for FeatureKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.tokens().serialize(s)
    }
}

impl<'de> Deserialize<'de> for FeatureKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let toks = Vec::<String>::deserialize(d)?;
        let bad = |t: &String| t.is_empty() || t.contains(' ');
        match toks.as_slice() {
            [w] if !bad(w) => Ok(FeatureKey::Unigram(w.clone())),
            [a, b] if !bad(a) && !bad(b) => Ok(FeatureKey::Bigram(a.clone(), b.clone())),
            _ => Err(serde::de::Error::custom(
                "feature key must be 1 or 2 non-empty tokens without spaces",
            )),
        }
    }
}

/// Sorted set of active indices of a binary vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseBinaryVector {
    dimension: usize,
    active: Vec<usize>,
}

impl SparseBinaryVector {
    /// Sorts and deduplicates `indices`; fails if any index is out of range.
    pub fn new(dimension: usize, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&last) = indices.last() {
            if last >= dimension {
                return Err(Error::invalid(format!(
                    "active index {last} out of range for dimension {dimension}"
                )));
            }
        }
        Ok(SparseBinaryVector {
            dimension,
            active: indices,
        })
    }

    pub fn empty(dimension: usize) -> Self {
        SparseBinaryVector {
            dimension,
            active: Vec::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn nnz(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.active.binary_search(&i).is_ok()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dimension];
        for &i in &self.active {
            v[i] = 1.0;
        }
        v
    }
}

/// Occurrence counts of every n-gram in the source and target unlabeled data.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CountTable {
    counts: HashMap<FeatureKey, (u64, u64)>,
}

impl CountTable {
    pub fn get(&self, key: &FeatureKey) -> (u64, u64) {
        self.counts.get(key).copied().unwrap_or((0, 0))
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FeatureKey, (u64, u64))> {
        self.counts.iter().map(|(k, &v)| (k, v))
    }
}

/// Counts every n-gram occurrence (not document frequency) in both unlabeled corpora.
pub fn count_features(source_unlabeled: &Corpus, target_unlabeled: &Corpus) -> Result<CountTable> {
    let mut counts: HashMap<FeatureKey, (u64, u64)> = HashMap::new();
    for (slot, corpus) in [source_unlabeled, target_unlabeled].into_iter().enumerate() {
        corpus.require_kind(CorpusKind::Unlabeled)?;
        if corpus.is_empty() {
            return Err(Error::invalid(format!(
                "unlabeled corpus {} is empty",
                corpus.domain_name
            )));
        }
        for doc in corpus.documents() {
            for key in extract_ngrams(&doc.tokens) {
                let entry = counts.entry(key).or_default();
                if slot == 0 {
                    entry.0 += 1;
                } else {
                    entry.1 += 1;
                }
            }
        }
    }
    Ok(CountTable { counts })
}

/// Mutual information in bits between two binary sequences, from empirical
/// joint frequencies with `0 log 0 = 0`.
pub fn mutual_information(feature_presence: &[u8], labels: &[u8]) -> Result<f64> {
    if feature_presence.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "mutual information inputs",
            expected: feature_presence.len(),
            actual: labels.len(),
        });
    }
    if feature_presence.is_empty() {
        return Err(Error::invalid("mutual information of empty sequences"));
    }
    let mut joint = [[0u64; 2]; 2];
    for (&a, &y) in feature_presence.iter().zip(labels) {
        if a > 1 || y > 1 {
            return Err(Error::invalid("mutual information inputs must be 0/1"));
        }
        joint[a as usize][y as usize] += 1;
    }
    Ok(mi_from_joint(&joint))
}

/// MI in bits of a 2x2 contingency table `joint[a][y]`.
pub(crate) fn mi_from_joint(joint: &[[u64; 2]; 2]) -> f64 {
    let n = (joint[0][0] + joint[0][1] + joint[1][0] + joint[1][1]) as f64;
    let row = [joint[0][0] + joint[0][1], joint[1][0] + joint[1][1]];
    let col = [joint[0][0] + joint[1][0], joint[0][1] + joint[1][1]];
    let mut mi = 0.0;
    for a in 0..2 {
        for y in 0..2 {
            let nay = joint[a][y];
            if nay == 0 {
                continue;
            }
            // p(a,y) / (p(a) p(y)) = n(a,y) n / (n(a) n(y))
            let ratio = (nay as f64 * n) / (row[a] as f64 * col[y] as f64);
            mi += nay as f64 / n * ratio.log2();
        }
    }
    mi.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Pivot(usize),
    NonPivot(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub key: FeatureKey,
    pub source_count: u64,
    pub target_count: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureSpaceFile {
    format_version: u32,
    features: Vec<FeatureEntry>,
    pivot_indices: Vec<usize>,
    pivot_mi: Vec<f64>,
    nonpivot_indices: Vec<usize>,
}

/// Retained n-gram vocabulary partitioned into pivots and non-pivots.
///
/// Features are stored sorted by display form. `pivot_indices` lists feature
/// indices in descending MI order; position `p` in that list is pivot axis `p`.
/// `nonpivot_indices` is ascending; position `q` is non-pivot axis `q`.
#[derive(Debug, Clone)]
pub struct FeatureSpace {
    features: Vec<FeatureEntry>,
    pivot_indices: Vec<usize>,
    pivot_mi: Vec<f64>,
    nonpivot_indices: Vec<usize>,
    lookup: HashMap<FeatureKey, usize>,
    roles: Vec<Role>,
}

impl PartialEq for FeatureSpace {
    fn eq(&self, other: &Self) -> bool {
        self.features == other.features
            && self.pivot_indices == other.pivot_indices
            && self.pivot_mi == other.pivot_mi
            && self.nonpivot_indices == other.nonpivot_indices
    }
}

impl FeatureSpace {
    fn build(
        features: Vec<FeatureEntry>,
        pivot_indices: Vec<usize>,
        pivot_mi: Vec<f64>,
        nonpivot_indices: Vec<usize>,
    ) -> Result<Self> {
        let n = features.len();
        if pivot_mi.len() != pivot_indices.len() {
            return Err(Error::invalid(
                "pivot MI list length differs from pivot list",
            ));
        }
        let mut roles = vec![None; n];
        for (p, &i) in pivot_indices.iter().enumerate() {
            match roles.get_mut(i) {
                Some(slot @ None) => *slot = Some(Role::Pivot(p)),
                _ => return Err(Error::invalid(format!("bad or repeated pivot index {i}"))),
            }
        }
        for (q, &i) in nonpivot_indices.iter().enumerate() {
            match roles.get_mut(i) {
                Some(slot @ None) => *slot = Some(Role::NonPivot(q)),
                _ => {
                    return Err(Error::invalid(format!(
                        "bad or repeated non-pivot index {i}"
                    )))
                }
            }
        }
        let roles = roles
            .into_iter()
            .enumerate()
            .map(|(i, r)| r.ok_or_else(|| Error::invalid(format!("feature {i} is unassigned"))))
            .collect::<Result<Vec<_>>>()?;
        let mut lookup = HashMap::with_capacity(n);
        for (i, f) in features.iter().enumerate() {
            if lookup.insert(f.key.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate feature {}", f.key)));
            }
        }
        Ok(FeatureSpace {
            features,
            pivot_indices,
            pivot_mi,
            nonpivot_indices,
            lookup,
            roles,
        })
    }

    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    pub fn num_pivots(&self) -> usize {
        self.pivot_indices.len()
    }

    pub fn num_nonpivots(&self) -> usize {
        self.nonpivot_indices.len()
    }

    pub fn features(&self) -> &[FeatureEntry] {
        &self.features
    }

    pub fn pivot_indices(&self) -> &[usize] {
        &self.pivot_indices
    }

    pub fn nonpivot_indices(&self) -> &[usize] {
        &self.nonpivot_indices
    }

    pub fn pivot_mi(&self) -> &[f64] {
        &self.pivot_mi
    }

    /// Pivot keys in pivot-axis order.
    pub fn pivots(&self) -> impl Iterator<Item = &FeatureKey> {
        self.pivot_indices.iter().map(|&i| &self.features[i].key)
    }

    pub fn index_of(&self, key: &FeatureKey) -> Option<usize> {
        self.lookup.get(key).copied()
    }

    pub fn role(&self, index: usize) -> Role {
        self.roles[index]
    }

    pub fn to_json(&self) -> Result<String> {
        let file = FeatureSpaceFile {
            format_version: 1,
            features: self.features.clone(),
            pivot_indices: self.pivot_indices.clone(),
            pivot_mi: self.pivot_mi.clone(),
            nonpivot_indices: self.nonpivot_indices.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: FeatureSpaceFile = serde_json::from_str(s)?;
        if file.format_version != 1 {
            return Err(Error::invalid(format!(
                "unsupported feature space format_version {}",
                file.format_version
            )));
        }
        FeatureSpace::build(
            file.features,
            file.pivot_indices,
            file.pivot_mi,
            file.nonpivot_indices,
        )
    }
}

/// Pivot candidates ranked by MI on a labeled set, plus the retained vocabulary.
///
/// Ranking once and then cutting at several pivot counts is equivalent to
/// calling [`select_pivots`] for each count.
#[derive(Debug, Clone)]
pub struct PivotRanking {
    /// Retained features (frequent in at least one domain), sorted by display form.
    retained: Vec<FeatureEntry>,
    /// (retained index, MI) in rank order.
    ranked: Vec<(usize, f64)>,
}

impl PivotRanking {
    pub fn new(
        counts: &CountTable,
        labeled_train: &[&Document],
        pivot_min_count: u64,
        nonpivot_min_count: u64,
    ) -> Result<Self> {
        if labeled_train.is_empty() {
            return Err(Error::invalid(
                "pivot selection needs labeled training documents",
            ));
        }
        let mut retained: Vec<(String, FeatureEntry)> = counts
            .iter()
            .filter(|(_, (s, t))| {
                let pivot_ok = *s >= pivot_min_count && *t >= pivot_min_count;
                let nonpivot_ok = *s >= nonpivot_min_count || *t >= nonpivot_min_count;
                pivot_ok || nonpivot_ok
            })
            .map(|(k, (s, t))| {
                (
                    k.display(),
                    FeatureEntry {
                        key: k.clone(),
                        source_count: s,
                        target_count: t,
                    },
                )
            })
            .collect();
        retained.sort_by(|a, b| a.0.cmp(&b.0));

        let candidates: HashMap<&FeatureKey, usize> = retained
            .iter()
            .enumerate()
            .filter(|(_, (_, e))| {
                e.source_count >= pivot_min_count && e.target_count >= pivot_min_count
            })
            .map(|(i, (_, e))| (&e.key, i))
            .collect();

        // Per candidate: (documents containing it, of which positive).
        let mut present: HashMap<usize, (u64, u64)> = HashMap::new();
        let mut n_pos = 0u64;
        for doc in labeled_train {
            let label = doc.label.ok_or_else(|| {
                Error::invalid(format!("document {} in labeled set has no label", doc.id))
            })?;
            n_pos += u64::from(label);
            let distinct: HashSet<usize> = extract_ngrams(&doc.tokens)
                .iter()
                .filter_map(|k| candidates.get(k).copied())
                .collect();
            for i in distinct {
                let e = present.entry(i).or_default();
                e.0 += 1;
                e.1 += u64::from(label);
            }
        }
        let n = labeled_train.len() as u64;
        let n_neg = n - n_pos;

        let mut ranked: Vec<(usize, f64)> = candidates
            .values()
            .map(|&i| {
                let (docs_with, pos_with) = present.get(&i).copied().unwrap_or((0, 0));
                let joint = [
                    [n_neg - (docs_with - pos_with), n_pos - pos_with],
                    [docs_with - pos_with, pos_with],
                ];
                (i, mi_from_joint(&joint))
            })
            .collect();
        let total = |i: usize| retained[i].1.source_count + retained[i].1.target_count;
        ranked.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(Ordering::Equal)
                .then_with(|| total(b.0).cmp(&total(a.0)))
                .then_with(|| retained[a.0].0.cmp(&retained[b.0].0))
        });

        Ok(PivotRanking {
            retained: retained.into_iter().map(|(_, e)| e).collect(),
            ranked,
        })
    }

    pub fn num_candidates(&self) -> usize {
        self.ranked.len()
    }

    /// Ranked candidates with their MI scores.
    pub fn ranked(&self) -> impl Iterator<Item = (&FeatureKey, f64)> {
        self.ranked
            .iter()
            .map(|&(i, mi)| (&self.retained[i].key, mi))
    }

    /// The retained vocabulary with no pivots: every feature is a non-pivot.
    pub fn vocabulary_space(&self) -> Result<FeatureSpace> {
        FeatureSpace::build(
            self.retained.clone(),
            Vec::new(),
            Vec::new(),
            (0..self.retained.len()).collect(),
        )
    }

    /// Feature space with the top `num_pivots` candidates as pivots.
    pub fn space(&self, num_pivots: usize) -> Result<FeatureSpace> {
        if num_pivots == 0 {
            return Err(Error::invalid("num_pivots must be at least 1"));
        }
        if num_pivots > self.ranked.len() {
            return Err(Error::invalid(format!(
                "requested {num_pivots} pivots but only {} candidates are available",
                self.ranked.len()
            )));
        }
        let top = &self.ranked[..num_pivots];
        let is_pivot: HashSet<usize> = top.iter().map(|&(i, _)| i).collect();
        let nonpivots = (0..self.retained.len())
            .filter(|i| !is_pivot.contains(i))
            .collect();
        FeatureSpace::build(
            self.retained.clone(),
            top.iter().map(|&(i, _)| i).collect(),
            top.iter().map(|&(_, mi)| mi).collect(),
            nonpivots,
        )
    }
}

/// Selects the `num_pivots` highest-MI features among those frequent in both
/// domains; every other feature frequent in at least one domain is a non-pivot.
pub fn select_pivots(
    counts: &CountTable,
    labeled_train: &[&Document],
    num_pivots: usize,
    pivot_min_count: u64,
    nonpivot_min_count: u64,
) -> Result<FeatureSpace> {
    PivotRanking::new(counts, labeled_train, pivot_min_count, nonpivot_min_count)?.space(num_pivots)
}

/// Binary views of one document over a feature space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vectorized {
    pub x_p: SparseBinaryVector,
    pub x_np: SparseBinaryVector,
    pub x_full: SparseBinaryVector,
}

pub fn vectorize(document: &Document, space: &FeatureSpace) -> Vectorized {
    let mut full = Vec::new();
    let mut piv = Vec::new();
    let mut non = Vec::new();
    for key in extract_ngrams(&document.tokens) {
        if let Some(i) = space.index_of(&key) {
            full.push(i);
            match space.role(i) {
                Role::Pivot(p) => piv.push(p),
                Role::NonPivot(q) => non.push(q),
            }
        }
    }
    // Indices come from the space itself, so they are always in range.
    let mk = |dim, idx| SparseBinaryVector::new(dim, idx).expect("index within space");
    Vectorized {
        x_p: mk(space.num_pivots(), piv),
        x_np: mk(space.num_nonpivots(), non),
        x_full: mk(space.num_features(), full),
    }
}
