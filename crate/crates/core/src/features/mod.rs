//! Heterogeneous path/opcode graph.
//!
//! Node order is every path first, then every vocabulary token. Opcode pairs
//! are weighted by positive pointwise mutual information over sliding windows,
//! path/opcode pairs by TF-IDF, and every node carries a self-loop of weight 1.
//! Path/path pairs never get an edge. All logarithms are natural.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::paths::DataPath;

mod bundle;
mod split;

pub use bundle::{
    dedup_corpus, export_dataset, load_bundle, Bundle, BundleMode, ExportOptions, PathRecord, FORMAT_VERSION,
};
pub use split::{oversample, stratified_split, Oversample, Split};

pub const DEFAULT_WINDOW: usize = 20;
pub const LOG_BASE: &str = "e";

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("corpus has no paths")]
    EmptyCorpus,
    #[error("window must cover at least 2 tokens, got {0}")]
    BadWindow(usize),
    #[error("token `{0}` is not in the vocabulary")]
    UnknownToken(String),
    #[error("entry ({row}, {col}) lies outside {n_path} paths + {n_opcode} opcodes")]
    IndexClash { row: usize, col: usize, n_path: usize, n_opcode: usize },
    #[error("{count} paths carry no label (first: {first})")]
    MissingLabels { count: usize, first: String },
    #[error("split ratio must lie strictly between 0 and 1, got {0}")]
    BadRatio(f64),
    #[error("bundle: {0}")]
    Bundle(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl AsRef<[String]> for DataPath {
    fn as_ref(&self) -> &[String] {
        &self.tokens
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_tokens<I: IntoIterator<Item = String>>(tokens: I) -> Vocabulary {
        let mut vocab = Vocabulary::default();
        for tok in tokens {
            vocab.insert(tok);
        }
        vocab
    }

    fn insert(&mut self, tok: String) {
        if !self.index.contains_key(&tok) {
            self.index.insert(tok.clone(), self.tokens.len());
            self.tokens.push(tok);
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn ordinal(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    fn ordinals(&self, doc: &[String]) -> Result<Vec<usize>, FeatureError> {
        doc.iter().map(|t| self.ordinal(t).ok_or_else(|| FeatureError::UnknownToken(t.clone()))).collect()
    }
}

/// Tokens in order of first appearance across the corpus.
pub fn build_vocab<D: AsRef<[String]>>(corpus: &[D]) -> Result<Vocabulary, FeatureError> {
    if corpus.is_empty() {
        return Err(FeatureError::EmptyCorpus);
    }
    Ok(Vocabulary::from_tokens(corpus.iter().flat_map(|d| d.as_ref().iter().cloned())))
}

/// Sparse weights keyed by index pair.
pub type SparseWeights = BTreeMap<(usize, usize), f64>;

#[derive(Debug, Default)]
struct WindowCounts {
    windows: u64,
    single: HashMap<usize, u64>,
    pair: HashMap<(usize, usize), u64>,
}

impl WindowCounts {
    fn merge(mut self, other: WindowCounts) -> WindowCounts {
        self.windows += other.windows;
        for (k, v) in other.single {
            *self.single.entry(k).or_default() += v;
        }
        for (k, v) in other.pair {
            *self.pair.entry(k).or_default() += v;
        }
        self
    }

    fn add_window(&mut self, window: &[usize]) {
        let mut distinct = window.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        self.windows += 1;
        for (n, &a) in distinct.iter().enumerate() {
            *self.single.entry(a).or_default() += 1;
            for &b in &distinct[n + 1..] {
                *self.pair.entry((a, b)).or_default() += 1;
            }
        }
    }
}

/// Sliding windows over one document; a document shorter than the window
/// is a single window.
fn count_windows(doc: &[usize], window: usize) -> WindowCounts {
    let mut counts = WindowCounts::default();
    if doc.is_empty() {
        return counts;
    }
    if doc.len() <= window {
        counts.add_window(doc);
    } else {
        for w in doc.windows(window) {
            counts.add_window(w);
        }
    }
    counts
}

/// Opcode/opcode weights keyed `(a, b)` with `a < b` over vocabulary
/// ordinals. Pairs with non-positive PMI are omitted.
pub fn compute_ppmi<D: AsRef<[String]> + Sync>(
    corpus: &[D],
    vocab: &Vocabulary,
    window: usize,
) -> Result<SparseWeights, FeatureError> {
    if window < 2 {
        return Err(FeatureError::BadWindow(window));
    }
    let counts = corpus
        .par_iter()
        .map(|doc| vocab.ordinals(doc.as_ref()).map(|d| count_windows(&d, window)))
        .try_reduce(WindowCounts::default, |a, b| Ok(a.merge(b)))?;

    let total = counts.windows as f64;
    let mut out = SparseWeights::new();
    for (&(a, b), &both) in &counts.pair {
        let pmi = (both as f64 * total / (counts.single[&a] as f64 * counts.single[&b] as f64)).ln();
        if pmi > 0.0 {
            out.insert((a, b), pmi);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TfIdfVariant {
    /// `tf · ln(N / df)` with the raw count as `tf`.
    #[default]
    Raw,
    /// `(1 + ln tf) · ln(N / df)`.
    Sublinear,
}

impl TfIdfVariant {
    pub fn name(self) -> &'static str {
        match self {
            TfIdfVariant::Raw => "raw",
            TfIdfVariant::Sublinear => "sublinear",
        }
    }
}

/// Path/opcode weights keyed `(path, ordinal)`. Zero weights are omitted.
pub fn compute_tfidf<D: AsRef<[String]> + Sync>(
    corpus: &[D],
    vocab: &Vocabulary,
    variant: TfIdfVariant,
) -> Result<SparseWeights, FeatureError> {
    if corpus.is_empty() {
        return Err(FeatureError::EmptyCorpus);
    }
    let tfs: Vec<BTreeMap<usize, u64>> = corpus
        .par_iter()
        .map(|doc| {
            let mut tf = BTreeMap::new();
            for o in vocab.ordinals(doc.as_ref())? {
                *tf.entry(o).or_default() += 1;
            }
            Ok(tf)
        })
        .collect::<Result<_, FeatureError>>()?;

    let mut df: HashMap<usize, u64> = HashMap::new();
    for tf in &tfs {
        for &o in tf.keys() {
            *df.entry(o).or_default() += 1;
        }
    }
    let n = corpus.len() as f64;
    let mut out = SparseWeights::new();
    for (p, tf) in tfs.iter().enumerate() {
        for (&o, &count) in tf {
            let idf = (n / df[&o] as f64).ln();
            let tf = match variant {
                TfIdfVariant::Raw => count as f64,
                TfIdfVariant::Sublinear => 1.0 + (count as f64).ln(),
            };
            let w = tf * idf;
            if w > 0.0 {
                out.insert((p, o), w);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphEntry {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Symmetric adjacency stored as its upper triangle (`i <= j`), sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct HeteroGraph {
    pub n_path: usize,
    pub n_opcode: usize,
    entries: Vec<GraphEntry>,
}

impl HeteroGraph {
    pub fn size(&self) -> usize {
        self.n_path + self.n_opcode
    }

    pub fn entries(&self) -> &[GraphEntry] {
        &self.entries
    }

    pub fn opcode_node(&self, ordinal: usize) -> usize {
        self.n_path + ordinal
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let key = (i.min(j), i.max(j));
        self.entries.binary_search_by(|e| (e.i, e.j).cmp(&key)).map(|k| self.entries[k].weight).unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.size();
        let mut m = vec![vec![0.0; n]; n];
        for e in &self.entries {
            m[e.i][e.j] = e.weight;
            m[e.j][e.i] = e.weight;
        }
        m
    }

    /// Text form: one header line, then `i j weight` per stored entry.
    pub fn to_text(&self, window: usize, tfidf: TfIdfVariant) -> String {
        let mut out = format!(
            "# format_version={FORMAT_VERSION} n_path={} n_opcode={} log_base={LOG_BASE} window={window} tfidf={} storage=upper\n",
            self.n_path,
            self.n_opcode,
            tfidf.name()
        );
        for e in &self.entries {
            writeln!(out, "{} {} {}", e.i, e.j, e.weight).expect("writing to a String");
        }
        out
    }
}

/// Combines opcode/opcode and path/opcode weights with unit self-loops.
pub fn assemble_adjacency(
    ppmi: &SparseWeights,
    tfidf: &SparseWeights,
    n_path: usize,
    n_opcode: usize,
) -> Result<HeteroGraph, FeatureError> {
    let clash = |row, col| FeatureError::IndexClash { row, col, n_path, n_opcode };
    let mut entries: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (&(p, o), &w) in tfidf {
        if p >= n_path || o >= n_opcode {
            return Err(clash(p, o));
        }
        if w > 0.0 {
            entries.insert((p, n_path + o), w);
        }
    }
    for (&(a, b), &w) in ppmi {
        if a >= n_opcode || b >= n_opcode {
            return Err(clash(a, b));
        }
        if a != b && w > 0.0 {
            entries.insert((n_path + a.min(b), n_path + a.max(b)), w);
        }
    }
    for k in 0..n_path + n_opcode {
        entries.insert((k, k), 1.0);
    }
    let entries = entries.into_iter().map(|((i, j), weight)| GraphEntry { i, j, weight }).collect();
    Ok(HeteroGraph { n_path, n_opcode, entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub window: usize,
    pub tfidf: TfIdfVariant,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig { window: DEFAULT_WINDOW, tfidf: TfIdfVariant::Raw }
    }
}

/// Vocabulary and adjacency for a whole corpus.
pub fn build_graph<D: AsRef<[String]> + Sync>(
    corpus: &[D],
    config: &FeatureConfig,
) -> Result<(Vocabulary, HeteroGraph), FeatureError> {
    let vocab = build_vocab(corpus)?;
    let ppmi = compute_ppmi(corpus, &vocab, config.window)?;
    let tfidf = compute_tfidf(corpus, &vocab, config.tfidf)?;
    let graph = assemble_adjacency(&ppmi, &tfidf, corpus.len(), vocab.len())?;
    Ok((vocab, graph))
}
