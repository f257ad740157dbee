//! Dataset bundle: the directory handed to the classifier.
//!
//! ```text
//! paths.jsonl  one {id, event_id?, entry, label?, truncated, tokens} per line
//! graph.txt    "# key=value ..." header, then "i j weight" per stored entry
//! vocab.txt    one token per line, in ordinal order
//! split.json   {format_version, seed, ratio, train_ids, test_ids, oversample_counts}
//! ```
//!
//! `split.json` is only written for labelled corpora.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use super::split::{stratified_split, Oversample, Split};
use super::{build_graph, FeatureConfig, FeatureError, GraphEntry, HeteroGraph, TfIdfVariant, LOG_BASE};
use crate::paths::{DataPath, Label};

pub const FORMAT_VERSION: u32 = 1;

pub const PATHS_FILE: &str = "paths.jsonl";
pub const GRAPH_FILE: &str = "graph.txt";
pub const VOCAB_FILE: &str = "vocab.txt";
pub const SPLIT_FILE: &str = "split.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_id: Option<String>,
    pub entry: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    #[serde(default)]
    pub truncated: bool,
    pub tokens: Vec<String>,
}

impl From<&DataPath> for PathRecord {
    fn from(p: &DataPath) -> Self {
        PathRecord {
            id: p.id.clone(),
            event_id: p.event_id.clone(),
            entry: p.entry.label(),
            label: p.label,
            truncated: p.truncated,
            tokens: p.tokens.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BundleMode {
    Supervised {
        ratio: f64,
        seed: u64,
        oversample: Oversample,
    },
    /// Unlabelled corpus; no split is written.
    Predict,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExportOptions {
    pub features: FeatureConfig,
    pub mode: BundleMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub paths: Vec<PathRecord>,
    pub vocab: Vec<String>,
    pub graph: HeteroGraph,
    pub window: usize,
    pub tfidf: TfIdfVariant,
    pub split: Option<Split>,
}

/// Drops repeated path ids, keeping the first occurrence.
pub fn dedup_corpus(corpus: Vec<DataPath>) -> Vec<DataPath> {
    let mut first: HashMap<String, Option<Label>> = HashMap::new();
    let mut out = Vec::with_capacity(corpus.len());
    for path in corpus {
        match first.get(&path.id) {
            Some(label) => {
                if *label != path.label {
                    warn!("path {} appears with labels {:?} and {:?}; keeping the first", path.id, label, path.label);
                }
            }
            None => {
                first.insert(path.id.clone(), path.label);
                out.push(path);
            }
        }
    }
    out
}

/// Deduplicates the corpus, builds its graph and writes the bundle to `dir`.
pub fn export_dataset(dir: &Path, corpus: Vec<DataPath>, opts: &ExportOptions) -> Result<Bundle, FeatureError> {
    let corpus = dedup_corpus(corpus);
    if corpus.is_empty() {
        return Err(FeatureError::EmptyCorpus);
    }
    let split = match opts.mode {
        BundleMode::Predict => None,
        BundleMode::Supervised { ratio, seed, oversample } => {
            let unlabelled: Vec<&DataPath> = corpus.iter().filter(|p| p.label.is_none()).collect();
            if let Some(first) = unlabelled.first() {
                return Err(FeatureError::MissingLabels { count: unlabelled.len(), first: first.id.clone() });
            }
            let items: Vec<(String, Label)> =
                corpus.iter().map(|p| (p.id.clone(), p.label.expect("checked above"))).collect();
            Some(stratified_split(&items, ratio, seed, oversample)?)
        }
    };
    let (vocab, graph) = build_graph(&corpus, &opts.features)?;

    fs::create_dir_all(dir)?;
    let mut paths_text = String::new();
    let records: Vec<PathRecord> = corpus.iter().map(PathRecord::from).collect();
    for rec in &records {
        paths_text.push_str(&serde_json::to_string(rec)?);
        paths_text.push('\n');
    }
    fs::write(dir.join(PATHS_FILE), paths_text)?;
    fs::write(dir.join(GRAPH_FILE), graph.to_text(opts.features.window, opts.features.tfidf))?;
    let mut vocab_text = vocab.tokens().join("\n");
    vocab_text.push('\n');
    fs::write(dir.join(VOCAB_FILE), vocab_text)?;
    let split_path = dir.join(SPLIT_FILE);
    match &split {
        Some(split) => {
            let mut text = serde_json::to_string_pretty(split)?;
            text.push('\n');
            fs::write(split_path, text)?;
        }
        None if split_path.exists() => fs::remove_file(split_path)?,
        None => {}
    }

    Ok(Bundle {
        paths: records,
        vocab: vocab.tokens().to_vec(),
        graph,
        window: opts.features.window,
        tfidf: opts.features.tfidf,
        split,
    })
}

fn bad(msg: impl Into<String>) -> FeatureError {
    FeatureError::Bundle(msg.into())
}

fn parse_graph(text: &str) -> Result<(HeteroGraph, usize, TfIdfVariant), FeatureError> {
    let mut lines = text.lines();
    let header = lines.next().and_then(|h| h.strip_prefix("# ")).ok_or_else(|| bad("graph header missing"))?;
    let fields: BTreeMap<&str, &str> = header.split_whitespace().filter_map(|kv| kv.split_once('=')).collect();
    let field = |k: &str| fields.get(k).copied().ok_or_else(|| bad(format!("graph header lacks `{k}`")));
    let number = |k: &str| -> Result<usize, FeatureError> {
        field(k)?.parse().map_err(|_| bad(format!("graph header `{k}` is not a number")))
    };

    let version = number("format_version")?;
    if version != FORMAT_VERSION as usize {
        return Err(bad(format!("format version {version}, expected {FORMAT_VERSION}")));
    }
    if field("log_base")? != LOG_BASE || field("storage")? != "upper" {
        return Err(bad("unsupported graph encoding"));
    }
    let tfidf = match field("tfidf")? {
        "raw" => TfIdfVariant::Raw,
        "sublinear" => TfIdfVariant::Sublinear,
        other => return Err(bad(format!("unknown tfidf variant `{other}`"))),
    };
    let (n_path, n_opcode, window) = (number("n_path")?, number("n_opcode")?, number("window")?);

    let mut entries = Vec::new();
    for (n, line) in lines.enumerate() {
        let parts: Vec<&str> = line.split(' ').collect();
        let parsed = match parts.as_slice() {
            [i, j, w] => i.parse().ok().zip(j.parse().ok()).zip(w.parse().ok()),
            _ => None,
        };
        let ((i, j), weight) = parsed.ok_or_else(|| bad(format!("graph line {}: malformed entry", n + 2)))?;
        if i > j || j >= n_path + n_opcode {
            return Err(bad(format!("graph line {}: entry ({i}, {j}) out of range", n + 2)));
        }
        entries.push(GraphEntry { i, j, weight });
    }
    Ok((HeteroGraph { n_path, n_opcode, entries }, window, tfidf))
}

pub fn load_bundle(dir: &Path) -> Result<Bundle, FeatureError> {
    let (graph, window, tfidf) = parse_graph(&fs::read_to_string(dir.join(GRAPH_FILE))?)?;
    let paths = fs::read_to_string(dir.join(PATHS_FILE))?
        .lines()
        .map(serde_json::from_str)
        .collect::<Result<Vec<PathRecord>, _>>()?;
    let vocab: Vec<String> = fs::read_to_string(dir.join(VOCAB_FILE))?.lines().map(String::from).collect();
    if paths.len() != graph.n_path || vocab.len() != graph.n_opcode {
        return Err(bad("path or vocabulary count disagrees with the graph header"));
    }
    let split_path = dir.join(SPLIT_FILE);
    let split: Option<Split> = if split_path.exists() {
        let split: Split = serde_json::from_str(&fs::read_to_string(split_path)?)?;
        if split.format_version != FORMAT_VERSION {
            return Err(bad(format!("split format version {}", split.format_version)));
        }
        Some(split)
    } else {
        None
    };
    Ok(Bundle { paths, vocab, graph, window, tfidf, split })
}
