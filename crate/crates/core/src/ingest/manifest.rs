use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{load_bytecode_file, Address, CodeCache, IngestError, RpcClient};
use crate::paths::Label;

/// Requests in flight during manifest resolution.
pub const DEFAULT_JOBS: usize = 4;

/// One exploit event: a caller (attack) contract and the callee it targets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEvent {
    pub event_id: String,
    pub chain: String,
    pub caller_address: Address,
    pub callee_address: Address,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    /// Hex file with the caller's code, relative to the manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caller_code: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub callee_code: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub events: Vec<ManifestEvent>,
    /// Directory relative code paths are resolved against.
    pub base_dir: PathBuf,
}

fn valid_chain(chain: &str) -> bool {
    !chain.is_empty()
        && chain != "."
        && chain != ".."
        && chain.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

impl Manifest {
    /// Parses line-delimited JSON events; blank lines and `#` comments are
    /// skipped.
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Manifest, IngestError> {
        let mut events = Vec::new();
        let mut ids = HashSet::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fail = |message: String| IngestError::Manifest { line: n + 1, message };
            let event: ManifestEvent = serde_json::from_str(line).map_err(|e| fail(e.to_string()))?;
            if event.event_id.is_empty() {
                return Err(fail("empty event_id".into()));
            }
            if !valid_chain(&event.chain) {
                return Err(fail(format!("chain `{}` is not a plain name", event.chain)));
            }
            if !ids.insert(event.event_id.clone()) {
                return Err(fail(format!("duplicate event_id `{}`", event.event_id)));
            }
            events.push(event);
        }
        Ok(Manifest { events, base_dir: base_dir.into() })
    }

    pub fn load(path: &Path) -> Result<Manifest, IngestError> {
        let text = std::fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Manifest::parse(&text, base)
    }

    pub fn to_jsonl(&self) -> String {
        self.events.iter().map(|e| serde_json::to_string(e).expect("manifest events serialize") + "\n").collect()
    }
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    event_id: String,
    chain: String,
    caller_address: String,
    callee_address: String,
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    caller_code: Option<String>,
    #[serde(default)]
    callee_code: Option<String>,
}

/// Converts a CSV export with a header row naming the manifest fields into
/// manifest lines. Empty optional cells are dropped.
pub fn csv_to_manifest(csv_text: &str) -> Result<String, IngestError> {
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    let mut out = String::new();
    for (n, row) in reader.deserialize::<CsvRow>().enumerate() {
        // header is line 1
        let fail = |message: String| IngestError::Manifest { line: n + 2, message };
        let row = row.map_err(|e| fail(e.to_string()))?;
        let nonempty = |v: Option<String>| v.filter(|s| !s.trim().is_empty());
        let label = nonempty(row.label).map(|l| l.trim().parse::<Label>()).transpose().map_err(fail)?;
        let event = ManifestEvent {
            event_id: row.event_id,
            chain: row.chain,
            caller_address: row.caller_address.trim().parse().map_err(|e: IngestError| fail(e.to_string()))?,
            callee_address: row.callee_address.trim().parse().map_err(|e: IngestError| fail(e.to_string()))?,
            label,
            caller_code: nonempty(row.caller_code).map(PathBuf::from),
            callee_code: nonempty(row.callee_code).map(PathBuf::from),
        };
        out.push_str(&serde_json::to_string(&event).expect("manifest events serialize"));
        out.push('\n');
    }
    Manifest::parse(&out, "")?;
    Ok(out)
}

/// Why an event could not be resolved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SkipReason {
    /// The address holds no code, e.g. an externally owned account.
    EmptyCode(Address),
    Rpc {
        address: Address,
        message: String,
    },
    /// No code file, no cached copy and no endpoint configured.
    NoSource(Address),
    Load {
        address: Address,
        message: String,
    },
}

impl SkipReason {
    pub fn code(&self) -> &'static str {
        match self {
            SkipReason::EmptyCode(_) => "empty_code",
            SkipReason::Rpc { .. } => "rpc_error",
            SkipReason::NoSource(_) => "no_source",
            SkipReason::Load { .. } => "load_error",
        }
    }
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SkipReason::EmptyCode(a) => write!(f, "no code at {a}"),
            SkipReason::Rpc { address, message } => write!(f, "fetching {address}: {message}"),
            SkipReason::NoSource(a) => write!(f, "no code file, cache entry or endpoint for {a}"),
            SkipReason::Load { address, message } => write!(f, "loading {address}: {message}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedPair {
    pub caller: Vec<u8>,
    pub callee: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resolution {
    pub event: ManifestEvent,
    pub outcome: Result<ResolvedPair, SkipReason>,
}

/// Code lookup order: explicit file, cache, endpoint (written back to the
/// cache).
#[derive(Debug, Default)]
pub struct CodeResolver {
    pub cache: Option<CodeCache>,
    pub client: Option<RpcClient>,
    fetches: AtomicUsize,
}

impl CodeResolver {
    pub fn new(cache: Option<CodeCache>, client: Option<RpcClient>) -> Self {
        CodeResolver { cache, client, fetches: AtomicUsize::new(0) }
    }

    /// Network fetches issued so far.
    pub fn fetches(&self) -> usize {
        self.fetches.load(Ordering::Relaxed)
    }

    pub fn code(&self, chain: &str, address: &Address, file: Option<&Path>) -> Result<Vec<u8>, SkipReason> {
        let load_err = |e: IngestError| SkipReason::Load { address: *address, message: e.to_string() };
        if let Some(file) = file {
            return load_bytecode_file(file).map_err(load_err);
        }
        if let Some(cache) = &self.cache {
            match cache.get(chain, address).map_err(load_err)? {
                Some(code) if code.is_empty() => return Err(SkipReason::EmptyCode(*address)),
                Some(code) => return Ok(code),
                None => {}
            }
        }
        let Some(client) = &self.client else {
            return Err(SkipReason::NoSource(*address));
        };
        self.fetches.fetch_add(1, Ordering::Relaxed);
        let fetched = client.fetch_code(address);
        // empty code is cached too, so accounts without code are not refetched
        let to_cache = match &fetched {
            Ok(code) => Some(code.as_slice()),
            Err(IngestError::EmptyCode(_)) => Some(&[][..]),
            Err(_) => None,
        };
        if let (Some(cache), Some(code)) = (&self.cache, to_cache) {
            if let Err(e) = cache.put(chain, address, code) {
                warn!("could not cache {address}: {e}");
            }
        }
        fetched.map_err(|e| match e {
            IngestError::EmptyCode(a) => SkipReason::EmptyCode(a),
            other => SkipReason::Rpc { address: *address, message: other.to_string() },
        })
    }

    fn resolve(&self, manifest: &Manifest, event: &ManifestEvent) -> Result<ResolvedPair, SkipReason> {
        let file = |p: &Option<PathBuf>| p.as_ref().map(|p| manifest.base_dir.join(p));
        let caller = self.code(&event.chain, &event.caller_address, file(&event.caller_code).as_deref())?;
        let callee = self.code(&event.chain, &event.callee_address, file(&event.callee_code).as_deref())?;
        Ok(ResolvedPair { caller, callee })
    }
}

/// Resolves every event with at most `jobs` lookups in flight. Results keep
/// manifest order; failures become skip records.
pub fn resolve_manifest(manifest: &Manifest, resolver: &CodeResolver, jobs: usize) -> Vec<Resolution> {
    let work = || -> Vec<Resolution> {
        manifest
            .events
            .par_iter()
            .map(|event| {
                let outcome = resolver.resolve(manifest, event);
                if let Err(reason) = &outcome {
                    info!("skipping event {}: {reason}", event.event_id);
                }
                Resolution { event: event.clone(), outcome }
            })
            .collect()
    };
    match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(pool) => pool.install(work),
        Err(e) => {
            warn!("falling back to the global pool: {e}");
            work()
        }
    }
}
