//! Bytecode acquisition: hex text and files, `eth_getCode` over JSON-RPC
//! with an on-disk cache, and event manifests.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

mod cache;
mod manifest;
mod rpc;

pub use cache::CodeCache;
pub use manifest::{
    csv_to_manifest, resolve_manifest, CodeResolver, Manifest, ManifestEvent, Resolution, ResolvedPair, SkipReason,
    DEFAULT_JOBS,
};
pub use rpc::{RpcClient, RPC_URL_ENV};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("bad hex: {0}")]
    BadHex(String),
    #[error("bad address `{0}`: expected 20 bytes of hex")]
    BadAddress(String),
    #[error("rpc: {0}")]
    Rpc(String),
    #[error("no code at {0}")]
    EmptyCode(Address),
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl IngestError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IngestError::Io { path: path.display().to_string(), source }
    }
}

/// Decodes hex text, tolerating a `0x` prefix and any whitespace.
pub fn decode_hex(text: &str) -> Result<Vec<u8>, IngestError> {
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let digits = compact.strip_prefix("0x").or_else(|| compact.strip_prefix("0X")).unwrap_or(&compact);
    if !digits.len().is_multiple_of(2) {
        return Err(IngestError::BadHex(format!("odd number of digits ({})", digits.len())));
    }
    hex::decode(digits).map_err(|e| IngestError::BadHex(e.to_string()))
}

pub fn load_bytecode_file(path: &Path) -> Result<Vec<u8>, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
    decode_hex(&text)
}

/// Reads `source` as a file if one exists at that path, otherwise decodes it
/// as hex text.
pub fn load_bytecode(source: &str) -> Result<Vec<u8>, IngestError> {
    let path = Path::new(source);
    if path.is_file() {
        load_bytecode_file(path)
    } else {
        decode_hex(source)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Address(pub [u8; 20]);

impl FromStr for Address {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")).unwrap_or(s);
        let mut out = [0u8; 20];
        if digits.len() != 40 || hex::decode_to_slice(digits, &mut out).is_err() {
            return Err(IngestError::BadAddress(s.to_string()));
        }
        Ok(Address(out))
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl Serialize for Address {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
