use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{decode_hex, Address, IngestError};

/// Fetched code stored as `<root>/<chain>/<address>.hex`.
#[derive(Debug, Clone)]
pub struct CodeCache {
    root: PathBuf,
}

impl CodeCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        CodeCache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, chain: &str, address: &Address) -> PathBuf {
        self.root.join(chain).join(format!("{address}.hex"))
    }

    pub fn get(&self, chain: &str, address: &Address) -> Result<Option<Vec<u8>>, IngestError> {
        let path = self.path(chain, address);
        match fs::read_to_string(&path) {
            Ok(text) => decode_hex(&text).map(Some),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(IngestError::io(&path, e)),
        }
    }

    /// Writes through a temporary file in the same directory and renames it
    /// into place, so readers never see a partial file.
    pub fn put(&self, chain: &str, address: &Address, code: &[u8]) -> Result<(), IngestError> {
        let path = self.path(chain, address);
        let dir = path.parent().expect("cache path has a parent");
        fs::create_dir_all(dir).map_err(|e| IngestError::io(dir, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| IngestError::io(dir, e))?;
        writeln!(tmp, "0x{}", hex::encode(code)).map_err(|e| IngestError::io(tmp.path(), e))?;
        tmp.persist(&path).map_err(|e| IngestError::io(&path, e.error))?;
        Ok(())
    }
}
