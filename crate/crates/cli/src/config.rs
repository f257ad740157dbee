//! Optional TOML configuration. Keys mirror the long flags; flags win.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use pathlab::features::{FeatureConfig, Oversample, TfIdfVariant, DEFAULT_WINDOW};
use pathlab::ingest::{DEFAULT_JOBS, RPC_URL_ENV};
use pathlab::PathLimits;

use crate::args::{FeatureArgs, LimitArgs};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub jobs: Option<usize>,
    pub max_paths: Option<usize>,
    pub max_tokens: Option<usize>,
    pub max_revisits: Option<usize>,
    pub window: Option<usize>,
    pub tfidf: Option<String>,
    pub split: Option<f64>,
    pub seed: Option<u64>,
    pub oversample: Option<String>,
    pub rpc: Option<String>,
    pub cache_dir: Option<PathBuf>,
    pub classifier: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn limits(&self, args: &LimitArgs) -> Result<PathLimits> {
        let d = PathLimits::default();
        let limits = PathLimits::new(
            args.max_paths.or(self.max_paths).unwrap_or(d.max_paths_per_entry),
            args.max_tokens.or(self.max_tokens).unwrap_or(d.max_path_length),
            args.max_revisits.or(self.max_revisits).unwrap_or(d.max_block_revisits),
        )?;
        Ok(limits)
    }

    pub fn jobs(&self, flag: Option<usize>) -> usize {
        flag.or(self.jobs).unwrap_or(DEFAULT_JOBS).max(1)
    }

    pub fn rpc(&self, flag: Option<&str>) -> Option<String> {
        flag.map(String::from)
            .or_else(|| self.rpc.clone())
            .or_else(|| std::env::var(RPC_URL_ENV).ok())
            .filter(|u| !u.trim().is_empty())
    }

    pub fn features(&self, args: &FeatureArgs) -> Result<FeatureConfig> {
        let tfidf = match args.tfidf.as_deref().or(self.tfidf.as_deref()) {
            None | Some("raw") => TfIdfVariant::Raw,
            Some("sublinear") => TfIdfVariant::Sublinear,
            Some(other) => bail!("unknown tfidf variant `{other}` (raw, sublinear)"),
        };
        Ok(FeatureConfig { window: args.window.or(self.window).unwrap_or(DEFAULT_WINDOW), tfidf })
    }

    pub fn oversample(&self, flag: Option<&str>) -> Result<Oversample> {
        parse_oversample(flag.or(self.oversample.as_deref()).unwrap_or("none"))
    }
}

/// `none`, `parity`, or a fraction of the largest class in `(0, 1]`.
pub fn parse_oversample(s: &str) -> Result<Oversample> {
    Ok(match s {
        "none" => Oversample::None,
        "parity" => Oversample::Parity,
        other => match other.parse::<f64>() {
            Ok(f) if f > 0.0 && f <= 1.0 => Oversample::Fraction(f),
            _ => bail!("oversample must be none, parity or a fraction in (0, 1], got `{other}`"),
        },
    })
}
