use std::fmt::Write as _;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use anyhow::{bail, Context, Result};
use log::{info, warn};

use pathlab::connector::{connect_cfgs, ContractGraph, RCfg};
use pathlab::disasm::{disassemble, listing, warnings};
use pathlab::document::{cfg_document, cfg_to_dot, load_graph, rcfg_document, rcfg_to_dot, to_json};
use pathlab::features::{export_dataset, load_bundle, BundleMode, ExportOptions, PathRecord};
use pathlab::ingest::{csv_to_manifest, load_bytecode, resolve_manifest, CodeCache, CodeResolver, Manifest, RpcClient};
use pathlab::paths::enumerate_with_report;
use pathlab::pipeline::collect_corpus;

use crate::args::{DetectArgs, FeaturesArgs, GraphFormat, PathsArgs};
use crate::config::FileConfig;

pub const CLASSIFIER_ENV: &str = "PATHLAB_CLASSIFIER";
const DEFAULT_CLASSIFIER: &str = "pathlab-classifier";
const DEFAULT_SPLIT: f64 = 0.9;

/// The classifier executable could not be started.
#[derive(Debug)]
pub struct ComponentMissing(pub String);

impl std::fmt::Display for ComponentMissing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "classifier component missing: {}", self.0)
    }
}

impl std::error::Error for ComponentMissing {}

/// Writes to `out`, or to stdout when absent.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn code(source: &str) -> Result<Vec<u8>> {
    load_bytecode(source).with_context(|| format!("loading bytecode from `{source}`"))
}

fn graph(source: &str) -> Result<ContractGraph> {
    Ok(ContractGraph::from_bytecode(&code(source)?))
}

pub fn disasm(input: &str) -> Result<()> {
    let instrs = disassemble(&code(input)?);
    for w in warnings(&instrs) {
        warn!("{w}");
    }
    emit(None, &listing(&instrs))
}

pub fn cfg(input: &str, format: GraphFormat, split_calls: bool, out: Option<&Path>) -> Result<()> {
    let mut g = graph(input)?;
    if split_calls {
        g = g.split_at_calls();
    }
    for (block, issue) in g.cfg.jump_issues() {
        info!("block {block}: {issue}");
    }
    let text = match format {
        GraphFormat::Json => to_json(&cfg_document(&g)),
        GraphFormat::Dot => cfg_to_dot(&g.cfg),
    };
    emit(out, &text)
}

pub fn selectors(input: &str) -> Result<()> {
    let g = graph(input)?;
    let mut text = String::new();
    for s in &g.selectors {
        let offset = g.cfg.block(s.entry_block).entry_offset;
        writeln!(text, "{} block={} offset={offset:#x} source={}", s.hex(), s.entry_block, s.source.name())?;
    }
    emit(None, &text)
}

fn report_sites(rcfg: &RCfg) {
    for r in rcfg.sites() {
        eprintln!(
            "site block {} ({} at {:#x}) selector {}: {}",
            r.site.block_id,
            r.site.call_kind.mnemonic(),
            r.site.call_offset,
            r.site.resolved_selector,
            r.outcome.name()
        );
    }
}

pub fn connect(caller: &str, callee: &str, swap: bool, format: GraphFormat, out: Option<&Path>) -> Result<()> {
    let (caller, callee) = if swap { (callee, caller) } else { (caller, callee) };
    let rcfg = connect_cfgs(&graph(caller)?, &graph(callee)?);
    report_sites(&rcfg);
    let text = match format {
        GraphFormat::Json => to_json(&rcfg_document(&rcfg)),
        GraphFormat::Dot => rcfg_to_dot(&rcfg),
    };
    emit(out, &text)
}

fn jsonl<T: serde::Serialize>(items: impl IntoIterator<Item = T>) -> Result<String> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(&item)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn paths(args: &PathsArgs, config: &FileConfig) -> Result<()> {
    let limits = config.limits(&args.limits)?;
    let rcfg = match (&args.graph, &args.code, &args.caller, &args.callee) {
        (Some(doc), _, _, _) => {
            let text = std::fs::read_to_string(doc).with_context(|| format!("reading {}", doc.display()))?;
            load_graph(&text).with_context(|| format!("loading {}", doc.display()))?
        }
        (None, Some(code), _, _) => RCfg::single(&graph(code)?),
        (None, None, Some(caller), Some(callee)) => connect_cfgs(&graph(caller)?, &graph(callee)?),
        _ => bail!("give --graph, --code, or --caller with --callee"),
    };
    let report = enumerate_with_report(&rcfg, &limits);
    info!("{} paths, {} rejected walks", report.paths.len(), report.rejected.len());
    if let Some(v) = &args.verdicts {
        emit(Some(v), &jsonl(report.verdict_records(&rcfg))?)?;
    }
    emit(args.out.as_deref(), &jsonl(report.paths.iter().map(PathRecord::from))?)
}

pub fn features(args: &FeaturesArgs, config: &FileConfig, jobs: usize) -> Result<()> {
    let limits = config.limits(&args.limits)?;
    let feature_config = config.features(&args.features)?;
    let mode = if args.predict {
        BundleMode::Predict
    } else {
        let ratio = args.split.or(config.split).unwrap_or(DEFAULT_SPLIT);
        if !(ratio > 0.0 && ratio < 1.0) {
            bail!("--split must lie strictly between 0 and 1, got {ratio}");
        }
        BundleMode::Supervised {
            ratio,
            seed: args.seed.or(config.seed).unwrap_or(0),
            oversample: config.oversample(args.oversample.as_deref())?,
        }
    };

    let manifest = Manifest::load(&args.manifest)?;
    let cache_dir: PathBuf =
        args.cache_dir.clone().or_else(|| config.cache_dir.clone()).unwrap_or_else(|| manifest.base_dir.join("cache"));
    let client = config.rpc(args.rpc.as_deref()).map(RpcClient::new);
    let resolver = CodeResolver::new(Some(CodeCache::new(cache_dir)), client);
    let resolutions = resolve_manifest(&manifest, &resolver, jobs);

    let (corpus, summaries) = collect_corpus(&resolutions, &limits);
    let mut skipped = 0;
    for s in &summaries {
        if let Err(reason) = &s.outcome {
            skipped += 1;
            eprintln!("skipped {}: {} ({reason})", s.event_id, reason.code());
        }
    }
    if corpus.is_empty() {
        bail!("no paths collected from {} events ({skipped} skipped)", summaries.len());
    }
    let bundle = export_dataset(&args.out, corpus, &ExportOptions { features: feature_config, mode })?;
    eprintln!(
        "{} events ({} skipped, {} fetched), {} paths, {} tokens -> {}",
        summaries.len(),
        skipped,
        resolver.fetches(),
        bundle.paths.len(),
        bundle.vocab.len(),
        args.out.display()
    );
    Ok(())
}

pub fn manifest(csv: &Path, out: Option<&Path>) -> Result<()> {
    let text = std::fs::read_to_string(csv).with_context(|| format!("reading {}", csv.display()))?;
    emit(out, &csv_to_manifest(&text)?)
}

pub fn detect(args: &DetectArgs, config: &FileConfig) -> Result<()> {
    let bundle = load_bundle(&args.bundle).with_context(|| format!("loading bundle {}", args.bundle.display()))?;
    info!("bundle with {} paths", bundle.paths.len());

    let command = args
        .classifier
        .clone()
        .or_else(|| std::env::var(CLASSIFIER_ENV).ok())
        .or_else(|| config.classifier.clone())
        .unwrap_or_else(|| DEFAULT_CLASSIFIER.to_string());
    let mut words = command.split_whitespace();
    let Some(program) = words.next() else { bail!("empty classifier command") };
    let out = args.out.clone().unwrap_or_else(|| args.bundle.join("verdicts.jsonl"));

    let mut process = Process::new(program);
    process.args(words).arg("predict").arg("--bundle").arg(&args.bundle).arg("--out").arg(&out);
    if let Some(ck) = &args.checkpoint {
        process.arg("--checkpoint").arg(ck);
    }
    let status = match process.status() {
        Ok(status) => status,
        Err(e) if matches!(e.kind(), ErrorKind::NotFound | ErrorKind::PermissionDenied) => {
            return Err(ComponentMissing(format!(
                "could not run `{program}` ({e}); the bundle at {} is unchanged",
                args.bundle.display()
            ))
            .into());
        }
        Err(e) => return Err(e).context("starting the classifier"),
    };
    if !status.success() {
        bail!("classifier exited with {status}");
    }
    let verdicts = std::fs::read_to_string(&out).with_context(|| format!("reading {}", out.display()))?;
    emit(None, &verdicts)
}
