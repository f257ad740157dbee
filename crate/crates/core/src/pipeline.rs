//! End-to-end helpers: bytecode pair to paths, manifest to corpus.

use log::info;
use rayon::prelude::*;

use crate::connector::{connect_cfgs, ContractGraph, RCfg};
use crate::ingest::{Resolution, SkipReason};
use crate::paths::{enumerate_with_report, DataPath, Enumeration, Label, PathLimits};

/// Connects `caller` to `callee`.
pub fn connect_pair(caller: &[u8], callee: &[u8]) -> RCfg {
    connect_cfgs(&ContractGraph::from_bytecode(caller), &ContractGraph::from_bytecode(callee))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventSummary {
    pub event_id: String,
    pub label: Option<Label>,
    pub outcome: Result<EventStats, SkipReason>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventStats {
    pub nodes: usize,
    pub cross_edges: usize,
    pub paths: usize,
    pub rejected: usize,
}

/// Paths of one connected pair, tagged with the event's id and label.
pub fn event_paths(rcfg: &RCfg, limits: &PathLimits, event_id: &str, label: Option<Label>) -> Enumeration {
    let mut report = enumerate_with_report(rcfg, limits);
    for p in &mut report.paths {
        p.event_id = Some(event_id.to_string());
        p.label = label;
    }
    report
}

/// Connects and enumerates every resolved event in parallel. The corpus is
/// in manifest order; skipped events contribute no paths.
pub fn collect_corpus(resolutions: &[Resolution], limits: &PathLimits) -> (Vec<DataPath>, Vec<EventSummary>) {
    let per_event: Vec<(Vec<DataPath>, EventSummary)> = resolutions
        .par_iter()
        .map(|r| {
            let event = &r.event;
            let pair = match &r.outcome {
                Ok(pair) => pair,
                Err(reason) => {
                    let summary = EventSummary {
                        event_id: event.event_id.clone(),
                        label: event.label,
                        outcome: Err(reason.clone()),
                    };
                    return (Vec::new(), summary);
                }
            };
            let rcfg = connect_pair(&pair.caller, &pair.callee);
            let report = event_paths(&rcfg, limits, &event.event_id, event.label);
            let stats = EventStats {
                nodes: rcfg.nodes().len(),
                cross_edges: rcfg.cross_edges().count(),
                paths: report.paths.len(),
                rejected: report.rejected.len(),
            };
            info!("event {}: {} paths, {} cross edges", event.event_id, stats.paths, stats.cross_edges);
            let summary = EventSummary { event_id: event.event_id.clone(), label: event.label, outcome: Ok(stats) };
            (report.paths, summary)
        })
        .collect();

    let mut corpus = Vec::new();
    let mut summaries = Vec::new();
    for (paths, summary) in per_event {
        corpus.extend(paths);
        summaries.push(summary);
    }
    (corpus, summaries)
}
