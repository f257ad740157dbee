//! Caller/callee graph splicing.
//!
//! The caller graph is re-partitioned so every call-class instruction ends
//! its block. Each call site whose calldata carries a 4-byte selector
//! matching a callee function gets a private copy of that function's blocks:
//! a `call` edge from the site into the copy and, when the function returns,
//! `return_link` edges from its RETURN blocks back to the block after the
//! call. The direct fall-through past the call is removed in both cases.

mod callsite;
mod rcfg;

use std::collections::{BTreeMap, BTreeSet};

use crate::cfg::{extract_selectors, segment_functions, BlockId, Cfg, Edge, EdgeKind, FunctionSegment, Selector};
use crate::disasm::disassemble;

pub use callsite::{resolve_call_selector, split_at_calls, CallKind, CallSelector, CallSite};
pub use rcfg::{EntryKind, EntryPoint, Provenance, RCfg, RNode, SiteOutcome, SiteReport, Splice};

/// One contract's graph with its dispatcher selectors and function segments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractGraph {
    pub cfg: Cfg,
    pub selectors: Vec<Selector>,
    pub segments: Vec<FunctionSegment>,
}

impl ContractGraph {
    pub fn new(cfg: Cfg) -> Self {
        let selectors = extract_selectors(&cfg);
        let segments = segment_functions(&cfg, &selectors);
        ContractGraph { cfg, selectors, segments }
    }

    pub fn from_bytecode(code: &[u8]) -> Self {
        ContractGraph::new(Cfg::build(&disassemble(code)))
    }

    /// The same contract with every call-class instruction ending its block.
    /// Selector entries are carried over by offset.
    pub fn split_at_calls(&self) -> ContractGraph {
        let cfg = self.cfg.split_at_calls();
        let selectors: Vec<Selector> = self
            .selectors
            .iter()
            .map(|s| {
                let offset = self.cfg.block(s.entry_block).entry_offset;
                Selector {
                    entry_block: cfg.block_at_offset(offset).expect("jumpdest blocks survive splitting"),
                    ..s.clone()
                }
            })
            .collect();
        let segments = segment_functions(&cfg, &selectors);
        ContractGraph { cfg, selectors, segments }
    }

    pub fn segment_for(&self, selector: [u8; 4]) -> Option<&FunctionSegment> {
        self.segments.iter().find(|seg| seg.selector.as_ref().is_some_and(|s| s.value == selector))
    }

    /// Contract entry followed by the selector entries.
    pub fn roots(&self) -> Vec<BlockId> {
        let mut roots: Vec<BlockId> = self.cfg.entry().into_iter().collect();
        for s in &self.selectors {
            if !roots.contains(&s.entry_block) {
                roots.push(s.entry_block);
            }
        }
        roots
    }
}

struct Plan {
    site: CallSite,
    callee_segment: usize,
    returns: bool,
}

/// Splices the callee functions reached by the caller's call sites into the
/// caller graph.
pub fn connect_cfgs(caller: &ContractGraph, callee: &ContractGraph) -> RCfg {
    let base = caller.split_at_calls();
    let mut reports = Vec::new();
    let mut plans = Vec::new();
    let mut seen_sites = BTreeSet::new();

    for seg in base.segments.iter().filter(|s| s.has_calls) {
        for site in split_at_calls(seg, &base.cfg) {
            if !seen_sites.insert(site.block_id) {
                continue;
            }
            let outcome = if !callsite::site_is_feasible(&base.cfg, seg, &site) {
                SiteOutcome::Infeasible
            } else {
                match site.resolved_selector.value() {
                    None => SiteOutcome::NoSelector,
                    Some(sel) => {
                        match callee.segments.iter().position(|c| c.selector.as_ref().is_some_and(|s| s.value == sel)) {
                            None => SiteOutcome::NoMatch,
                            Some(idx) => {
                                let returns = callee.segments[idx].ends_with_return;
                                plans.push(Plan { site: site.clone(), callee_segment: idx, returns });
                                SiteOutcome::Connected
                            }
                        }
                    }
                }
            };
            reports.push(SiteReport { site, outcome });
        }
    }

    let planned_cross_edges: usize = plans
        .iter()
        .map(|p| {
            let exits = callee.segments[p.callee_segment].exits(&callee.cfg).len();
            1 + if p.returns && p.site.resume.is_some() { exits } else { 0 }
        })
        .sum();

    // drop splices whose call site is unreachable once the planned edge
    // removals and return paths are in place
    let removed: BTreeSet<(BlockId, BlockId)> =
        plans.iter().filter_map(|p| p.site.resume.map(|r| (p.site.block_id, r))).collect();
    let resumes: BTreeMap<BlockId, BlockId> = plans
        .iter()
        .filter(|p| p.returns && !callee.segments[p.callee_segment].exits(&callee.cfg).is_empty())
        .filter_map(|p| p.site.resume.map(|r| (p.site.block_id, r)))
        .collect();
    let reachable = {
        let mut seen = vec![false; base.cfg.len()];
        let mut stack = base.roots();
        while let Some(id) = stack.pop() {
            if std::mem::replace(&mut seen[id], true) {
                continue;
            }
            for e in base.cfg.successors(id) {
                if !removed.contains(&(e.from, e.to)) && !seen[e.to] {
                    stack.push(e.to);
                }
            }
            if let Some(r) = resumes.get(&id) {
                stack.push(*r);
            }
        }
        seen
    };
    plans.retain(|p| {
        let keep = reachable[p.site.block_id];
        if !keep {
            if let Some(r) = reports.iter_mut().find(|r| r.site.block_id == p.site.block_id) {
                r.outcome = SiteOutcome::Unreachable;
            }
        }
        keep
    });

    let mut nodes: Vec<RNode> =
        base.cfg.blocks().iter().map(|b| RNode { block: b.clone(), provenance: Provenance::Caller }).collect();
    let mut edges: Vec<Edge> = base.cfg.edges().to_vec();
    let mut splices = Vec::new();

    for plan in plans {
        let splice_index = splices.len();
        let seg = &callee.segments[plan.callee_segment];
        let mut fresh = BTreeMap::new();
        for &orig in &seg.blocks {
            let id = nodes.len();
            fresh.insert(orig, id);
            let mut block = callee.cfg.block(orig).clone();
            block.id = id;
            nodes.push(RNode { block, provenance: Provenance::Callee { splice: splice_index, original: orig } });
        }
        for &orig in &seg.blocks {
            for e in callee.cfg.successors(orig) {
                if let Some(&to) = fresh.get(&e.to) {
                    edges.push(Edge::new(fresh[&orig], to, e.kind));
                }
            }
        }

        let site = &plan.site;
        let callee_entry = fresh[&seg.entry_block];
        let mut cross = vec![Edge::new(site.block_id, callee_entry, EdgeKind::Call)];
        let callee_exits: Vec<BlockId> = seg.exits(&callee.cfg).iter().map(|orig| fresh[orig]).collect();
        let mut removed_edge = None;
        if let Some(resume) = site.resume {
            let direct = Edge::new(site.block_id, resume, EdgeKind::FallThrough);
            edges.retain(|e| *e != direct);
            removed_edge = Some(direct);
            if plan.returns {
                cross.extend(callee_exits.iter().map(|exit| Edge::new(*exit, resume, EdgeKind::ReturnLink)));
            }
        }
        edges.extend(cross.iter().copied());
        splices.push(Splice {
            site_block: site.block_id,
            call_kind: site.call_kind,
            selector: site.resolved_selector.value().expect("planned sites carry a selector"),
            callee_selector: seg.selector.as_ref().map(|s| s.value).unwrap_or_default(),
            callee_entry,
            callee_exits,
            resume: site.resume,
            returns: plan.returns,
            removed_edge,
            cross_edges: cross,
        });
    }

    let mut entries = vec![];
    if let Some(entry) = base.cfg.entry() {
        entries.push(EntryPoint { block: entry, kind: EntryKind::Contract });
    }
    for s in &base.selectors {
        entries.push(EntryPoint { block: s.entry_block, kind: EntryKind::Selector(s.value) });
    }

    RCfg::assemble(base.cfg, base.selectors, nodes, edges, splices, entries, reports, planned_cross_edges)
}
