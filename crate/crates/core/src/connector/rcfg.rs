use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cfg::{BasicBlock, BlockId, Cfg, Edge, EdgeKind, Selector};
use crate::validator::FlowGraph;

use super::callsite::{CallKind, CallSite};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Caller,
    /// Copy of callee block `original` made for splice `splice`.
    Callee {
        splice: usize,
        original: BlockId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RNode {
    /// `block.id` is the node's id in the connected graph.
    pub block: BasicBlock,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntryKind {
    /// The contract entry at offset 0; owns the fallback code.
    Contract,
    Selector([u8; 4]),
}

impl EntryKind {
    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for EntryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntryKind::Contract => f.write_str("fallback"),
            EntryKind::Selector(v) => write!(f, "0x{}", hex::encode(v)),
        }
    }
}

impl FromStr for EntryKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "fallback" {
            return Ok(EntryKind::Contract);
        }
        crate::document::hex4::parse(s).map(EntryKind::Selector).ok_or_else(|| format!("bad entry `{s}`"))
    }
}

impl Serialize for EntryKind {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EntryKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EntryPoint {
    pub block: BlockId,
    pub kind: EntryKind,
}

/// One callee function copy attached to one call site.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splice {
    pub site_block: BlockId,
    pub call_kind: CallKind,
    /// Selector built at the call site.
    #[serde(with = "crate::document::hex4")]
    pub selector: [u8; 4],
    /// Selector of the spliced callee function.
    #[serde(with = "crate::document::hex4")]
    pub callee_selector: [u8; 4],
    pub callee_entry: BlockId,
    pub callee_exits: Vec<BlockId>,
    pub resume: Option<BlockId>,
    pub returns: bool,
    /// The `f_p -> f_n` fall-through removed by this splice.
    pub removed_edge: Option<Edge>,
    pub cross_edges: Vec<Edge>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteOutcome {
    Connected,
    /// No walk from the function entry reaches the call on a valid stack.
    Infeasible,
    /// No selector could be recovered from the calldata.
    NoSelector,
    /// The selector is not a callee function.
    NoMatch,
    /// Matched, but the site is unreachable in the connected graph.
    Unreachable,
}

impl SiteOutcome {
    pub fn name(self) -> &'static str {
        match self {
            SiteOutcome::Connected => "connected",
            SiteOutcome::Infeasible => "infeasible",
            SiteOutcome::NoSelector => "no_selector",
            SiteOutcome::NoMatch => "no_match",
            SiteOutcome::Unreachable => "unreachable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteReport {
    pub site: CallSite,
    pub outcome: SiteOutcome,
}

/// Connected caller/callee graph. Node ids `0..base.len()` are the caller's
/// blocks; callee copies follow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RCfg {
    base: Cfg,
    selectors: Vec<Selector>,
    nodes: Vec<RNode>,
    edges: Vec<Edge>,
    splices: Vec<Splice>,
    entries: Vec<EntryPoint>,
    sites: Vec<SiteReport>,
    planned_cross_edges: usize,
}

impl RCfg {
    #[allow(clippy::too_many_arguments)]
    pub(super) fn assemble(
        base: Cfg,
        selectors: Vec<Selector>,
        nodes: Vec<RNode>,
        mut edges: Vec<Edge>,
        splices: Vec<Splice>,
        entries: Vec<EntryPoint>,
        sites: Vec<SiteReport>,
        planned_cross_edges: usize,
    ) -> RCfg {
        edges.sort();
        edges.dedup();
        RCfg { base, selectors, nodes, edges, splices, entries, sites, planned_cross_edges }
    }

    /// A single contract without splices.
    pub fn single(graph: &super::ContractGraph) -> RCfg {
        let nodes =
            graph.cfg.blocks().iter().map(|b| RNode { block: b.clone(), provenance: Provenance::Caller }).collect();
        let mut entries = Vec::new();
        if let Some(entry) = graph.cfg.entry() {
            entries.push(EntryPoint { block: entry, kind: EntryKind::Contract });
        }
        entries.extend(
            graph.selectors.iter().map(|s| EntryPoint { block: s.entry_block, kind: EntryKind::Selector(s.value) }),
        );
        RCfg::assemble(
            graph.cfg.clone(),
            graph.selectors.clone(),
            nodes,
            graph.cfg.edges().to_vec(),
            Vec::new(),
            entries,
            Vec::new(),
            0,
        )
    }

    /// The caller graph the splices were applied to.
    pub fn base(&self) -> &Cfg {
        &self.base
    }

    pub fn selectors(&self) -> &[Selector] {
        &self.selectors
    }

    pub fn nodes(&self) -> &[RNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn cross_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| e.kind.is_cross())
    }

    pub fn splices(&self) -> &[Splice] {
        &self.splices
    }

    pub fn entries(&self) -> &[EntryPoint] {
        &self.entries
    }

    pub fn sites(&self) -> &[SiteReport] {
        &self.sites
    }

    /// Cross edges added before unreachable splices were pruned.
    pub fn planned_cross_edges(&self) -> usize {
        self.planned_cross_edges
    }

    pub fn successors(&self, id: BlockId) -> &[Edge] {
        self.out_edges(id)
    }

    /// Removes every cross edge and spliced node and restores the removed
    /// fall-through edges.
    pub fn strip_cross_edges(&self) -> Cfg {
        let caller: BTreeSet<BlockId> = (0..self.base.len()).collect();
        let mut edges: Vec<Edge> = self
            .edges
            .iter()
            .copied()
            .filter(|e| !e.kind.is_cross() && caller.contains(&e.from) && caller.contains(&e.to))
            .collect();
        edges.extend(self.splices.iter().filter_map(|s| s.removed_edge));
        edges.sort();
        edges.dedup();
        let blocks: Vec<BasicBlock> = self.nodes[..self.base.len()].iter().map(|n| n.block.clone()).collect();
        Cfg::from_parts(blocks, edges, self.base.jump_issues().clone())
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        base: Cfg,
        selectors: Vec<Selector>,
        nodes: Vec<RNode>,
        edges: Vec<Edge>,
        splices: Vec<Splice>,
        entries: Vec<EntryPoint>,
        sites: Vec<SiteReport>,
        planned_cross_edges: usize,
    ) -> RCfg {
        RCfg::assemble(base, selectors, nodes, edges, splices, entries, sites, planned_cross_edges)
    }

    fn splice_for_call(&self, edge: &Edge) -> Option<&Splice> {
        self.splices.iter().find(|s| s.site_block == edge.from && s.callee_entry == edge.to)
    }
}

impl FlowGraph for RCfg {
    fn node(&self, id: BlockId) -> &BasicBlock {
        &self.nodes[id].block
    }

    fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn out_edges(&self, id: BlockId) -> &[Edge] {
        let start = self.edges.partition_point(|e| e.from < id);
        let end = self.edges.partition_point(|e| e.from <= id);
        &self.edges[start..end]
    }

    fn call_selector_matches(&self, edge: &Edge) -> bool {
        debug_assert_eq!(edge.kind, EdgeKind::Call);
        self.splice_for_call(edge).is_some_and(|s| s.selector == s.callee_selector)
    }
}
