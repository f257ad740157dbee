//! Versioned JSON documents for graphs, plus Graphviz output.
//!
//! Node code is stored as hex and re-disassembled on import; the `opcodes`
//! listing is written for readers and ignored when loading.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use primitive_types::U256;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cfg::{BasicBlock, BlockId, Cfg, Edge, JumpIssue, NodeType, Selector, SelectorSource};
use crate::connector::{ContractGraph, EntryKind, EntryPoint, Provenance, RCfg, RNode, SiteReport, Splice};
use crate::disasm::disassemble_from;

pub const DOCUMENT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("document version {found}, expected {DOCUMENT_VERSION}")]
    Version { found: u32 },
    #[error("expected a `{expected}` document, found `{found}`")]
    Kind { expected: &'static str, found: String },
    #[error("malformed document: {0}")]
    Malformed(String),
}

/// Serde helper for 4-byte selectors as `0x`-prefixed hex.
pub(crate) mod hex4 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8; 4], s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&format_args!("0x{}", hex::encode(v)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 4], D::Error> {
        let s = String::deserialize(d)?;
        parse(&s).ok_or_else(|| serde::de::Error::custom(format!("bad selector `{s}`")))
    }

    pub fn parse(s: &str) -> Option<[u8; 4]> {
        let mut out = [0u8; 4];
        let digits = s.strip_prefix("0x")?;
        hex::decode_to_slice(digits, &mut out).ok()?;
        Some(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeDoc {
    pub id: BlockId,
    pub entry_offset: usize,
    pub node_type: NodeType,
    pub code: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub opcodes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectorDoc {
    #[serde(with = "hex4")]
    pub selector: [u8; 4],
    pub entry_block: BlockId,
    pub source: SelectorSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JumpIssueDoc {
    pub block: BlockId,
    pub issue: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CfgDocument {
    pub format_version: u32,
    pub kind: String,
    pub nodes: Vec<NodeDoc>,
    pub edges: Vec<Edge>,
    pub selectors: Vec<SelectorDoc>,
    pub jump_issues: Vec<JumpIssueDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryDoc {
    pub block: BlockId,
    pub kind: EntryKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RcfgDocument {
    pub format_version: u32,
    pub kind: String,
    /// Nodes `0..caller_nodes` belong to the caller.
    pub caller_nodes: usize,
    pub nodes: Vec<NodeDoc>,
    pub edges: Vec<Edge>,
    pub cross_edges: Vec<Edge>,
    pub selectors: Vec<SelectorDoc>,
    pub entries: Vec<EntryDoc>,
    pub splices: Vec<Splice>,
    pub sites: Vec<SiteReport>,
    pub planned_cross_edges: usize,
    pub jump_issues: Vec<JumpIssueDoc>,
}

fn node_doc(block: &BasicBlock, provenance: Option<Provenance>) -> NodeDoc {
    NodeDoc {
        id: block.id,
        entry_offset: block.entry_offset,
        node_type: block.node_type,
        code: hex::encode(block.bytes()),
        opcodes: block.code.iter().map(ToString::to_string).collect(),
        provenance,
    }
}

fn node_from_doc(doc: &NodeDoc, expected_id: BlockId) -> Result<BasicBlock, DocumentError> {
    if doc.id != expected_id {
        return Err(DocumentError::Malformed(format!("node {} listed at position {expected_id}", doc.id)));
    }
    let bytes = hex::decode(&doc.code).map_err(|e| DocumentError::Malformed(format!("node {}: {e}", doc.id)))?;
    if bytes.is_empty() {
        return Err(DocumentError::Malformed(format!("node {} has no code", doc.id)));
    }
    Ok(BasicBlock {
        id: doc.id,
        node_type: doc.node_type,
        code: disassemble_from(&bytes, doc.entry_offset),
        entry_offset: doc.entry_offset,
    })
}

fn selector_docs(selectors: &[Selector]) -> Vec<SelectorDoc> {
    selectors.iter().map(|s| SelectorDoc { selector: s.value, entry_block: s.entry_block, source: s.source }).collect()
}

fn selectors_from_docs(docs: &[SelectorDoc]) -> Vec<Selector> {
    docs.iter().map(|d| Selector { value: d.selector, source: d.source, entry_block: d.entry_block }).collect()
}

fn issue_docs(cfg: &Cfg) -> Vec<JumpIssueDoc> {
    cfg.jump_issues()
        .iter()
        .map(|(&block, issue)| match issue {
            JumpIssue::Unresolved => JumpIssueDoc { block, issue: "unresolved".into(), target: None },
            JumpIssue::InvalidTarget(t) => {
                JumpIssueDoc { block, issue: "invalid_target".into(), target: Some(format!("{t:#x}")) }
            }
        })
        .collect()
}

fn issues_from_docs(docs: &[JumpIssueDoc]) -> Result<BTreeMap<BlockId, JumpIssue>, DocumentError> {
    let mut out = BTreeMap::new();
    for d in docs {
        let issue = match (d.issue.as_str(), &d.target) {
            ("unresolved", None) => JumpIssue::Unresolved,
            ("invalid_target", Some(t)) => {
                let digits = t.strip_prefix("0x").unwrap_or(t);
                let target = U256::from_str_radix(digits, 16)
                    .map_err(|_| DocumentError::Malformed(format!("jump target `{t}`")))?;
                JumpIssue::InvalidTarget(target)
            }
            _ => return Err(DocumentError::Malformed(format!("jump issue `{}` on block {}", d.issue, d.block))),
        };
        out.insert(d.block, issue);
    }
    Ok(out)
}

fn check_edges(edges: &[Edge], n: usize) -> Result<(), DocumentError> {
    match edges.iter().find(|e| e.from >= n || e.to >= n) {
        Some(e) => Err(DocumentError::Malformed(format!("edge {} -> {} leaves the graph", e.from, e.to))),
        None => Ok(()),
    }
}

fn check_header(version: u32, kind: &str, expected: &'static str) -> Result<(), DocumentError> {
    if version != DOCUMENT_VERSION {
        return Err(DocumentError::Version { found: version });
    }
    if kind != expected {
        return Err(DocumentError::Kind { expected, found: kind.to_string() });
    }
    Ok(())
}

pub fn cfg_document(graph: &ContractGraph) -> CfgDocument {
    CfgDocument {
        format_version: DOCUMENT_VERSION,
        kind: "cfg".into(),
        nodes: graph.cfg.blocks().iter().map(|b| node_doc(b, None)).collect(),
        edges: graph.cfg.edges().to_vec(),
        selectors: selector_docs(&graph.selectors),
        jump_issues: issue_docs(&graph.cfg),
    }
}

/// Rebuilds the graph; segments are recomputed from the stored selectors.
pub fn cfg_from_document(doc: &CfgDocument) -> Result<ContractGraph, DocumentError> {
    check_header(doc.format_version, &doc.kind, "cfg")?;
    let blocks = doc.nodes.iter().enumerate().map(|(k, n)| node_from_doc(n, k)).collect::<Result<Vec<_>, _>>()?;
    check_edges(&doc.edges, blocks.len())?;
    let cfg = Cfg::from_parts(blocks, doc.edges.clone(), issues_from_docs(&doc.jump_issues)?);
    let selectors = selectors_from_docs(&doc.selectors);
    let segments = crate::cfg::segment_functions(&cfg, &selectors);
    Ok(ContractGraph { cfg, selectors, segments })
}

pub fn rcfg_document(rcfg: &RCfg) -> RcfgDocument {
    RcfgDocument {
        format_version: DOCUMENT_VERSION,
        kind: "rcfg".into(),
        caller_nodes: rcfg.base().len(),
        nodes: rcfg.nodes().iter().map(|n| node_doc(&n.block, Some(n.provenance))).collect(),
        edges: rcfg.edges().iter().filter(|e| !e.kind.is_cross()).copied().collect(),
        cross_edges: rcfg.cross_edges().copied().collect(),
        selectors: selector_docs(rcfg.selectors()),
        entries: rcfg.entries().iter().map(|e| EntryDoc { block: e.block, kind: e.kind }).collect(),
        splices: rcfg.splices().to_vec(),
        sites: rcfg.sites().to_vec(),
        planned_cross_edges: rcfg.planned_cross_edges(),
        jump_issues: issue_docs(rcfg.base()),
    }
}

pub fn rcfg_from_document(doc: &RcfgDocument) -> Result<RCfg, DocumentError> {
    check_header(doc.format_version, &doc.kind, "rcfg")?;
    if doc.caller_nodes > doc.nodes.len() {
        return Err(DocumentError::Malformed("more caller nodes than nodes".into()));
    }
    let mut nodes = Vec::with_capacity(doc.nodes.len());
    for (k, n) in doc.nodes.iter().enumerate() {
        let provenance = n.provenance.unwrap_or(Provenance::Caller);
        nodes.push(RNode { block: node_from_doc(n, k)?, provenance });
    }
    let edges: Vec<Edge> = doc.edges.iter().chain(&doc.cross_edges).copied().collect();
    check_edges(&edges, nodes.len())?;
    if let Some(e) = doc.entries.iter().find(|e| e.block >= nodes.len()) {
        return Err(DocumentError::Malformed(format!("entry block {} out of range", e.block)));
    }

    // the caller graph is the non-cross caller edges plus the fall-throughs
    // the splices removed
    let caller = doc.caller_nodes;
    let mut base_edges: Vec<Edge> =
        doc.edges.iter().copied().filter(|e| !e.kind.is_cross() && e.from < caller && e.to < caller).collect();
    base_edges.extend(doc.splices.iter().filter_map(|s| s.removed_edge));
    let base_blocks = nodes[..caller].iter().map(|n| n.block.clone()).collect();
    let base = Cfg::from_parts(base_blocks, base_edges, issues_from_docs(&doc.jump_issues)?);

    Ok(RCfg::from_parts(
        base,
        selectors_from_docs(&doc.selectors),
        nodes,
        edges,
        doc.splices.clone(),
        doc.entries.iter().map(|e| EntryPoint { block: e.block, kind: e.kind }).collect(),
        doc.sites.clone(),
        doc.planned_cross_edges,
    ))
}

pub fn to_json<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents serialize");
    s.push('\n');
    s
}

/// Reads either document kind, returning a connected graph. A plain CFG
/// document becomes an unspliced graph.
pub fn load_graph(text: &str) -> Result<RCfg, DocumentError> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    match value.get("kind").and_then(|k| k.as_str()) {
        Some("cfg") => Ok(RCfg::single(&cfg_from_document(&serde_json::from_value(value)?)?)),
        Some("rcfg") => rcfg_from_document(&serde_json::from_value(value)?),
        other => Err(DocumentError::Kind { expected: "cfg or rcfg", found: other.unwrap_or("").to_string() }),
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn dot_node(out: &mut String, block: &BasicBlock, fill: Option<&str>) {
    let mut label = format!("#{} @{:#x}\\l", block.id, block.entry_offset);
    for ins in &block.code {
        label.push_str(&dot_escape(&ins.to_string()));
        label.push_str("\\l");
    }
    let style = fill.map(|c| format!(", style=filled, fillcolor=\"{c}\"")).unwrap_or_default();
    writeln!(out, "  n{} [label=\"{label}\"{style}];", block.id).expect("writing to a String");
}

fn dot_edge(out: &mut String, e: &Edge) {
    let style = if e.kind.is_cross() { ", style=dashed, color=\"red\"" } else { "" };
    writeln!(out, "  n{} -> n{} [label=\"{}\"{style}];", e.from, e.to, e.kind.name()).expect("writing to a String");
}

pub fn cfg_to_dot(cfg: &Cfg) -> String {
    let mut out = String::from("digraph cfg {\n  node [shape=box, fontname=\"monospace\"];\n");
    for b in cfg.blocks() {
        dot_node(&mut out, b, None);
    }
    for e in cfg.edges() {
        dot_edge(&mut out, e);
    }
    out.push_str("}\n");
    out
}

/// Callee copies are shaded; cross edges are dashed.
pub fn rcfg_to_dot(rcfg: &RCfg) -> String {
    let mut out = String::from("digraph rcfg {\n  node [shape=box, fontname=\"monospace\"];\n");
    for n in rcfg.nodes() {
        let fill = matches!(n.provenance, Provenance::Callee { .. }).then_some("lightgrey");
        dot_node(&mut out, &n.block, fill);
    }
    for e in rcfg.edges() {
        dot_edge(&mut out, e);
    }
    out.push_str("}\n");
    out
}
