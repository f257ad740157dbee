//! Single-contract control-flow graph.
//!
//! Blocks start at offset 0, at every JUMPDEST and after every jump or
//! halting instruction. Jump targets are resolved per block by
//! [`emu::Emulator`]; a target that is not a known constant leaves the block
//! without a taken edge and records a [`JumpIssue`].

pub(crate) mod emu;
mod segments;
mod selectors;

use std::collections::BTreeMap;
use std::fmt;

use primitive_types::U256;
use serde::{Deserialize, Serialize};

use crate::disasm::{Instruction, OpClass};

pub use segments::{segment_functions, FunctionSegment};
pub use selectors::{extract_selectors, Selector, SelectorSource};

pub type BlockId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeType {
    Starting,
    Ending,
    Conditional,
    Plain,
}

impl NodeType {
    pub fn name(self) -> &'static str {
        match self {
            NodeType::Starting => "starting",
            NodeType::Ending => "ending",
            NodeType::Conditional => "conditional",
            NodeType::Plain => "plain",
        }
    }
}

/// A basic block, the `(id, type, code)` node of the graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicBlock {
    pub id: BlockId,
    pub node_type: NodeType,
    pub code: Vec<Instruction>,
    pub entry_offset: usize,
}

impl BasicBlock {
    pub fn terminator(&self) -> &Instruction {
        self.code.last().expect("blocks are never empty")
    }

    pub fn starts_with_jumpdest(&self) -> bool {
        self.code.first().is_some_and(|ins| ins.spec.is_jumpdest())
    }

    /// Offset just past the last instruction.
    pub fn end_offset(&self) -> usize {
        self.terminator().next_offset()
    }

    pub fn ends_with_return(&self) -> bool {
        self.terminator().spec.returns()
    }

    pub fn contains_call(&self) -> bool {
        self.code.iter().any(|ins| ins.class() == OpClass::Call)
    }

    /// Original bytes of the block, without truncation padding.
    pub fn bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for ins in &self.code {
            ins.encode_original_into(&mut out);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    FallThrough,
    JumpTaken,
    JumpNotTaken,
    Call,
    ReturnLink,
}

impl EdgeKind {
    pub fn name(self) -> &'static str {
        match self {
            EdgeKind::FallThrough => "fall_through",
            EdgeKind::JumpTaken => "jump_taken",
            EdgeKind::JumpNotTaken => "jump_not_taken",
            EdgeKind::Call => "call",
            EdgeKind::ReturnLink => "return_link",
        }
    }

    pub fn is_cross(self) -> bool {
        matches!(self, EdgeKind::Call | EdgeKind::ReturnLink)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub from: BlockId,
    pub to: BlockId,
    pub kind: EdgeKind,
}

impl Edge {
    pub fn new(from: BlockId, to: BlockId, kind: EdgeKind) -> Self {
        Edge { from, to, kind }
    }
}

/// Why a jump block has no taken edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JumpIssue {
    /// The target is not a compile-time constant under per-block tracking.
    Unresolved,
    /// The target is constant but does not land on a JUMPDEST.
    InvalidTarget(U256),
}

impl fmt::Display for JumpIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JumpIssue::Unresolved => f.write_str("unresolved jump"),
            JumpIssue::InvalidTarget(target) => write!(f, "invalid jump target {target:#x}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cfg {
    blocks: Vec<BasicBlock>,
    edges: Vec<Edge>,
    jump_issues: BTreeMap<BlockId, JumpIssue>,
    by_offset: BTreeMap<usize, BlockId>,
}

impl Cfg {
    /// Disassembled code to a resolved graph.
    pub fn build(instrs: &[Instruction]) -> Cfg {
        resolve_edges(partition_blocks(instrs))
    }

    pub fn from_bytecode(code: &[u8]) -> Cfg {
        Cfg::build(&crate::disasm::disassemble(code))
    }

    pub fn blocks(&self) -> &[BasicBlock] {
        &self.blocks
    }

    pub fn block(&self, id: BlockId) -> &BasicBlock {
        &self.blocks[id]
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Block at offset 0, when the code is nonempty.
    pub fn entry(&self) -> Option<BlockId> {
        if self.blocks.is_empty() {
            None
        } else {
            Some(0)
        }
    }

    /// Sorted by `(from, to, kind)`.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn successors(&self, id: BlockId) -> impl Iterator<Item = &Edge> {
        let start = self.edges.partition_point(|e| e.from < id);
        self.edges[start..].iter().take_while(move |e| e.from == id)
    }

    pub fn jump_issues(&self) -> &BTreeMap<BlockId, JumpIssue> {
        &self.jump_issues
    }

    pub fn block_at_offset(&self, offset: usize) -> Option<BlockId> {
        self.by_offset.get(&offset).copied()
    }

    pub fn instructions(&self) -> impl Iterator<Item = &Instruction> {
        self.blocks.iter().flat_map(|b| b.code.iter())
    }

    /// Re-partitions so that every call-class instruction terminates its
    /// block. Block ids are reassigned in offset order.
    pub fn split_at_calls(&self) -> Cfg {
        let instrs: Vec<Instruction> = self.instructions().cloned().collect();
        resolve_edges(partition(&instrs, true))
    }

    pub(crate) fn from_parts(
        blocks: Vec<BasicBlock>,
        mut edges: Vec<Edge>,
        jump_issues: BTreeMap<BlockId, JumpIssue>,
    ) -> Cfg {
        edges.sort();
        edges.dedup();
        let by_offset = blocks.iter().map(|b| (b.entry_offset, b.id)).collect();
        Cfg { blocks, edges, jump_issues, by_offset }
    }

    /// Blocks reachable from `roots`, following every edge kind.
    pub fn reachable_from(&self, roots: impl IntoIterator<Item = BlockId>) -> Vec<bool> {
        let mut seen = vec![false; self.blocks.len()];
        let mut stack: Vec<BlockId> = roots.into_iter().collect();
        while let Some(id) = stack.pop() {
            if std::mem::replace(&mut seen[id], true) {
                continue;
            }
            stack.extend(self.successors(id).map(|e| e.to).filter(|to| !seen[*to]));
        }
        seen
    }
}

fn node_type(id: BlockId, code: &[Instruction]) -> NodeType {
    match code.last().map(|ins| ins.class()) {
        Some(OpClass::Stop) => NodeType::Ending,
        Some(OpClass::ConditionalJump) => NodeType::Conditional,
        _ if id == 0 => NodeType::Starting,
        _ => NodeType::Plain,
    }
}

pub fn partition_blocks(instrs: &[Instruction]) -> Vec<BasicBlock> {
    partition(instrs, false)
}

fn partition(instrs: &[Instruction], split_calls: bool) -> Vec<BasicBlock> {
    let mut blocks = Vec::new();
    let mut current: Vec<Instruction> = Vec::new();
    for ins in instrs {
        if ins.spec.is_jumpdest() {
            flush(&mut current, &mut blocks);
        }
        current.push(ins.clone());
        let class = ins.class();
        if class.ends_block() || (split_calls && class == OpClass::Call) {
            flush(&mut current, &mut blocks);
        }
    }
    flush(&mut current, &mut blocks);
    blocks
}

fn flush(current: &mut Vec<Instruction>, blocks: &mut Vec<BasicBlock>) {
    if current.is_empty() {
        return;
    }
    let code = std::mem::take(current);
    let id = blocks.len();
    blocks.push(BasicBlock { id, node_type: node_type(id, &code), entry_offset: code[0].offset, code });
}

pub fn resolve_edges(blocks: Vec<BasicBlock>) -> Cfg {
    let by_offset: BTreeMap<usize, BlockId> = blocks.iter().map(|b| (b.entry_offset, b.id)).collect();
    let mut edges = Vec::new();
    let mut jump_issues = BTreeMap::new();
    let mut carried: Option<Vec<emu::Cell>> = None;

    for block in &blocks {
        // a block split off after a call is entered only by fall-through, so
        // the tracked stack carries over
        let inherited = if block.starts_with_jumpdest() { None } else { carried.take() };
        let mut emulator = emu::Emulator::with_stack(inherited.unwrap_or_default());
        emulator.run(&block.code);

        let next = blocks.get(block.id + 1).map(|b| b.id);
        let term = block.terminator();
        match term.class() {
            OpClass::Jump | OpClass::ConditionalJump => {
                let target = emulator.jump_target.clone().unwrap_or(emu::Cell::Unknown);
                match target.constant() {
                    Some(value) => {
                        let dest = (value <= U256::from(usize::MAX as u64))
                            .then(|| by_offset.get(&(value.as_u64() as usize)).copied())
                            .flatten()
                            .filter(|id| blocks[*id].starts_with_jumpdest());
                        match dest {
                            Some(to) => edges.push(Edge::new(block.id, to, EdgeKind::JumpTaken)),
                            None => {
                                jump_issues.insert(block.id, JumpIssue::InvalidTarget(value));
                            }
                        }
                    }
                    None => {
                        jump_issues.insert(block.id, JumpIssue::Unresolved);
                    }
                }
                if term.class() == OpClass::ConditionalJump {
                    if let Some(to) = next {
                        edges.push(Edge::new(block.id, to, EdgeKind::JumpNotTaken));
                    }
                }
            }
            OpClass::Stop => {}
            OpClass::Call => {
                if let Some(to) = next {
                    edges.push(Edge::new(block.id, to, EdgeKind::FallThrough));
                }
                carried = Some(emulator.stack);
            }
            OpClass::JumpDest | OpClass::Plain => {
                if let Some(to) = next {
                    edges.push(Edge::new(block.id, to, EdgeKind::FallThrough));
                }
            }
        }
    }
    edges.sort();
    edges.dedup();
    Cfg { blocks, edges, jump_issues, by_offset }
}
