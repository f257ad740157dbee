//! Path feasibility.
//!
//! A walk is feasible when every block executes on the symbolic stack without
//! underflow or overflow and every step between adjacent blocks is backed by
//! at least one edge whose condition holds. Edges not produced by JUMPI hold
//! by default; a taken jump additionally requires the popped target to be a
//! placeholder or the successor's entry offset, and a call edge requires the
//! site's selector to match the spliced callee function.
//!
//! Crossing a call edge starts the callee on a fresh stack; the matching
//! return link restores the caller's.

pub mod stack;

use std::fmt;

use primitive_types::U256;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cfg::{BasicBlock, BlockId, Cfg, Edge, EdgeKind};
use crate::disasm::OpClass;

pub use stack::{run_symbolic, stack_effect, StackCell, StackEffect, StackFault, StackViolation, SymbolicStack};

/// Graph view the validator walks over.
pub trait FlowGraph {
    fn node(&self, id: BlockId) -> &BasicBlock;
    fn node_count(&self) -> usize;
    /// Outgoing edges, sorted by `(to, kind)`.
    fn out_edges(&self, id: BlockId) -> &[Edge];
    fn call_selector_matches(&self, edge: &Edge) -> bool {
        let _ = edge;
        true
    }
}

impl FlowGraph for Cfg {
    fn node(&self, id: BlockId) -> &BasicBlock {
        self.block(id)
    }

    fn node_count(&self) -> usize {
        self.len()
    }

    fn out_edges(&self, id: BlockId) -> &[Edge] {
        let edges = self.edges();
        let start = edges.partition_point(|e| e.from < id);
        let end = edges.partition_point(|e| e.from <= id);
        &edges[start..end]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeCondition {
    /// Not directed by JUMPI.
    DefaultTrue,
    CheckedTrue,
    Violated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfeasibleReason {
    StackUnderflow { needed: usize, height: usize },
    StackOverflow,
    JumpTargetMismatch { target: U256, expected: usize },
    SelectorMismatch,
}

impl From<StackFault> for InfeasibleReason {
    fn from(fault: StackFault) -> Self {
        match fault {
            StackFault::Underflow { needed, height } => InfeasibleReason::StackUnderflow { needed, height },
            StackFault::Overflow => InfeasibleReason::StackOverflow,
        }
    }
}

impl InfeasibleReason {
    pub fn code(&self) -> &'static str {
        match self {
            InfeasibleReason::StackUnderflow { .. } => "stack_underflow",
            InfeasibleReason::StackOverflow => "stack_overflow",
            InfeasibleReason::JumpTargetMismatch { .. } => "jump_target_mismatch",
            InfeasibleReason::SelectorMismatch => "selector_mismatch",
        }
    }
}

impl fmt::Display for InfeasibleReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InfeasibleReason::StackUnderflow { needed, height } => {
                write!(f, "stack underflow (needs {needed}, height {height})")
            }
            InfeasibleReason::StackOverflow => f.write_str("stack overflow"),
            InfeasibleReason::JumpTargetMismatch { target, expected } => {
                write!(f, "jump target {target:#x} is not successor offset {expected:#x}")
            }
            InfeasibleReason::SelectorMismatch => f.write_str("call selector does not match callee"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Feasible,
    /// `step` indexes the path position whose block or outgoing edge failed.
    Infeasible {
        step: usize,
        offset: Option<usize>,
        reason: InfeasibleReason,
    },
}

impl Verdict {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Verdict::Feasible)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathCondition {
    pub path: Vec<BlockId>,
    /// One per evaluated adjacent pair; shorter than `path.len() - 1` when an
    /// earlier step failed.
    pub edge_conditions: Vec<EdgeCondition>,
    pub verdict: Verdict,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ValidationError {
    #[error("block {0} does not exist")]
    UnknownBlock(BlockId),
    #[error("no edge from block {from} to block {to}")]
    NotAWalk { from: BlockId, to: BlockId },
    #[error("empty path")]
    EmptyPath,
}

/// Failure at one step of a [`Walker`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepFailure {
    pub offset: Option<usize>,
    pub reason: InfeasibleReason,
}

/// Incremental validation state, cheap to clone at DFS branch points.
#[derive(Debug, Clone, Default)]
pub struct Walker {
    stack: SymbolicStack,
    frames: Vec<SymbolicStack>,
    jump_target: Option<StackCell>,
    last_class: Option<OpClass>,
}

impl Walker {
    pub fn new(initial: SymbolicStack) -> Self {
        Walker { stack: initial, ..Default::default() }
    }

    pub fn stack(&self) -> &SymbolicStack {
        &self.stack
    }

    pub fn depth(&self) -> usize {
        self.frames.len()
    }

    pub fn execute(&mut self, block: &BasicBlock) -> Result<(), StepFailure> {
        self.jump_target = None;
        for ins in &block.code {
            match self.stack.apply(ins) {
                Ok(target) => {
                    if target.is_some() {
                        self.jump_target = target;
                    }
                }
                Err(fault) => return Err(StepFailure { offset: Some(ins.offset), reason: fault.into() }),
            }
        }
        self.last_class = Some(block.terminator().class());
        Ok(())
    }

    fn condition(&self, graph: &impl FlowGraph, edge: &Edge) -> Result<EdgeCondition, InfeasibleReason> {
        match edge.kind {
            EdgeKind::FallThrough | EdgeKind::ReturnLink => Ok(EdgeCondition::DefaultTrue),
            EdgeKind::JumpNotTaken => Ok(EdgeCondition::CheckedTrue),
            EdgeKind::JumpTaken => {
                let expected = graph.node(edge.to).entry_offset;
                if let Some(StackCell::Constant(target)) = self.jump_target {
                    if target != U256::from(expected as u64) {
                        return Err(InfeasibleReason::JumpTargetMismatch { target, expected });
                    }
                }
                Ok(if self.last_class == Some(OpClass::ConditionalJump) {
                    EdgeCondition::CheckedTrue
                } else {
                    EdgeCondition::DefaultTrue
                })
            }
            EdgeKind::Call => {
                if graph.call_selector_matches(edge) {
                    Ok(EdgeCondition::DefaultTrue)
                } else {
                    Err(InfeasibleReason::SelectorMismatch)
                }
            }
        }
    }

    /// Takes the step `from -> to`, choosing the first edge between the two
    /// whose condition holds. `Ok(None)` means no such edge exists.
    pub fn cross(
        &mut self,
        graph: &impl FlowGraph,
        from: BlockId,
        to: BlockId,
    ) -> Result<Option<EdgeCondition>, StepFailure> {
        let mut first_failure = None;
        let mut any = false;
        for edge in graph.out_edges(from).iter().filter(|e| e.to == to) {
            any = true;
            match self.condition(graph, edge) {
                Ok(cond) => {
                    match edge.kind {
                        EdgeKind::Call => {
                            let caller = std::mem::take(&mut self.stack);
                            self.frames.push(caller);
                        }
                        EdgeKind::ReturnLink => {
                            self.stack = self.frames.pop().unwrap_or_default();
                        }
                        _ => {}
                    }
                    return Ok(Some(cond));
                }
                Err(reason) => {
                    first_failure.get_or_insert(reason);
                }
            }
        }
        match first_failure {
            Some(reason) if any => Err(StepFailure { offset: None, reason }),
            _ => Ok(None),
        }
    }
}

pub fn validate_path(graph: &impl FlowGraph, path: &[BlockId]) -> Result<PathCondition, ValidationError> {
    validate_path_from(graph, path, SymbolicStack::new())
}

pub fn validate_path_from(
    graph: &impl FlowGraph,
    path: &[BlockId],
    initial: SymbolicStack,
) -> Result<PathCondition, ValidationError> {
    if path.is_empty() {
        return Err(ValidationError::EmptyPath);
    }
    if let Some(bad) = path.iter().find(|id| **id >= graph.node_count()) {
        return Err(ValidationError::UnknownBlock(*bad));
    }
    for pair in path.windows(2) {
        if !graph.out_edges(pair[0]).iter().any(|e| e.to == pair[1]) {
            return Err(ValidationError::NotAWalk { from: pair[0], to: pair[1] });
        }
    }

    let mut walker = Walker::new(initial);
    let mut edge_conditions = Vec::with_capacity(path.len().saturating_sub(1));
    let fail = |step, failure: StepFailure, edge_conditions| PathCondition {
        path: path.to_vec(),
        edge_conditions,
        verdict: Verdict::Infeasible { step, offset: failure.offset, reason: failure.reason },
    };
    for (step, id) in path.iter().enumerate() {
        if let Err(failure) = walker.execute(graph.node(*id)) {
            return Ok(fail(step, failure, edge_conditions));
        }
        let Some(next) = path.get(step + 1) else { break };
        match walker.cross(graph, *id, *next) {
            Ok(Some(cond)) => edge_conditions.push(cond),
            Ok(None) => unreachable!("walk checked above"),
            Err(failure) => {
                edge_conditions.push(EdgeCondition::Violated);
                return Ok(fail(step, failure, edge_conditions));
            }
        }
    }
    Ok(PathCondition { path: path.to_vec(), edge_conditions, verdict: Verdict::Feasible })
}
