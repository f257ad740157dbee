//! Data-path enumeration.
//!
//! Depth-first search from every entry of a connected graph, successors in
//! ascending block-id order, validating incrementally as the walk grows.
//! A walk is emitted when it reaches a block without successors, or when the
//! limits stop every continuation; walks that fail validation are dropped.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cfg::BlockId;
use crate::connector::{EntryKind, RCfg};
use crate::disasm::Instruction;
use crate::validator::{FlowGraph, InfeasibleReason, StepFailure, SymbolicStack, Walker};

/// Block executions allowed per requested path before an entry's search
/// gives up.
const STEPS_PER_PATH: usize = 4096;
/// Rejected walks kept per entry for reporting.
const MAX_REJECTED_PER_ENTRY: usize = 256;

/// Class tag carried by labelled paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    AccessControl,
    FlashLoan,
    Negative,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::AccessControl, Label::FlashLoan, Label::Negative];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::AccessControl => "access_control",
            Label::FlashLoan => "flash_loan",
            Label::Negative => "negative",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Label::ALL.into_iter().find(|l| l.as_str() == s).ok_or_else(|| format!("unknown label `{s}`"))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("path limit `{0}` must be positive")]
pub struct LimitError(pub &'static str);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathLimits {
    pub max_paths_per_entry: usize,
    /// In tokens.
    pub max_path_length: usize,
    /// Maximum visits of one block within one path.
    pub max_block_revisits: usize,
}

impl Default for PathLimits {
    fn default() -> Self {
        PathLimits { max_paths_per_entry: 64, max_path_length: 2048, max_block_revisits: 2 }
    }
}

impl PathLimits {
    pub fn new(
        max_paths_per_entry: usize,
        max_path_length: usize,
        max_block_revisits: usize,
    ) -> Result<Self, LimitError> {
        let limits = PathLimits { max_paths_per_entry, max_path_length, max_block_revisits };
        limits.validate()?;
        Ok(limits)
    }

    pub fn validate(&self) -> Result<(), LimitError> {
        if self.max_paths_per_entry == 0 {
            return Err(LimitError("max_paths_per_entry"));
        }
        if self.max_path_length == 0 {
            return Err(LimitError("max_path_length"));
        }
        if self.max_block_revisits == 0 {
            return Err(LimitError("max_block_revisits"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataPath {
    /// Content hash of `tokens`.
    pub id: String,
    pub blocks: Vec<BlockId>,
    pub tokens: Vec<String>,
    pub entry: EntryKind,
    pub label: Option<Label>,
    /// Manifest event the path was collected from.
    pub event_id: Option<String>,
    /// Cut short by a limit rather than ending at a sink.
    pub truncated: bool,
}

/// A candidate walk that failed validation at `step`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedWalk {
    pub entry: EntryKind,
    pub blocks: Vec<BlockId>,
    pub step: usize,
    pub failure: StepFailure,
}

impl RejectedWalk {
    pub fn reason(&self) -> InfeasibleReason {
        self.failure.reason
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Enumeration {
    pub paths: Vec<DataPath>,
    pub rejected: Vec<RejectedWalk>,
}

pub fn instruction_tokens(ins: &Instruction, out: &mut Vec<String>) {
    out.push(ins.mnemonic().to_string());
    if ins.spec.immediate_len == 0 {
        return;
    }
    let value = ins.push_value().unwrap_or_default();
    let operand = if value < 256.into() {
        format!("0x{:02x}", value.low_u32())
    } else if ins.spec.immediate_len == 4 {
        format!("SEL_{:08x}", value.low_u32())
    } else {
        "LARGECONST".to_string()
    };
    out.push(operand);
}

/// Mnemonic per instruction plus one bucketed operand token per PUSH
/// immediate.
pub fn tokenize<'a>(instrs: impl IntoIterator<Item = &'a Instruction>) -> Vec<String> {
    let mut out = Vec::new();
    for ins in instrs {
        instruction_tokens(ins, &mut out);
    }
    out
}

pub fn path_id(tokens: &[String]) -> String {
    let mut hasher = Sha256::new();
    for tok in tokens {
        hasher.update(tok.as_bytes());
        hasher.update(b"\n");
    }
    hex::encode(&hasher.finalize()[..8])
}

/// Outcome of one candidate walk, as exported next to the paths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub path_id: String,
    pub verdict: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failing_step: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl Enumeration {
    /// Feasible records for emitted paths, then infeasible ones for rejected
    /// walks (identified by the tokens of the walk up to the failing block).
    pub fn verdict_records(&self, rcfg: &RCfg) -> Vec<VerdictRecord> {
        let mut out: Vec<VerdictRecord> = self
            .paths
            .iter()
            .map(|p| VerdictRecord {
                path_id: p.id.clone(),
                verdict: "feasible".into(),
                failing_step: None,
                reason: None,
            })
            .collect();
        for r in &self.rejected {
            let tokens = tokenize(r.blocks.iter().flat_map(|b| &rcfg.nodes()[*b].block.code));
            out.push(VerdictRecord {
                path_id: path_id(&tokens),
                verdict: "infeasible".into(),
                failing_step: Some(r.step),
                reason: Some(r.reason().code().to_string()),
            });
        }
        out
    }
}

pub fn enumerate_paths(rcfg: &RCfg, limits: &PathLimits) -> Vec<DataPath> {
    enumerate_with_report(rcfg, limits).paths
}

/// Enumerates every entry in parallel, then merges in entry order and drops
/// duplicate ids.
pub fn enumerate_with_report(rcfg: &RCfg, limits: &PathLimits) -> Enumeration {
    let block_tokens: Vec<Vec<String>> = rcfg.nodes().iter().map(|n| tokenize(&n.block.code)).collect();
    let per_entry: Vec<Enumeration> = rcfg
        .entries()
        .par_iter()
        .map(|entry| {
            let mut search = Search {
                rcfg,
                limits,
                tokens: &block_tokens,
                entry: entry.kind,
                out: Enumeration::default(),
                visits: HashMap::new(),
                walk: Vec::new(),
                token_len: 0,
                budget: limits.max_paths_per_entry.saturating_mul(STEPS_PER_PATH),
            };
            search.run(entry.block);
            search.out
        })
        .collect();

    let mut seen = BTreeSet::new();
    let mut merged = Enumeration::default();
    for part in per_entry {
        merged.paths.extend(part.paths.into_iter().filter(|p| seen.insert(p.id.clone())));
        merged.rejected.extend(part.rejected);
    }
    merged
}

struct Search<'a> {
    rcfg: &'a RCfg,
    limits: &'a PathLimits,
    tokens: &'a [Vec<String>],
    entry: EntryKind,
    out: Enumeration,
    visits: HashMap<BlockId, usize>,
    walk: Vec<BlockId>,
    token_len: usize,
    budget: usize,
}

enum Step {
    Explored,
    Blocked,
    Rejected,
}

impl Search<'_> {
    fn done(&self) -> bool {
        self.out.paths.len() >= self.limits.max_paths_per_entry || self.budget == 0
    }

    fn run(&mut self, root: BlockId) {
        let walker = Walker::new(SymbolicStack::new());
        if self.tokens[root].len() > self.limits.max_path_length {
            debug!("entry block {root} alone exceeds {} tokens", self.limits.max_path_length);
            return;
        }
        self.visit(root, walker);
    }

    fn reject(&mut self, failure: StepFailure) {
        if self.out.rejected.len() < MAX_REJECTED_PER_ENTRY {
            self.out.rejected.push(RejectedWalk {
                entry: self.entry,
                blocks: self.walk.clone(),
                step: self.walk.len() - 1,
                failure,
            });
        }
    }

    fn emit(&mut self, truncated: bool) {
        let tokens: Vec<String> = self.walk.iter().flat_map(|b| self.tokens[*b].iter().cloned()).collect();
        let id = path_id(&tokens);
        if self.out.paths.iter().any(|p| p.id == id) {
            return;
        }
        let blocks = self.walk.clone();
        self.out.paths.push(DataPath { id, blocks, tokens, entry: self.entry, label: None, event_id: None, truncated });
    }

    /// Pushes `node` onto the walk, executes it and recurses.
    fn visit(&mut self, node: BlockId, mut walker: Walker) {
        self.budget = self.budget.saturating_sub(1);
        self.walk.push(node);
        *self.visits.entry(node).or_default() += 1;
        self.token_len += self.tokens[node].len();

        match walker.execute(self.rcfg.node(node)) {
            Err(failure) => self.reject(failure),
            Ok(()) => self.expand(node, &walker),
        }

        self.token_len -= self.tokens[node].len();
        *self.visits.get_mut(&node).expect("visited") -= 1;
        self.walk.pop();
    }

    fn expand(&mut self, node: BlockId, walker: &Walker) {
        let succs: BTreeSet<BlockId> = self.rcfg.out_edges(node).iter().map(|e| e.to).collect();
        if succs.is_empty() {
            self.emit(false);
            return;
        }
        let mut blocked = false;
        let mut progressed = false;
        for next in succs {
            if self.done() {
                return;
            }
            match self.step(node, next, walker) {
                Step::Explored | Step::Rejected => progressed = true,
                Step::Blocked => blocked = true,
            }
        }
        if blocked && !progressed && !self.done() {
            self.emit(true);
        }
    }

    fn step(&mut self, node: BlockId, next: BlockId, walker: &Walker) -> Step {
        let visits = self.visits.get(&next).copied().unwrap_or(0);
        if visits >= self.limits.max_block_revisits
            || self.token_len + self.tokens[next].len() > self.limits.max_path_length
        {
            return Step::Blocked;
        }
        let mut branch = walker.clone();
        match branch.cross(self.rcfg, node, next) {
            Ok(Some(_)) => {
                self.visit(next, branch);
                Step::Explored
            }
            Ok(None) => Step::Blocked,
            Err(failure) => {
                self.walk.push(next);
                self.reject(failure);
                self.walk.pop();
                Step::Rejected
            }
        }
    }
}
