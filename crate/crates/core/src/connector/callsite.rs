use std::collections::BTreeSet;
use std::fmt;

use primitive_types::U256;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cfg::emu::{Cell, Emulator};
use crate::cfg::{BlockId, Cfg, EdgeKind, FunctionSegment};
use crate::disasm::OpClass;
use crate::validator::{SymbolicStack, Walker};

/// Longest chain of single-predecessor blocks scanned for calldata
/// construction before a call.
const PREAMBLE_BLOCKS: usize = 16;
/// Search budget for the feasibility witness of a call site.
const WITNESS_STEPS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CallKind {
    Call,
    Callcode,
    Delegatecall,
    Staticcall,
}

impl CallKind {
    pub fn from_byte(byte: u8) -> Option<Self> {
        match byte {
            0xf1 => Some(CallKind::Call),
            0xf2 => Some(CallKind::Callcode),
            0xf4 => Some(CallKind::Delegatecall),
            0xfa => Some(CallKind::Staticcall),
            _ => None,
        }
    }

    pub fn mnemonic(self) -> &'static str {
        match self {
            CallKind::Call => "CALL",
            CallKind::Callcode => "CALLCODE",
            CallKind::Delegatecall => "DELEGATECALL",
            CallKind::Staticcall => "STATICCALL",
        }
    }
}

/// Selector recovered from the calldata built ahead of a call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CallSelector {
    Static([u8; 4]),
    /// The stored word derives from the caller's own calldata.
    Dynamic,
    /// The call passes zero-length calldata.
    EmptyCalldata,
    NotFound,
}

impl CallSelector {
    pub fn value(&self) -> Option<[u8; 4]> {
        match self {
            CallSelector::Static(v) => Some(*v),
            _ => None,
        }
    }
}

impl fmt::Display for CallSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CallSelector::Static(v) => write!(f, "0x{}", hex::encode(v)),
            CallSelector::Dynamic => f.write_str("dynamic"),
            CallSelector::EmptyCalldata => f.write_str("empty_calldata"),
            CallSelector::NotFound => f.write_str("not_found"),
        }
    }
}

impl Serialize for CallSelector {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CallSelector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        match s.as_str() {
            "dynamic" => Ok(CallSelector::Dynamic),
            "empty_calldata" => Ok(CallSelector::EmptyCalldata),
            "not_found" => Ok(CallSelector::NotFound),
            other => crate::document::hex4::parse(other)
                .map(CallSelector::Static)
                .ok_or_else(|| serde::de::Error::custom(format!("bad call selector `{other}`"))),
        }
    }
}

/// A call-terminated block inside a function segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallSite {
    pub block_id: BlockId,
    pub call_kind: CallKind,
    pub call_offset: usize,
    pub resolved_selector: CallSelector,
    /// Segment blocks before the call (`f_p`), including the call block.
    pub before: Vec<BlockId>,
    /// Segment blocks reachable after the call (`f_n`).
    pub after: Vec<BlockId>,
    /// Fall-through successor of the call block.
    pub resume: Option<BlockId>,
}

/// One call site per call-terminated block of `seg`. `cfg` must come from
/// [`Cfg::split_at_calls`], so that calls only ever end blocks.
pub fn split_at_calls(seg: &FunctionSegment, cfg: &Cfg) -> Vec<CallSite> {
    if !seg.has_calls {
        return Vec::new();
    }
    let mut sites = Vec::new();
    for &id in &seg.blocks {
        let block = cfg.block(id);
        debug_assert!(
            block.code[..block.code.len() - 1].iter().all(|i| i.class() != OpClass::Call),
            "call in the middle of block {id}; split the graph first"
        );
        let term = block.terminator();
        let Some(call_kind) = CallKind::from_byte(term.spec.byte_value) else { continue };
        let resume = cfg.successors(id).find(|e| e.kind == EdgeKind::FallThrough).map(|e| e.to);

        let mut after = BTreeSet::new();
        let mut stack: Vec<BlockId> = resume.into_iter().filter(|r| seg.contains(*r)).collect();
        while let Some(b) = stack.pop() {
            if b == id || !after.insert(b) {
                continue;
            }
            stack.extend(cfg.successors(b).map(|e| e.to).filter(|t| seg.contains(*t)));
        }
        let before: Vec<BlockId> = seg.blocks.iter().copied().filter(|b| !after.contains(b)).collect();

        let mut site = CallSite {
            block_id: id,
            call_kind,
            call_offset: term.offset,
            resolved_selector: CallSelector::NotFound,
            before,
            after: after.into_iter().collect(),
            resume,
        };
        site.resolved_selector = resolve_call_selector(&site, cfg);
        sites.push(site);
    }
    sites
}

fn predecessors(cfg: &Cfg, id: BlockId) -> Vec<BlockId> {
    cfg.edges().iter().filter(|e| e.to == id).map(|e| e.from).collect()
}

fn selector_in_word(word: U256) -> Option<[u8; 4]> {
    let low_mask = (U256::one() << 224) - 1;
    if word.is_zero() || !(word & low_mask).is_zero() {
        return None;
    }
    Some(((word >> 224).low_u32()).to_be_bytes())
}

/// Recovers the selector stored to memory ahead of the call, scanning the
/// call block and its chain of unique predecessors inside `f_p`.
pub fn resolve_call_selector(site: &CallSite, cfg: &Cfg) -> CallSelector {
    let mut window = vec![site.block_id];
    let mut current = site.block_id;
    while window.len() < PREAMBLE_BLOCKS {
        let preds = predecessors(cfg, current);
        match preds.as_slice() {
            [p] if site.before.contains(p) && !window.contains(p) => {
                window.push(*p);
                current = *p;
            }
            _ => break,
        }
    }
    window.reverse();

    let mut emulator = Emulator::default();
    for id in window {
        emulator.run(&cfg.block(id).code);
    }
    let Some(args) = emulator.call_args.as_ref() else {
        return CallSelector::NotFound;
    };
    if args.args_len.constant().is_some_and(|len| len.is_zero()) {
        return CallSelector::EmptyCalldata;
    }

    let at_args = |offset: &Cell| match (offset.constant(), args.args_offset.constant()) {
        (Some(a), Some(b)) => a == b,
        _ => false,
    };
    let mut stores: Vec<_> = emulator.stores.iter().rev().collect();
    // prefer a store at the exact argument offset, then the latest one
    stores.sort_by_key(|s| !at_args(&s.offset));
    for store in stores {
        if let Some(sel) = store.value.constant().and_then(selector_in_word) {
            return CallSelector::Static(sel);
        }
        if store.value.is_calldata_derived() {
            return CallSelector::Dynamic;
        }
    }
    CallSelector::NotFound
}

/// Path validation for a split function: some walk from the segment entry
/// through `f_p` reaches the call block and continues into the resume block
/// without a stack violation.
pub(super) fn site_is_feasible(cfg: &Cfg, seg: &FunctionSegment, site: &CallSite) -> bool {
    let mut budget = WITNESS_STEPS;
    let mut on_path = BTreeSet::new();
    search(cfg, site, seg.entry_block, Walker::new(SymbolicStack::new()), &mut on_path, &mut budget)
}

fn search(
    cfg: &Cfg,
    site: &CallSite,
    at: BlockId,
    mut walker: Walker,
    on_path: &mut BTreeSet<BlockId>,
    budget: &mut usize,
) -> bool {
    if *budget == 0 {
        return false;
    }
    *budget -= 1;
    if walker.execute(cfg.block(at)).is_err() {
        return false;
    }
    if at == site.block_id {
        let Some(resume) = site.resume else { return true };
        return matches!(walker.cross(cfg, at, resume), Ok(Some(_))) && walker.execute(cfg.block(resume)).is_ok();
    }
    on_path.insert(at);
    let mut found = false;
    let nexts: BTreeSet<BlockId> = cfg.successors(at).map(|e| e.to).collect();
    for next in nexts {
        if on_path.contains(&next) || !site.before.contains(&next) {
            continue;
        }
        let mut branch = walker.clone();
        if matches!(branch.cross(cfg, at, next), Ok(Some(_))) && search(cfg, site, next, branch, on_path, budget) {
            found = true;
            break;
        }
    }
    on_path.remove(&at);
    found
}
