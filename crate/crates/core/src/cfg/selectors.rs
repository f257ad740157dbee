use serde::{Deserialize, Serialize};

use super::emu::{Cell, Emulator};
use super::{BlockId, Cfg, EdgeKind};
use crate::disasm::OpClass;

/// How the dispatcher derives the selector from calldata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectorSource {
    /// A PUSH4 literal compared with EQ; the calldata reduction was not seen.
    DispatcherPush4,
    /// `CALLDATALOAD` divided by 2^224 or masked with `0xffffffff`.
    MaskedPattern,
    /// `CALLDATALOAD` shifted right by 0xe0.
    ShrPattern,
}

impl SelectorSource {
    pub fn name(self) -> &'static str {
        match self {
            SelectorSource::DispatcherPush4 => "dispatcher_push4",
            SelectorSource::MaskedPattern => "masked_pattern",
            SelectorSource::ShrPattern => "shr_pattern",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Selector {
    pub value: [u8; 4],
    pub source: SelectorSource,
    pub entry_block: BlockId,
}

impl Selector {
    pub fn hex(&self) -> String {
        format!("0x{}", hex::encode(self.value))
    }
}

/// Recognizes dispatcher comparisons: a block ending in JUMPI whose
/// condition is `EQ(selector_literal, x)` and whose taken edge is resolved.
/// Duplicated selector values keep their first occurrence.
pub fn extract_selectors(cfg: &Cfg) -> Vec<Selector> {
    let mut candidates = Vec::new();
    let mut contract_pattern = None;

    for block in cfg.blocks() {
        let mut emulator = Emulator::default();
        emulator.run(&block.code);
        if contract_pattern.is_none() {
            contract_pattern = emulator.patterns.first().copied();
        }
        if block.terminator().class() != OpClass::ConditionalJump {
            continue;
        }
        let Some(Cell::Compare { selector, source }) = emulator.jump_condition else {
            continue;
        };
        let Some(taken) = cfg.successors(block.id).find(|e| e.kind == EdgeKind::JumpTaken) else {
            continue;
        };
        candidates.push((selector.to_be_bytes(), source, taken.to));
    }

    let mut out: Vec<Selector> = Vec::new();
    for (value, source, entry_block) in candidates {
        if out.iter().any(|s| s.value == value) {
            continue;
        }
        let source = source.or(contract_pattern).unwrap_or(SelectorSource::DispatcherPush4);
        out.push(Selector { value, source, entry_block });
    }
    out
}
