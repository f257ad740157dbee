//! Per-block constant tracking.
//!
//! Only PUSH constants are tracked precisely, flowing through DUP, SWAP, POP
//! and AND (plus the few shifts and products needed to recognize selector
//! words). Everything else yields [`Cell::Unknown`]. Reads below the bottom of
//! the block-local stack are unknown as well, since the incoming stack is not
//! modelled.

use primitive_types::U256;

use crate::disasm::Instruction;

use super::SelectorSource;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Cell {
    Unknown,
    /// `width` is the PUSH immediate length, 0 for folded values.
    Const {
        value: U256,
        width: u8,
    },
    /// A CALLDATALOAD result.
    Calldata {
        offset: Option<U256>,
    },
    /// The calldata word reduced to the 4-byte function selector.
    SelectorWord(SelectorSource),
    /// Result of EQ between a selector literal and another operand.
    Compare {
        selector: u32,
        source: Option<SelectorSource>,
    },
}

impl Cell {
    pub fn constant(&self) -> Option<U256> {
        match self {
            Cell::Const { value, .. } => Some(*value),
            _ => None,
        }
    }

    fn folded(value: U256) -> Cell {
        Cell::Const { value, width: 0 }
    }

    fn selector_literal(&self) -> Option<u32> {
        match self {
            Cell::Const { value, width: 3 | 4 } => Some(value.low_u32()),
            _ => None,
        }
    }

    pub fn is_calldata_derived(&self) -> bool {
        matches!(self, Cell::Calldata { .. } | Cell::SelectorWord(_))
    }
}

/// Memory write observed by MSTORE.
#[derive(Debug, Clone)]
pub(crate) struct Store {
    pub offset: Cell,
    pub value: Cell,
}

/// Operands observed at a call-class instruction.
#[derive(Debug, Clone)]
pub(crate) struct CallArgs {
    pub args_offset: Cell,
    pub args_len: Cell,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Emulator {
    pub stack: Vec<Cell>,
    pub stores: Vec<Store>,
    pub jump_target: Option<Cell>,
    pub jump_condition: Option<Cell>,
    pub call_args: Option<CallArgs>,
    pub patterns: Vec<SelectorSource>,
}

fn selector_shift() -> U256 {
    U256::one() << 224
}

impl Emulator {
    pub fn with_stack(stack: Vec<Cell>) -> Self {
        Emulator { stack, ..Default::default() }
    }

    fn pop(&mut self) -> Cell {
        self.stack.pop().unwrap_or(Cell::Unknown)
    }

    fn push(&mut self, cell: Cell) {
        self.stack.push(cell);
    }

    pub fn run(&mut self, code: &[Instruction]) {
        for ins in code {
            self.step(ins);
        }
    }

    pub fn step(&mut self, ins: &Instruction) {
        let spec = ins.spec;
        if spec.is_push() {
            let value = ins.push_value().unwrap_or_default();
            self.push(Cell::Const { value, width: spec.immediate_len });
            return;
        }
        if spec.is_dup() {
            let depth = spec.access_depth() as usize;
            let cell =
                if depth <= self.stack.len() { self.stack[self.stack.len() - depth].clone() } else { Cell::Unknown };
            self.push(cell);
            return;
        }
        if spec.is_swap() {
            let depth = spec.access_depth() as usize;
            let len = self.stack.len();
            if depth <= len {
                self.stack.swap(len - 1, len - depth);
            } else if len > 0 {
                // the old top sinks below the modelled region
                self.stack[len - 1] = Cell::Unknown;
            }
            return;
        }
        match spec.byte_value {
            0x50 => {
                self.pop();
            }
            0x16 => {
                let a = self.pop();
                let b = self.pop();
                let mask = U256::from(0xffff_ffffu64);
                let out = match (&a, &b) {
                    (Cell::Const { value: x, .. }, Cell::Const { value: y, .. }) => Cell::folded(*x & *y),
                    (Cell::SelectorWord(src), Cell::Const { value, .. })
                    | (Cell::Const { value, .. }, Cell::SelectorWord(src))
                        if *value == mask =>
                    {
                        Cell::SelectorWord(*src)
                    }
                    (Cell::Calldata { .. }, Cell::Const { value, .. })
                    | (Cell::Const { value, .. }, Cell::Calldata { .. })
                        if *value == mask =>
                    {
                        self.patterns.push(SelectorSource::MaskedPattern);
                        Cell::SelectorWord(SelectorSource::MaskedPattern)
                    }
                    _ => Cell::Unknown,
                };
                self.push(out);
            }
            0x17 => {
                let a = self.pop();
                let b = self.pop();
                self.push(match (a.constant(), b.constant()) {
                    (Some(x), Some(y)) => Cell::folded(x | y),
                    _ => Cell::Unknown,
                });
            }
            0x02 => {
                let a = self.pop();
                let b = self.pop();
                self.push(match (a.constant(), b.constant()) {
                    (Some(x), Some(y)) => Cell::folded(x.overflowing_mul(y).0),
                    _ => Cell::Unknown,
                });
            }
            0x04 => {
                let num = self.pop();
                let den = self.pop();
                let out = match (&num, den.constant()) {
                    (Cell::Calldata { .. }, Some(d)) if d == selector_shift() => {
                        self.patterns.push(SelectorSource::MaskedPattern);
                        Cell::SelectorWord(SelectorSource::MaskedPattern)
                    }
                    (Cell::Const { value, .. }, Some(d)) if !d.is_zero() => Cell::folded(*value / d),
                    _ => Cell::Unknown,
                };
                self.push(out);
            }
            0x1b => {
                let shift = self.pop();
                let value = self.pop();
                self.push(match (shift.constant(), value.constant()) {
                    (Some(s), Some(v)) => {
                        Cell::folded(if s >= U256::from(256) { U256::zero() } else { v << s.low_u32() })
                    }
                    _ => Cell::Unknown,
                });
            }
            0x1c => {
                let shift = self.pop();
                let value = self.pop();
                let out = match (shift.constant(), &value) {
                    (Some(s), Cell::Calldata { .. }) if s == U256::from(0xe0) => {
                        self.patterns.push(SelectorSource::ShrPattern);
                        Cell::SelectorWord(SelectorSource::ShrPattern)
                    }
                    (Some(s), Cell::Const { value, .. }) => {
                        Cell::folded(if s >= U256::from(256) { U256::zero() } else { *value >> s.low_u32() })
                    }
                    _ => Cell::Unknown,
                };
                self.push(out);
            }
            0x14 => {
                let a = self.pop();
                let b = self.pop();
                let out = match (a.selector_literal(), b.selector_literal()) {
                    (Some(selector), _) => Cell::Compare { selector, source: word_source(&b) },
                    (None, Some(selector)) => Cell::Compare { selector, source: word_source(&a) },
                    _ => Cell::Unknown,
                };
                self.push(out);
            }
            0x35 => {
                let offset = self.pop();
                self.push(Cell::Calldata { offset: offset.constant() });
            }
            0x52 => {
                let offset = self.pop();
                let value = self.pop();
                self.stores.push(Store { offset, value });
            }
            0x56 => {
                self.jump_target = Some(self.pop());
            }
            0x57 => {
                self.jump_target = Some(self.pop());
                self.jump_condition = Some(self.pop());
            }
            0xf1 | 0xf2 | 0xf4 | 0xfa => {
                let mut popped: Vec<Cell> = (0..spec.pops).map(|_| self.pop()).collect();
                // gas, addr, [value], argsOffset, argsLength, retOffset, retLength
                let base = if spec.pops == 7 { 3 } else { 2 };
                let args_len = std::mem::replace(&mut popped[base + 1], Cell::Unknown);
                let args_offset = std::mem::replace(&mut popped[base], Cell::Unknown);
                self.call_args = Some(CallArgs { args_offset, args_len });
                self.push(Cell::Unknown);
            }
            _ => {
                for _ in 0..spec.pops {
                    self.pop();
                }
                for _ in 0..spec.pushes {
                    self.push(Cell::Unknown);
                }
            }
        }
    }
}

fn word_source(cell: &Cell) -> Option<SelectorSource> {
    match cell {
        Cell::SelectorWord(src) => Some(*src),
        _ => None,
    }
}
