use std::fmt;

use primitive_types::U256;

use crate::disasm::{Instruction, OpcodeSpec};

pub const STACK_LIMIT: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StackCell {
    Constant(U256),
    /// Result of a computation whose value is not tracked (χ).
    Placeholder,
}

impl StackCell {
    pub fn constant(&self) -> Option<U256> {
        match self {
            StackCell::Constant(v) => Some(*v),
            StackCell::Placeholder => None,
        }
    }
}

impl fmt::Display for StackCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StackCell::Constant(v) => write!(f, "{v:#x}"),
            StackCell::Placeholder => f.write_str("χ"),
        }
    }
}

/// Stack-arity pair of an opcode, with the depth it reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StackEffect {
    pub pops: u8,
    pub pushes: u8,
    /// Height required before execution; exceeds `pops` for DUP and SWAP.
    pub depth: u8,
}

impl StackEffect {
    pub fn net(&self) -> isize {
        self.pushes as isize - self.pops as isize
    }
}

pub fn stack_effect(spec: &OpcodeSpec) -> StackEffect {
    StackEffect { pops: spec.pops, pushes: spec.pushes, depth: spec.access_depth() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StackFault {
    Underflow { needed: usize, height: usize },
    Overflow,
}

impl fmt::Display for StackFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StackFault::Underflow { needed, height } => {
                write!(f, "stack underflow: needs {needed}, height {height}")
            }
            StackFault::Overflow => write!(f, "stack overflow past {STACK_LIMIT}"),
        }
    }
}

/// A violation raised by [`run_symbolic`], located by instruction index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StackViolation {
    pub index: usize,
    pub offset: usize,
    pub fault: StackFault,
}

/// Height-tracking stack; only PUSH constants are kept, through DUP, SWAP,
/// AND and POP.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SymbolicStack {
    items: Vec<StackCell>,
}

impl SymbolicStack {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_cells(items: Vec<StackCell>) -> Self {
        SymbolicStack { items }
    }

    /// `height` placeholders.
    pub fn with_height(height: usize) -> Self {
        SymbolicStack { items: vec![StackCell::Placeholder; height] }
    }

    pub fn height(&self) -> usize {
        self.items.len()
    }

    pub fn items(&self) -> &[StackCell] {
        &self.items
    }

    pub fn top(&self) -> Option<&StackCell> {
        self.items.last()
    }

    /// Executes one instruction. For JUMP and JUMPI the popped target is
    /// returned. On a fault the stack is left untouched.
    pub fn apply(&mut self, ins: &Instruction) -> Result<Option<StackCell>, StackFault> {
        let spec = ins.spec;
        let effect = stack_effect(spec);
        let height = self.items.len();
        if (effect.depth as usize) > height {
            return Err(StackFault::Underflow { needed: effect.depth as usize, height });
        }
        if height - effect.pops as usize + effect.pushes as usize > STACK_LIMIT {
            return Err(StackFault::Overflow);
        }

        if spec.is_push() {
            self.items.push(StackCell::Constant(ins.push_value().unwrap_or_default()));
        } else if spec.is_dup() {
            let cell = self.items[height - effect.depth as usize];
            self.items.push(cell);
        } else if spec.is_swap() {
            self.items.swap(height - 1, height - effect.depth as usize);
        } else {
            match spec.byte_value {
                0x16 => {
                    let a = self.items.pop().unwrap();
                    let b = self.items.pop().unwrap();
                    self.items.push(match (a, b) {
                        (StackCell::Constant(x), StackCell::Constant(y)) => StackCell::Constant(x & y),
                        _ => StackCell::Placeholder,
                    });
                }
                0x56 | 0x57 => {
                    let target = self.items.pop().unwrap();
                    self.items.truncate(height - effect.pops as usize);
                    return Ok(Some(target));
                }
                _ => {
                    self.items.truncate(height - effect.pops as usize);
                    for _ in 0..effect.pushes {
                        self.items.push(StackCell::Placeholder);
                    }
                }
            }
        }
        Ok(None)
    }
}

pub fn run_symbolic(instrs: &[Instruction], initial: SymbolicStack) -> Result<SymbolicStack, StackViolation> {
    let mut stack = initial;
    for (index, ins) in instrs.iter().enumerate() {
        stack.apply(ins).map_err(|fault| StackViolation { index, offset: ins.offset, fault })?;
    }
    Ok(stack)
}
