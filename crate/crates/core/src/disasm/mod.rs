//! Bytecode decoding.
//!
//! [`disassemble`] is total: every byte sequence decodes, undefined bytes
//! become halting `UNKNOWN` instructions, and a PUSH whose immediate runs off
//! the end of the code is zero-padded and flagged as truncated.

pub mod asm;
mod opcode;

use std::fmt;

use primitive_types::U256;

pub use opcode::{decode_opcode, defined_opcodes, opcode_by_mnemonic, OpClass, OpcodeSpec};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Instruction {
    pub offset: usize,
    pub spec: &'static OpcodeSpec,
    /// Immediate operand, always `spec.immediate_len` bytes long.
    pub immediate: Option<Vec<u8>>,
    /// Number of zero bytes appended to complete a truncated PUSH immediate.
    pub padding: u8,
}

impl Instruction {
    pub fn mnemonic(&self) -> &'static str {
        self.spec.mnemonic
    }

    pub fn class(&self) -> OpClass {
        self.spec.class
    }

    pub fn is_truncated(&self) -> bool {
        self.padding > 0
    }

    /// Encoded size in the original code, excluding any padding.
    pub fn size(&self) -> usize {
        1 + self.spec.immediate_len as usize - self.padding as usize
    }

    /// Offset of the next instruction.
    pub fn next_offset(&self) -> usize {
        self.offset + 1 + self.spec.immediate_len as usize
    }

    /// The pushed word for PUSH0..PUSH32.
    pub fn push_value(&self) -> Option<U256> {
        if !self.spec.is_push() {
            return None;
        }
        Some(match &self.immediate {
            Some(bytes) => U256::from_big_endian(bytes),
            None => U256::zero(),
        })
    }

    /// Appends the opcode byte and the full (padded) immediate.
    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.push(self.spec.byte_value);
        if let Some(bytes) = &self.immediate {
            out.extend_from_slice(bytes);
        }
    }

    /// Appends only the bytes that were present in the original code.
    pub fn encode_original_into(&self, out: &mut Vec<u8>) {
        out.push(self.spec.byte_value);
        if let Some(bytes) = &self.immediate {
            out.extend_from_slice(&bytes[..bytes.len() - self.padding as usize]);
        }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#06x} {}", self.offset, self.spec)?;
        if let Some(bytes) = &self.immediate {
            write!(f, " 0x{}", hex::encode(bytes))?;
        }
        Ok(())
    }
}

/// Non-fatal decoding issue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DisasmWarning {
    TruncatedPush { offset: usize, expected: u8, available: u8 },
}

impl fmt::Display for DisasmWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DisasmWarning::TruncatedPush { offset, expected, available } => {
                write!(f, "truncated push at {offset:#x}: {available} of {expected} immediate bytes present")
            }
        }
    }
}

pub fn disassemble(code: &[u8]) -> Vec<Instruction> {
    disassemble_from(code, 0)
}

/// Decodes `code` as if it started at `base_offset`.
pub fn disassemble_from(code: &[u8], base_offset: usize) -> Vec<Instruction> {
    let mut out = Vec::with_capacity(code.len());
    let mut pc = 0;
    while pc < code.len() {
        let spec = decode_opcode(code[pc]);
        let len = spec.immediate_len as usize;
        let (immediate, padding) = if len == 0 {
            (None, 0)
        } else {
            let start = pc + 1;
            let end = (start + len).min(code.len());
            let mut bytes = code[start..end].to_vec();
            let padding = len - bytes.len();
            bytes.resize(len, 0);
            (Some(bytes), padding as u8)
        };
        out.push(Instruction { offset: base_offset + pc, spec, immediate, padding });
        pc += 1 + len;
    }
    out
}

pub fn warnings(instrs: &[Instruction]) -> Vec<DisasmWarning> {
    instrs
        .iter()
        .filter(|ins| ins.is_truncated())
        .map(|ins| DisasmWarning::TruncatedPush {
            offset: ins.offset,
            expected: ins.spec.immediate_len,
            available: ins.spec.immediate_len - ins.padding,
        })
        .collect()
}

/// Re-serializes an instruction sequence, including truncation padding.
pub fn reassemble(instrs: &[Instruction]) -> Vec<u8> {
    let mut out = Vec::new();
    for ins in instrs {
        ins.encode_into(&mut out);
    }
    out
}

/// Line-oriented listing, one `offset mnemonic [immediate]` per line.
pub fn listing(instrs: &[Instruction]) -> String {
    let mut out = String::new();
    for ins in instrs {
        out.push_str(&ins.to_string());
        out.push('\n');
    }
    out
}
