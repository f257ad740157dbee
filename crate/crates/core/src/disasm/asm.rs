//! Minimal text assembler used to build fixtures and test inputs.
//!
//! ```text
//! PUSH1 @body JUMP        // @name resolves to the offset of `name:`
//! body: JUMPDEST
//! PUSH4 0xa9059cbb POP
//! .raw 0c                 // raw bytes, hex
//! STOP
//! ```

use std::collections::HashMap;

use thiserror::Error;

use super::opcode::opcode_by_mnemonic;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AsmError {
    #[error("unknown mnemonic `{0}`")]
    UnknownMnemonic(String),
    #[error("{0} expects an operand")]
    MissingOperand(String),
    #[error("bad operand `{operand}` for {mnemonic}")]
    BadOperand { mnemonic: String, operand: String },
    #[error("operand `{operand}` does not fit in {width} bytes")]
    OperandTooWide { operand: String, width: usize },
    #[error("undefined label `{0}`")]
    UndefinedLabel(String),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
}

enum Item<'a> {
    Op(u8),
    Push { byte: u8, width: usize, operand: &'a str },
    Raw(Vec<u8>),
}

pub fn assemble(source: &str) -> Result<Vec<u8>, AsmError> {
    let mut tokens = Vec::new();
    for line in source.lines() {
        let line = line.split("//").next().unwrap_or_default();
        let line = line.split('#').next().unwrap_or_default();
        tokens.extend(line.split_whitespace());
    }

    let mut items = Vec::new();
    let mut labels = HashMap::new();
    let mut offset = 0usize;
    let mut iter = tokens.into_iter();
    while let Some(tok) = iter.next() {
        if let Some(label) = tok.strip_suffix(':') {
            if labels.insert(label.to_string(), offset).is_some() {
                return Err(AsmError::DuplicateLabel(label.to_string()));
            }
            continue;
        }
        if tok.eq_ignore_ascii_case(".raw") {
            let operand = iter.next().ok_or_else(|| AsmError::MissingOperand(tok.into()))?;
            let bytes = hex::decode(operand.trim_start_matches("0x"))
                .map_err(|_| AsmError::BadOperand { mnemonic: tok.into(), operand: operand.into() })?;
            offset += bytes.len();
            items.push(Item::Raw(bytes));
            continue;
        }
        let spec = opcode_by_mnemonic(tok).ok_or_else(|| AsmError::UnknownMnemonic(tok.into()))?;
        let width = spec.immediate_len as usize;
        if width > 0 {
            let operand = iter.next().ok_or_else(|| AsmError::MissingOperand(tok.into()))?;
            items.push(Item::Push { byte: spec.byte_value, width, operand });
        } else {
            items.push(Item::Op(spec.byte_value));
        }
        offset += 1 + width;
    }

    let mut out = Vec::with_capacity(offset);
    for item in items {
        match item {
            Item::Op(byte) => out.push(byte),
            Item::Raw(bytes) => out.extend(bytes),
            Item::Push { byte, width, operand } => {
                out.push(byte);
                let value = operand_bytes(operand, &labels, byte)?;
                if value.len() > width {
                    return Err(AsmError::OperandTooWide { operand: operand.into(), width });
                }
                out.extend(std::iter::repeat_n(0, width - value.len()));
                out.extend(value);
            }
        }
    }
    Ok(out)
}

fn operand_bytes(operand: &str, labels: &HashMap<String, usize>, byte: u8) -> Result<Vec<u8>, AsmError> {
    let bad = || AsmError::BadOperand { mnemonic: super::decode_opcode(byte).mnemonic.into(), operand: operand.into() };
    let value: u128 = if let Some(label) = operand.strip_prefix('@') {
        *labels.get(label).ok_or_else(|| AsmError::UndefinedLabel(label.into()))? as u128
    } else if let Some(digits) = operand.strip_prefix("0x") {
        let digits = if digits.len() % 2 == 1 { format!("0{digits}") } else { digits.to_string() };
        let mut bytes = hex::decode(digits).map_err(|_| bad())?;
        while bytes.len() > 1 && bytes[0] == 0 {
            bytes.remove(0);
        }
        return Ok(bytes);
    } else {
        operand.parse().map_err(|_| bad())?
    };
    let bytes = value.to_be_bytes();
    let first = bytes.iter().position(|b| *b != 0).unwrap_or(bytes.len() - 1);
    Ok(bytes[first..].to_vec())
}
