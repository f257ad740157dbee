//! Opcode table through the Shanghai fork.

use std::fmt;

/// Control-flow role of an opcode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpClass {
    Jump,
    ConditionalJump,
    /// Halts the current frame: STOP, RETURN, REVERT, INVALID, SELFDESTRUCT
    /// and every undefined byte.
    Stop,
    /// External message call: CALL, CALLCODE, DELEGATECALL, STATICCALL.
    Call,
    JumpDest,
    Plain,
}

impl OpClass {
    /// Classes that end a basic block during partitioning.
    pub fn ends_block(self) -> bool {
        matches!(self, OpClass::Jump | OpClass::ConditionalJump | OpClass::Stop)
    }

    pub fn name(self) -> &'static str {
        match self {
            OpClass::Jump => "jump",
            OpClass::ConditionalJump => "conditional_jump",
            OpClass::Stop => "stop",
            OpClass::Call => "call",
            OpClass::JumpDest => "jumpdest",
            OpClass::Plain => "plain",
        }
    }
}

/// Static description of one opcode byte.
///
/// `pops`/`pushes` follow the convention that DUPn is `(0, 1)` and SWAPn is
/// `(0, 0)`; the stack depth those two families touch is reported separately
/// by [`OpcodeSpec::access_depth`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OpcodeSpec {
    pub mnemonic: &'static str,
    pub byte_value: u8,
    pub immediate_len: u8,
    pub pops: u8,
    pub pushes: u8,
    pub class: OpClass,
    pub defined: bool,
}

impl OpcodeSpec {
    /// Minimum stack height required before executing this opcode.
    pub fn access_depth(&self) -> u8 {
        match self.byte_value {
            0x80..=0x8f => self.byte_value - 0x7f,
            0x90..=0x9f => self.byte_value - 0x8e,
            _ => self.pops,
        }
    }

    pub fn is_push(&self) -> bool {
        (0x5f..=0x7f).contains(&self.byte_value)
    }

    pub fn is_dup(&self) -> bool {
        (0x80..=0x8f).contains(&self.byte_value)
    }

    pub fn is_swap(&self) -> bool {
        (0x90..=0x9f).contains(&self.byte_value)
    }

    /// RETURN is a stop-class opcode that additionally hands control back to
    /// the calling frame.
    pub fn returns(&self) -> bool {
        self.byte_value == 0xf3
    }

    pub fn is_jumpdest(&self) -> bool {
        self.class == OpClass::JumpDest
    }
}

impl fmt::Display for OpcodeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.defined {
            f.write_str(self.mnemonic)
        } else {
            write!(f, "{}(0x{:02x})", self.mnemonic, self.byte_value)
        }
    }
}

const fn undefined(byte_value: u8) -> OpcodeSpec {
    OpcodeSpec {
        mnemonic: "UNKNOWN",
        byte_value,
        immediate_len: 0,
        pops: 0,
        pushes: 0,
        class: OpClass::Stop,
        defined: false,
    }
}

const fn classify(byte_value: u8) -> OpClass {
    match byte_value {
        0x56 => OpClass::Jump,
        0x57 => OpClass::ConditionalJump,
        0x5b => OpClass::JumpDest,
        0x00 | 0xf3 | 0xfd | 0xfe | 0xff => OpClass::Stop,
        0xf1 | 0xf2 | 0xf4 | 0xfa => OpClass::Call,
        _ => OpClass::Plain,
    }
}

const fn op(byte_value: u8, mnemonic: &'static str, pops: u8, pushes: u8) -> OpcodeSpec {
    let immediate_len = if byte_value >= 0x60 && byte_value <= 0x7f { byte_value - 0x5f } else { 0 };
    OpcodeSpec { mnemonic, byte_value, immediate_len, pops, pushes, class: classify(byte_value), defined: true }
}

const PUSH_NAMES: [&str; 32] = [
    "PUSH1", "PUSH2", "PUSH3", "PUSH4", "PUSH5", "PUSH6", "PUSH7", "PUSH8", "PUSH9", "PUSH10", "PUSH11", "PUSH12",
    "PUSH13", "PUSH14", "PUSH15", "PUSH16", "PUSH17", "PUSH18", "PUSH19", "PUSH20", "PUSH21", "PUSH22", "PUSH23",
    "PUSH24", "PUSH25", "PUSH26", "PUSH27", "PUSH28", "PUSH29", "PUSH30", "PUSH31", "PUSH32",
];
const DUP_NAMES: [&str; 16] = [
    "DUP1", "DUP2", "DUP3", "DUP4", "DUP5", "DUP6", "DUP7", "DUP8", "DUP9", "DUP10", "DUP11", "DUP12", "DUP13",
    "DUP14", "DUP15", "DUP16",
];
const SWAP_NAMES: [&str; 16] = [
    "SWAP1", "SWAP2", "SWAP3", "SWAP4", "SWAP5", "SWAP6", "SWAP7", "SWAP8", "SWAP9", "SWAP10", "SWAP11", "SWAP12",
    "SWAP13", "SWAP14", "SWAP15", "SWAP16",
];
const LOG_NAMES: [&str; 5] = ["LOG0", "LOG1", "LOG2", "LOG3", "LOG4"];

const fn build_table() -> [OpcodeSpec; 256] {
    let mut table = [undefined(0); 256];
    let mut i = 0;
    while i < 256 {
        table[i] = undefined(i as u8);
        i += 1;
    }

    table[0x00] = op(0x00, "STOP", 0, 0);
    table[0x01] = op(0x01, "ADD", 2, 1);
    table[0x02] = op(0x02, "MUL", 2, 1);
    table[0x03] = op(0x03, "SUB", 2, 1);
    table[0x04] = op(0x04, "DIV", 2, 1);
    table[0x05] = op(0x05, "SDIV", 2, 1);
    table[0x06] = op(0x06, "MOD", 2, 1);
    table[0x07] = op(0x07, "SMOD", 2, 1);
    table[0x08] = op(0x08, "ADDMOD", 3, 1);
    table[0x09] = op(0x09, "MULMOD", 3, 1);
    table[0x0a] = op(0x0a, "EXP", 2, 1);
    table[0x0b] = op(0x0b, "SIGNEXTEND", 2, 1);

    table[0x10] = op(0x10, "LT", 2, 1);
    table[0x11] = op(0x11, "GT", 2, 1);
    table[0x12] = op(0x12, "SLT", 2, 1);
    table[0x13] = op(0x13, "SGT", 2, 1);
    table[0x14] = op(0x14, "EQ", 2, 1);
    table[0x15] = op(0x15, "ISZERO", 1, 1);
    table[0x16] = op(0x16, "AND", 2, 1);
    table[0x17] = op(0x17, "OR", 2, 1);
    table[0x18] = op(0x18, "XOR", 2, 1);
    table[0x19] = op(0x19, "NOT", 1, 1);
    table[0x1a] = op(0x1a, "BYTE", 2, 1);
    table[0x1b] = op(0x1b, "SHL", 2, 1);
    table[0x1c] = op(0x1c, "SHR", 2, 1);
    table[0x1d] = op(0x1d, "SAR", 2, 1);

    table[0x20] = op(0x20, "KECCAK256", 2, 1);

    table[0x30] = op(0x30, "ADDRESS", 0, 1);
    table[0x31] = op(0x31, "BALANCE", 1, 1);
    table[0x32] = op(0x32, "ORIGIN", 0, 1);
    table[0x33] = op(0x33, "CALLER", 0, 1);
    table[0x34] = op(0x34, "CALLVALUE", 0, 1);
    table[0x35] = op(0x35, "CALLDATALOAD", 1, 1);
    table[0x36] = op(0x36, "CALLDATASIZE", 0, 1);
    table[0x37] = op(0x37, "CALLDATACOPY", 3, 0);
    table[0x38] = op(0x38, "CODESIZE", 0, 1);
    table[0x39] = op(0x39, "CODECOPY", 3, 0);
    table[0x3a] = op(0x3a, "GASPRICE", 0, 1);
    table[0x3b] = op(0x3b, "EXTCODESIZE", 1, 1);
    table[0x3c] = op(0x3c, "EXTCODECOPY", 4, 0);
    table[0x3d] = op(0x3d, "RETURNDATASIZE", 0, 1);
    table[0x3e] = op(0x3e, "RETURNDATACOPY", 3, 0);
    table[0x3f] = op(0x3f, "EXTCODEHASH", 1, 1);

    table[0x40] = op(0x40, "BLOCKHASH", 1, 1);
    table[0x41] = op(0x41, "COINBASE", 0, 1);
    table[0x42] = op(0x42, "TIMESTAMP", 0, 1);
    table[0x43] = op(0x43, "NUMBER", 0, 1);
    table[0x44] = op(0x44, "PREVRANDAO", 0, 1);
    table[0x45] = op(0x45, "GASLIMIT", 0, 1);
    table[0x46] = op(0x46, "CHAINID", 0, 1);
    table[0x47] = op(0x47, "SELFBALANCE", 0, 1);
    table[0x48] = op(0x48, "BASEFEE", 0, 1);

    table[0x50] = op(0x50, "POP", 1, 0);
    table[0x51] = op(0x51, "MLOAD", 1, 1);
    table[0x52] = op(0x52, "MSTORE", 2, 0);
    table[0x53] = op(0x53, "MSTORE8", 2, 0);
    table[0x54] = op(0x54, "SLOAD", 1, 1);
    table[0x55] = op(0x55, "SSTORE", 2, 0);
    table[0x56] = op(0x56, "JUMP", 1, 0);
    table[0x57] = op(0x57, "JUMPI", 2, 0);
    table[0x58] = op(0x58, "PC", 0, 1);
    table[0x59] = op(0x59, "MSIZE", 0, 1);
    table[0x5a] = op(0x5a, "GAS", 0, 1);
    table[0x5b] = op(0x5b, "JUMPDEST", 0, 0);
    table[0x5f] = op(0x5f, "PUSH0", 0, 1);

    let mut n = 0;
    while n < 32 {
        table[0x60 + n] = op(0x60 + n as u8, PUSH_NAMES[n], 0, 1);
        n += 1;
    }
    n = 0;
    while n < 16 {
        table[0x80 + n] = op(0x80 + n as u8, DUP_NAMES[n], 0, 1);
        table[0x90 + n] = op(0x90 + n as u8, SWAP_NAMES[n], 0, 0);
        n += 1;
    }
    n = 0;
    while n < 5 {
        table[0xa0 + n] = op(0xa0 + n as u8, LOG_NAMES[n], 2 + n as u8, 0);
        n += 1;
    }

    table[0xf0] = op(0xf0, "CREATE", 3, 1);
    table[0xf1] = op(0xf1, "CALL", 7, 1);
    table[0xf2] = op(0xf2, "CALLCODE", 7, 1);
    table[0xf3] = op(0xf3, "RETURN", 2, 0);
    table[0xf4] = op(0xf4, "DELEGATECALL", 6, 1);
    table[0xf5] = op(0xf5, "CREATE2", 4, 1);
    table[0xfa] = op(0xfa, "STATICCALL", 6, 1);
    table[0xfd] = op(0xfd, "REVERT", 2, 0);
    table[0xfe] = op(0xfe, "INVALID", 0, 0);
    table[0xff] = op(0xff, "SELFDESTRUCT", 1, 0);

    table
}

static OPCODES: [OpcodeSpec; 256] = build_table();

/// Total lookup; undefined bytes decode to a halting `UNKNOWN` spec.
pub fn decode_opcode(byte_value: u8) -> &'static OpcodeSpec {
    &OPCODES[byte_value as usize]
}

/// Every defined opcode, in byte order.
pub fn defined_opcodes() -> impl Iterator<Item = &'static OpcodeSpec> {
    OPCODES.iter().filter(|spec| spec.defined)
}

/// Reverse lookup by mnemonic. `SHA3`, `DIFFICULTY` and `SUICIDE` are
/// accepted as legacy aliases.
pub fn opcode_by_mnemonic(name: &str) -> Option<&'static OpcodeSpec> {
    let upper = name.to_ascii_uppercase();
    let canonical = match upper.as_str() {
        "SHA3" => "KECCAK256",
        "DIFFICULTY" => "PREVRANDAO",
        "SUICIDE" => "SELFDESTRUCT",
        other => other,
    };
    defined_opcodes().find(|spec| spec.mnemonic == canonical)
}
