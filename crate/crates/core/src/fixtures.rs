//! Small hand-assembled contracts used by the tests, benches and CLI demos.
//!
//! The callee exposes three functions behind a shift-style dispatcher:
//! `0x11111111` returns, `0x22222222` reverts and `0x33333333` returns after
//! a short branch. The callers build calldata for one selector and CALL it.

use crate::disasm::asm::assemble;

pub const CALLEE: &str = "
    PUSH1 0 CALLDATALOAD PUSH1 0xe0 SHR
    DUP1 PUSH4 0x11111111 EQ PUSH2 @beta JUMPI
    DUP1 PUSH4 0x22222222 EQ PUSH2 @gamma JUMPI
    DUP1 PUSH4 0x33333333 EQ PUSH2 @delta JUMPI
    PUSH1 0 DUP1 REVERT
    beta: JUMPDEST PUSH1 0x2a PUSH1 0 MSTORE PUSH1 0x20 PUSH1 0 RETURN
    gamma: JUMPDEST PUSH1 0 DUP1 REVERT
    delta: JUMPDEST CALLVALUE PUSH2 @delta_paid JUMPI
    PUSH1 0x20 PUSH1 0 RETURN
    delta_paid: JUMPDEST PUSH1 0 DUP1 REVERT
";

/// Caller template: `{sel}` is replaced with the 8-hex-digit selector.
const CALLER_TEMPLATE: &str = "
    PUSH4 0x{sel} PUSH1 0xe0 SHL PUSH1 0x80 MSTORE
    PUSH1 0 PUSH1 0 PUSH1 0x04 PUSH1 0x80 PUSH1 0
    PUSH20 0x00000000000000000000000000000000000000aa GAS CALL
    POP STOP
";

pub fn caller_source(selector: u32) -> String {
    CALLER_TEMPLATE.replace("{sel}", &format!("{selector:08x}"))
}

/// Caller whose function body calls mid-way and continues afterwards.
pub const CALLER_WITH_DISPATCHER: &str = "
    PUSH1 0 CALLDATALOAD PUSH1 0xe0 SHR
    DUP1 PUSH4 0xdeadbeef EQ PUSH2 @attack JUMPI
    PUSH1 0 DUP1 REVERT
    attack: JUMPDEST
    PUSH4 0x11111111 PUSH1 0xe0 SHL PUSH1 0x80 MSTORE
    PUSH1 0x20 PUSH1 0 PUSH1 0x04 PUSH1 0x80 PUSH1 0
    PUSH20 0x00000000000000000000000000000000000000bb GAS CALL
    ISZERO PUSH2 @failed JUMPI
    PUSH1 1 PUSH1 0 SSTORE STOP
    failed: JUMPDEST PUSH1 0 DUP1 REVERT
";

pub fn callee_bytes() -> Vec<u8> {
    assemble(CALLEE).expect("callee fixture assembles")
}

pub fn caller_bytes(selector: u32) -> Vec<u8> {
    assemble(&caller_source(selector)).expect("caller fixture assembles")
}

pub fn dispatcher_caller_bytes() -> Vec<u8> {
    assemble(CALLER_WITH_DISPATCHER).expect("caller fixture assembles")
}
