//! Synthetic inputs shared by the benchmarks.

use pathlab::disasm::asm::assemble;

/// A dispatcher with `functions` entries; each function branches on
/// CALLVALUE, calls out once and returns.
pub fn dispatcher_contract(functions: usize) -> Vec<u8> {
    let mut src = String::from("PUSH1 0 CALLDATALOAD PUSH1 0xe0 SHR\n");
    for f in 0..functions {
        src.push_str(&format!("DUP1 PUSH4 0x{:08x} EQ PUSH2 @f{f} JUMPI\n", 0x1000_0000 + f));
    }
    src.push_str("PUSH1 0 DUP1 REVERT\n");
    for f in 0..functions {
        src.push_str(&format!(
            "f{f}: JUMPDEST CALLVALUE PUSH2 @paid{f} JUMPI\n\
             PUSH4 0x11111111 PUSH1 0xe0 SHL PUSH1 0x80 MSTORE\n\
             PUSH1 0x20 PUSH1 0 PUSH1 4 PUSH1 0x80 PUSH1 0 CALLER GAS CALL POP\n\
             PUSH1 0x20 PUSH1 0 RETURN\n\
             paid{f}: JUMPDEST PUSH1 {f} PUSH1 0 SSTORE STOP\n"
        ));
    }
    assemble(&src).expect("generated contract assembles")
}
