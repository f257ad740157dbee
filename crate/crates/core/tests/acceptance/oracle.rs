//! Reference implementations the acceptance checks compare against. None of
//! this code calls into the library; it is written straight from the EVM
//! instruction tables and the feature formulas.

use std::collections::{BTreeMap, BTreeSet};

use primitive_types::U256;

pub const STACK_LIMIT: usize = 1024;
pub const HALTING: [u8; 5] = [0x00, 0xf3, 0xfd, 0xfe, 0xff];
pub const CALLS: [u8; 4] = [0xf1, 0xf2, 0xf4, 0xfa];

/// Ethereum instruction table, Frontier through Shanghai:
/// byte -> (mnemonic, items removed δ, items added α).
pub fn reference_table() -> BTreeMap<u8, (String, u8, u8)> {
    let fixed: &[(u8, &str, u8, u8)] = &[
        (0x00, "STOP", 0, 0),
        (0x01, "ADD", 2, 1),
        (0x02, "MUL", 2, 1),
        (0x03, "SUB", 2, 1),
        (0x04, "DIV", 2, 1),
        (0x05, "SDIV", 2, 1),
        (0x06, "MOD", 2, 1),
        (0x07, "SMOD", 2, 1),
        (0x08, "ADDMOD", 3, 1),
        (0x09, "MULMOD", 3, 1),
        (0x0a, "EXP", 2, 1),
        (0x0b, "SIGNEXTEND", 2, 1),
        (0x10, "LT", 2, 1),
        (0x11, "GT", 2, 1),
        (0x12, "SLT", 2, 1),
        (0x13, "SGT", 2, 1),
        (0x14, "EQ", 2, 1),
        (0x15, "ISZERO", 1, 1),
        (0x16, "AND", 2, 1),
        (0x17, "OR", 2, 1),
        (0x18, "XOR", 2, 1),
        (0x19, "NOT", 1, 1),
        (0x1a, "BYTE", 2, 1),
        (0x1b, "SHL", 2, 1),
        (0x1c, "SHR", 2, 1),
        (0x1d, "SAR", 2, 1),
        (0x20, "KECCAK256", 2, 1),
        (0x30, "ADDRESS", 0, 1),
        (0x31, "BALANCE", 1, 1),
        (0x32, "ORIGIN", 0, 1),
        (0x33, "CALLER", 0, 1),
        (0x34, "CALLVALUE", 0, 1),
        (0x35, "CALLDATALOAD", 1, 1),
        (0x36, "CALLDATASIZE", 0, 1),
        (0x37, "CALLDATACOPY", 3, 0),
        (0x38, "CODESIZE", 0, 1),
        (0x39, "CODECOPY", 3, 0),
        (0x3a, "GASPRICE", 0, 1),
        (0x3b, "EXTCODESIZE", 1, 1),
        (0x3c, "EXTCODECOPY", 4, 0),
        (0x3d, "RETURNDATASIZE", 0, 1),
        (0x3e, "RETURNDATACOPY", 3, 0),
        (0x3f, "EXTCODEHASH", 1, 1),
        (0x40, "BLOCKHASH", 1, 1),
        (0x41, "COINBASE", 0, 1),
        (0x42, "TIMESTAMP", 0, 1),
        (0x43, "NUMBER", 0, 1),
        (0x44, "PREVRANDAO", 0, 1),
        (0x45, "GASLIMIT", 0, 1),
        (0x46, "CHAINID", 0, 1),
        (0x47, "SELFBALANCE", 0, 1),
        (0x48, "BASEFEE", 0, 1),
        (0x50, "POP", 1, 0),
        (0x51, "MLOAD", 1, 1),
        (0x52, "MSTORE", 2, 0),
        (0x53, "MSTORE8", 2, 0),
        (0x54, "SLOAD", 1, 1),
        (0x55, "SSTORE", 2, 0),
        (0x56, "JUMP", 1, 0),
        (0x57, "JUMPI", 2, 0),
        (0x58, "PC", 0, 1),
        (0x59, "MSIZE", 0, 1),
        (0x5a, "GAS", 0, 1),
        (0x5b, "JUMPDEST", 0, 0),
        (0x5f, "PUSH0", 0, 1),
        (0xf0, "CREATE", 3, 1),
        (0xf1, "CALL", 7, 1),
        (0xf2, "CALLCODE", 7, 1),
        (0xf3, "RETURN", 2, 0),
        (0xf4, "DELEGATECALL", 6, 1),
        (0xf5, "CREATE2", 4, 1),
        (0xfa, "STATICCALL", 6, 1),
        (0xfd, "REVERT", 2, 0),
        (0xfe, "INVALID", 0, 0),
        (0xff, "SELFDESTRUCT", 1, 0),
    ];
    let mut table: BTreeMap<u8, (String, u8, u8)> =
        fixed.iter().map(|&(b, m, d, a)| (b, (m.to_string(), d, a))).collect();
    for n in 1..=32u8 {
        table.insert(0x5f + n, (format!("PUSH{n}"), 0, 1));
    }
    for n in 1..=16u8 {
        table.insert(0x7f + n, (format!("DUP{n}"), n, n + 1));
        table.insert(0x8f + n, (format!("SWAP{n}"), n + 1, n + 1));
    }
    for n in 0..=4u8 {
        table.insert(0xa0 + n, (format!("LOG{n}"), n + 2, 0));
    }
    table
}

fn immediate_len(byte: u8) -> usize {
    match byte {
        0x60..=0x7f => (byte - 0x5f) as usize,
        _ => 0,
    }
}

/// One decoded instruction. `imm` holds the immediate as it is executed:
/// missing trailing bytes read as zero.
#[derive(Debug, Clone)]
pub struct Op {
    pub offset: usize,
    pub byte: u8,
    pub imm: Vec<u8>,
    /// Immediate bytes actually present in the code.
    pub present: usize,
}

impl Op {
    pub fn next(&self) -> usize {
        self.offset + 1 + self.imm.len()
    }

    pub fn value(&self) -> U256 {
        U256::from_big_endian(&self.imm)
    }

    fn is_push(&self) -> bool {
        (0x5f..=0x7f).contains(&self.byte)
    }
}

pub fn decode(code: &[u8]) -> Vec<Op> {
    let mut ops = Vec::new();
    let mut pc = 0;
    while pc < code.len() {
        let byte = code[pc];
        let len = immediate_len(byte);
        let avail = &code[(pc + 1).min(code.len())..(pc + 1 + len).min(code.len())];
        let mut imm = avail.to_vec();
        imm.resize(len, 0);
        ops.push(Op { offset: pc, byte, imm, present: avail.len() });
        pc += 1 + len;
    }
    ops
}

fn halts(byte: u8, table: &BTreeMap<u8, (String, u8, u8)>) -> bool {
    HALTING.contains(&byte) || !table.contains_key(&byte)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefBlock {
    pub start: usize,
    pub end: usize,
    pub ops: usize,
    pub node_type: &'static str,
}

#[derive(Debug, Default)]
pub struct RefCfg {
    pub blocks: Vec<RefBlock>,
    /// `(from start offset, to start offset, kind)`.
    pub edges: BTreeSet<(usize, usize, &'static str)>,
    /// `(selector, entry block start offset)`, first occurrence kept.
    pub selectors: Vec<(u32, usize)>,
}

/// Block-local value: only PUSH literals survive, through DUP, SWAP, POP
/// and AND of two literals. EQ against a 3- or 4-byte literal is a selector
/// comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Val {
    Unknown,
    Lit { value: U256, width: usize },
    Compare(u32),
}

/// The stack below the block entry is not modelled: reads past the bottom
/// yield `Unknown`.
#[derive(Default)]
struct LocalStack(Vec<Val>);

impl LocalStack {
    fn pop(&mut self) -> Val {
        self.0.pop().unwrap_or(Val::Unknown)
    }

    fn peek(&self, depth: usize) -> Val {
        if depth <= self.0.len() {
            self.0[self.0.len() - depth]
        } else {
            Val::Unknown
        }
    }
}

/// Runs one block and returns `(jump target, jump condition)` as seen by its
/// terminator.
fn run_block(ops: &[Op], table: &BTreeMap<u8, (String, u8, u8)>) -> (Val, Val) {
    let mut st = LocalStack::default();
    let mut target = Val::Unknown;
    let mut cond = Val::Unknown;
    for op in ops {
        let b = op.byte;
        if op.is_push() {
            st.0.push(Val::Lit { value: op.value(), width: op.imm.len() });
            continue;
        }
        match b {
            0x80..=0x8f => {
                let v = st.peek((b - 0x7f) as usize);
                st.0.push(v);
            }
            0x90..=0x9f => {
                let depth = (b - 0x8e) as usize;
                let len = st.0.len();
                if depth <= len {
                    st.0.swap(len - 1, len - depth);
                } else if len > 0 {
                    st.0[len - 1] = Val::Unknown;
                }
            }
            0x16 => {
                let (x, y) = (st.pop(), st.pop());
                st.0.push(match (x, y) {
                    (Val::Lit { value: p, .. }, Val::Lit { value: q, .. }) => Val::Lit { value: p & q, width: 0 },
                    _ => Val::Unknown,
                });
            }
            0x14 => {
                let (x, y) = (st.pop(), st.pop());
                let literal = |v: Val| match v {
                    Val::Lit { value, width: 3 | 4 } => Some(value.low_u32()),
                    _ => None,
                };
                st.0.push(match literal(x).or(literal(y)) {
                    Some(sel) => Val::Compare(sel),
                    None => Val::Unknown,
                });
            }
            0x56 => target = st.pop(),
            0x57 => {
                target = st.pop();
                cond = st.pop();
            }
            _ => {
                let (_, pops, pushes) = table.get(&b).cloned().unwrap_or_default();
                for _ in 0..pops {
                    st.pop();
                }
                for _ in 0..pushes {
                    st.0.push(Val::Unknown);
                }
            }
        }
    }
    (target, cond)
}

/// Brute-force control-flow recovery: leaders, blocks, jump targets by
/// block-local constant simulation, and dispatcher selectors.
pub fn reference_cfg(code: &[u8]) -> RefCfg {
    let table = reference_table();
    let ops = decode(code);
    let jumpdests: BTreeSet<usize> = ops.iter().filter(|o| o.byte == 0x5b).map(|o| o.offset).collect();

    let mut leaders = BTreeSet::new();
    if !ops.is_empty() {
        leaders.insert(0);
    }
    for op in &ops {
        if op.byte == 0x5b {
            leaders.insert(op.offset);
        }
        if (op.byte == 0x56 || op.byte == 0x57 || halts(op.byte, &table)) && op.next() < code.len() {
            leaders.insert(op.next());
        }
    }

    let mut groups: Vec<Vec<Op>> = Vec::new();
    for op in ops {
        if leaders.contains(&op.offset) || groups.is_empty() {
            groups.push(Vec::new());
        }
        groups.last_mut().unwrap().push(op);
    }

    let mut out = RefCfg::default();
    let starts: Vec<usize> = groups.iter().map(|g| g[0].offset).collect();
    let mut candidates = Vec::new();
    for (id, g) in groups.iter().enumerate() {
        let last = g.last().unwrap();
        let node_type = match last.byte {
            b if halts(b, &table) => "ending",
            0x57 => "conditional",
            _ if id == 0 => "starting",
            _ => "plain",
        };
        out.blocks.push(RefBlock { start: g[0].offset, end: last.next(), ops: g.len(), node_type });

        let next = starts.get(id + 1).copied();
        let (target, cond) = run_block(g, &table);
        let resolved = match target {
            Val::Lit { value, .. } if value < U256::from(usize::MAX) && jumpdests.contains(&value.as_usize()) => {
                Some(value.as_usize())
            }
            _ => None,
        };
        match last.byte {
            0x56 => {
                if let Some(t) = resolved {
                    out.edges.insert((g[0].offset, t, "jump_taken"));
                }
            }
            0x57 => {
                if let Some(t) = resolved {
                    out.edges.insert((g[0].offset, t, "jump_taken"));
                    if let Val::Compare(sel) = cond {
                        candidates.push((sel, t));
                    }
                }
                if let Some(n) = next {
                    out.edges.insert((g[0].offset, n, "jump_not_taken"));
                }
            }
            b if halts(b, &table) => {}
            _ => {
                if let Some(n) = next {
                    out.edges.insert((g[0].offset, n, "fall_through"));
                }
            }
        }
    }
    for (sel, t) in candidates {
        if !out.selectors.iter().any(|(s, _)| *s == sel) {
            out.selectors.push((sel, t));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    Underflow,
    Overflow,
}

/// Concrete execution of a straight-line sequence.
pub struct Concrete {
    /// Height after each executed instruction.
    pub heights: Vec<usize>,
    /// Stack contents after each executed instruction.
    pub stacks: Vec<Vec<U256>>,
    pub fault: Option<(usize, Fault)>,
}

pub fn run_concrete(ops: &[Op], initial: Vec<U256>) -> Concrete {
    let table = reference_table();
    let mut stack = initial;
    let mut out = Concrete { heights: Vec::new(), stacks: Vec::new(), fault: None };
    for (i, op) in ops.iter().enumerate() {
        let (_, delta, alpha) = table.get(&op.byte).cloned().unwrap_or_default();
        let (delta, alpha) = (delta as usize, alpha as usize);
        if stack.len() < delta {
            out.fault = Some((i, Fault::Underflow));
            break;
        }
        if stack.len() - delta + alpha > STACK_LIMIT {
            out.fault = Some((i, Fault::Overflow));
            break;
        }
        let len = stack.len();
        match op.byte {
            _ if op.is_push() => stack.push(op.value()),
            0x80..=0x8f => stack.push(stack[len - delta]),
            0x90..=0x9f => stack.swap(len - 1, len - delta),
            0x16 => {
                let x = stack.pop().unwrap();
                let y = stack.pop().unwrap();
                stack.push(x & y);
            }
            _ => {
                stack.truncate(len - delta);
                for k in 0..alpha {
                    // arbitrary results; only their count matters
                    stack.push(U256::from(0xdead_0000u64 + (i * 8 + k) as u64));
                }
            }
        }
        out.heights.push(stack.len());
        out.stacks.push(stack.clone());
    }
    out
}

/// Every simple path from `start` that ends in a node without successors.
/// Returns `None` when a cycle is reachable.
pub fn simple_paths(start: usize, succ: &dyn Fn(usize) -> Vec<usize>) -> Option<Vec<Vec<usize>>> {
    fn go(
        node: usize,
        succ: &dyn Fn(usize) -> Vec<usize>,
        path: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
        cyclic: &mut bool,
    ) {
        path.push(node);
        let next = succ(node);
        if next.is_empty() {
            out.push(path.clone());
        }
        for n in next {
            if path.contains(&n) {
                *cyclic = true;
                continue;
            }
            go(n, succ, path, out, cyclic);
        }
        path.pop();
    }
    let mut out = Vec::new();
    let mut cyclic = false;
    go(start, succ, &mut Vec::new(), &mut out, &mut cyclic);
    (!cyclic).then_some(out)
}

/// Dense adjacency built straight from the definitions: paths first, then
/// tokens in `order`.
pub fn dense_adjacency(corpus: &[Vec<String>], order: &[String], window: usize, sublinear: bool) -> Vec<Vec<f64>> {
    let n_path = corpus.len();
    let n = n_path + order.len();
    let mut a = vec![vec![0.0; n]; n];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }

    let mut windows: Vec<BTreeSet<&str>> = Vec::new();
    for doc in corpus {
        if doc.is_empty() {
            continue;
        }
        if doc.len() <= window {
            windows.push(doc.iter().map(String::as_str).collect());
        } else {
            for start in 0..=doc.len() - window {
                windows.push(doc[start..start + window].iter().map(String::as_str).collect());
            }
        }
    }
    let total = windows.len() as f64;
    for (x, tx) in order.iter().enumerate() {
        for (y, ty) in order.iter().enumerate() {
            if x == y {
                continue;
            }
            let cx = windows.iter().filter(|w| w.contains(tx.as_str())).count() as f64;
            let cy = windows.iter().filter(|w| w.contains(ty.as_str())).count() as f64;
            let cxy = windows.iter().filter(|w| w.contains(tx.as_str()) && w.contains(ty.as_str())).count() as f64;
            if cxy == 0.0 {
                continue;
            }
            let pmi = ((cxy / total) / ((cx / total) * (cy / total))).ln();
            if pmi > 0.0 {
                a[n_path + x][n_path + y] = pmi;
            }
        }
    }

    let docs = n_path as f64;
    for (p, doc) in corpus.iter().enumerate() {
        for (t, tok) in order.iter().enumerate() {
            let tf = doc.iter().filter(|d| *d == tok).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let df = corpus.iter().filter(|d| d.contains(tok)).count() as f64;
            let tf = if sublinear { 1.0 + tf.ln() } else { tf };
            let w = tf * (docs / df).ln();
            a[p][n_path + t] = w;
            a[n_path + t][p] = w;
        }
    }
    a
}
