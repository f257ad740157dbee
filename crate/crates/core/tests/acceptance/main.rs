//! Acceptance checks. Each prints one PASS or FAIL line and the process
//! exits non-zero if any check fails. Run with
//! `cargo test -p pathlab-core --test acceptance`.

mod oracle;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::sync::mpsc;
use std::time::{Duration, Instant};

use primitive_types::U256;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tiny_keccak::{Hasher, Keccak};

use pathlab::cfg::EdgeKind;
use pathlab::connector::{connect_cfgs, ContractGraph, Provenance, RCfg};
use pathlab::disasm::asm::assemble;
use pathlab::disasm::{decode_opcode, defined_opcodes, disassemble, reassemble, OpClass};
use pathlab::features::{
    build_graph, build_vocab, compute_ppmi, compute_tfidf, export_dataset, BundleMode, ExportOptions, FeatureConfig,
    Oversample, TfIdfVariant,
};
use pathlab::fixtures;
use pathlab::ingest::{resolve_manifest, CodeResolver, Manifest};
use pathlab::paths::{enumerate_paths, PathLimits};
use pathlab::pipeline::collect_corpus;
use pathlab::validator::{
    stack_effect, validate_path, EdgeCondition, InfeasibleReason, StackCell, StackFault, SymbolicStack, Verdict,
};
use pathlab::Cfg;

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let held: bool = $cond;
        if !held {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    let checks: [(&str, Check); 8] = [
        ("disassembler round-trip", disasm_round_trip),
        ("opcode arity oracle", opcode_arity),
        ("cfg oracle equivalence", cfg_oracle),
        ("cross-contract topology", connector_topology),
        ("path feasibility", path_feasibility),
        ("path enumeration exhaustiveness", path_exhaustiveness),
        ("adjacency oracle", adjacency_oracle),
        ("bundle determinism", bundle_determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in checks {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    let _ = panic::take_hook();
    if failed > 0 {
        eprintln!("{failed} acceptance check(s) failed");
        std::process::exit(1);
    }
}

fn disasm_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0d15_a55e);
    let started = Instant::now();
    let mut truncated = 0;
    for case in 0..1000 {
        let len = rng.random_range(0..=512);
        let code: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        let instrs = disassemble(&code);
        let bytes = reassemble(&instrs);
        let padding: usize = instrs.iter().map(|i| i.padding as usize).sum();
        ensure!(
            bytes.len() == code.len() + padding,
            "case {case}: {} bytes out, {len} in, padding {padding}",
            bytes.len()
        );
        ensure!(bytes[..len] == code[..], "case {case}: bytes differ");
        ensure!(bytes[len..].iter().all(|b| *b == 0), "case {case}: padding is not zero");

        let reference = oracle::decode(&code);
        ensure!(
            reference.len() == instrs.len(),
            "case {case}: {} instructions, reference {}",
            instrs.len(),
            reference.len()
        );
        for (r, i) in reference.iter().zip(&instrs) {
            ensure!(r.offset == i.offset && r.byte == i.spec.byte_value, "case {case}: mismatch at {:#x}", r.offset);
            ensure!(r.imm == i.immediate.clone().unwrap_or_default(), "case {case}: immediate at {:#x}", r.offset);
            ensure!(r.imm.len() - r.present == i.padding as usize, "case {case}: padding at {:#x}", r.offset);
        }
        if padding > 0 {
            truncated += 1;
            ensure!(instrs.last().unwrap().is_truncated(), "case {case}: padding not on the final instruction");
        }
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!("1000 inputs ({truncated} with a truncated PUSH) in {elapsed:.2?}"))
}

fn opcode_arity() -> Outcome {
    let table = oracle::reference_table();
    let mut checked = 0;
    for byte in 0..=255u8 {
        let spec = decode_opcode(byte);
        let class = spec.class;
        match table.get(&byte) {
            Some((mnemonic, delta, alpha)) => {
                ensure!(spec.defined, "{byte:#04x} {mnemonic} is undefined");
                ensure!(spec.mnemonic == mnemonic, "{byte:#04x}: {} vs {mnemonic}", spec.mnemonic);
                // DUP and SWAP report the depth they read separately from
                // pops/pushes; fold it back into the δ/α convention
                let e = stack_effect(spec);
                let d = e.depth.max(e.pops);
                let a = e.pushes + (d - e.pops);
                ensure!((d, a) == (*delta, *alpha), "{mnemonic}: ({d}, {a}) vs reference ({delta}, {alpha})");
                let imm = if (0x60..=0x7f).contains(&byte) { byte - 0x5f } else { 0 };
                ensure!(spec.immediate_len == imm, "{mnemonic}: immediate {} vs {imm}", spec.immediate_len);
                let expected = if oracle::HALTING.contains(&byte) {
                    OpClass::Stop
                } else if oracle::CALLS.contains(&byte) {
                    OpClass::Call
                } else {
                    match byte {
                        0x56 => OpClass::Jump,
                        0x57 => OpClass::ConditionalJump,
                        0x5b => OpClass::JumpDest,
                        _ => OpClass::Plain,
                    }
                };
                ensure!(class == expected, "{mnemonic}: class {class:?} vs {expected:?}");
                checked += 1;
            }
            None => {
                ensure!(!spec.defined, "{byte:#04x} should be undefined, got {}", spec.mnemonic);
                ensure!((spec.pops, spec.pushes) == (0, 0), "{byte:#04x}: undefined byte moves the stack");
                ensure!(class == OpClass::Stop, "{byte:#04x}: undefined byte does not halt");
            }
        }
    }
    let defined = defined_opcodes().count();
    ensure!(defined == table.len(), "{defined} defined opcodes, reference has {}", table.len());
    Ok(format!("{checked} defined opcodes, 0 mismatches; {} undefined bytes halt", 256 - checked))
}

const TWO_POW_224: &str = "0x0100000000000000000000000000000000000000000000000000000000";

fn dispatcher_body() -> &'static str {
    "DUP1 PUSH4 0xa9059cbb EQ PUSH1 @t JUMPI \
     DUP1 PUSH4 0x70a08231 EQ PUSH1 @b JUMPI \
     PUSH1 0 DUP1 REVERT \
     t: JUMPDEST PUSH1 1 PUSH1 0 SSTORE STOP \
     b: JUMPDEST PUSH1 0 SLOAD PUSH1 0 MSTORE PUSH1 0x20 PUSH1 0 RETURN"
}

fn cfg_fixtures() -> Vec<(&'static str, String)> {
    let body = dispatcher_body();
    let f = |name, src: &str| (name, src.to_string());
    vec![
        f("empty", ""),
        f("stop", "STOP"),
        f("direct jump", "PUSH1 @t JUMP t: JUMPDEST STOP"),
        f("conditional", "PUSH1 1 PUSH1 @t JUMPI STOP t: JUMPDEST STOP"),
        f("calldata target", "PUSH1 0 CALLDATALOAD JUMP JUMPDEST STOP"),
        f("target not a jumpdest", "PUSH1 0x04 JUMP STOP STOP JUMPDEST STOP"),
        f("jumpdest inside an immediate", "PUSH2 0x5b5b POP PUSH1 0x01 JUMP STOP"),
        f(
            "diamond",
            "CALLVALUE PUSH1 @b JUMPI PUSH1 1 PUSH1 @j JUMP b: JUMPDEST PUSH1 2 j: JUMPDEST PUSH1 0 SSTORE STOP",
        ),
        f("counting loop", "PUSH1 0 l: JUMPDEST PUSH1 1 ADD DUP1 PUSH1 10 GT PUSH1 @l JUMPI POP STOP"),
        f("swapped target", "PUSH1 @t PUSH1 0 SWAP1 JUMP t: JUMPDEST STOP"),
        f("duplicated target", "PUSH1 @t PUSH1 5 DUP2 JUMP t: JUMPDEST STOP"),
        f("masked target", "PUSH2 0xffff PUSH1 @t AND JUMP t: JUMPDEST STOP"),
        f("target from previous block", "PUSH1 @t l: JUMPDEST JUMP t: JUMPDEST STOP"),
        f("shr dispatcher", &format!("PUSH1 0 CALLDATALOAD PUSH1 0xe0 SHR {body}")),
        f("div dispatcher", &format!("PUSH1 0 CALLDATALOAD PUSH29 {TWO_POW_224} SWAP1 DIV {body}")),
        f(
            "div and mask dispatcher",
            &format!("PUSH1 0 CALLDATALOAD PUSH29 {TWO_POW_224} SWAP1 DIV PUSH4 0xffffffff AND {body}"),
        ),
        f(
            "legacy dispatcher",
            "PUSH1 0 CALLDATALOAD PUSH1 0xe0 SHR \
             PUSH4 0xa9059cbb DUP2 EQ PUSH2 @t JUMPI \
             PUSH3 0xfdd58e DUP2 EQ PUSH2 @u JUMPI STOP \
             t: JUMPDEST STOP u: JUMPDEST STOP",
        ),
        f("minimal dispatcher", "PUSH1 0 CALLDATALOAD PUSH4 0xa9059cbb EQ PUSH1 @f JUMPI STOP f: JUMPDEST STOP"),
        f("literal without compare", "PUSH4 0xa9059cbb PUSH1 0 MSTORE PUSH1 4 PUSH1 0 RETURN"),
        f("data after code", "PUSH1 @e JUMP e: JUMPDEST STOP .raw 5b600056fe0c5b"),
        f("truncated push", "CALLVALUE PUSH1 @t JUMPI t: JUMPDEST .raw 61ab"),
        f("undefined opcode", "PUSH1 1 .raw 0c PUSH1 2 STOP"),
        f("consecutive jumpdests", "JUMPDEST JUMPDEST PUSH1 1 JUMP"),
        f("push0 self loop", "JUMPDEST PUSH0 JUMP"),
        f(
            "halting terminators",
            "CALLVALUE PUSH1 @a JUMPI PUSH1 0 DUP1 RETURN \
             a: JUMPDEST CALLER PUSH1 @b JUMPI INVALID \
             b: JUMPDEST ORIGIN PUSH1 @c JUMPI ORIGIN SELFDESTRUCT \
             c: JUMPDEST PUSH1 0 DUP1 REVERT",
        ),
        f("jumpi onto its own fall-through", "CALLVALUE PUSH1 @t JUMPI t: JUMPDEST STOP"),
        f("call mid-block", &fixtures::caller_source(0x11111111)),
        f("callee", fixtures::CALLEE),
        f("dispatching caller", fixtures::CALLER_WITH_DISPATCHER),
    ]
}

fn selector_of(signature: &str) -> u32 {
    let mut hasher = Keccak::v256();
    hasher.update(signature.as_bytes());
    let mut out = [0u8; 32];
    hasher.finalize(&mut out);
    u32::from_be_bytes([out[0], out[1], out[2], out[3]])
}

fn cfg_oracle() -> Outcome {
    let fixtures = cfg_fixtures();
    ensure!(fixtures.len() >= 20, "only {} fixtures", fixtures.len());
    let mut selectors_by_fixture = BTreeMap::new();
    let (mut blocks, mut edges) = (0, 0);
    for (name, src) in &fixtures {
        let code = assemble(src).map_err(|e| format!("{name}: {e}"))?;
        ensure!(code.len() <= 200, "{name}: {} bytes", code.len());
        let reference = oracle::reference_cfg(&code);
        let graph = ContractGraph::from_bytecode(&code);
        let cfg = &graph.cfg;

        let got: Vec<oracle::RefBlock> = cfg
            .blocks()
            .iter()
            .map(|b| oracle::RefBlock {
                start: b.entry_offset,
                end: b.end_offset(),
                ops: b.code.len(),
                node_type: b.node_type.name(),
            })
            .collect();
        ensure!(got == reference.blocks, "{name}: blocks\n  got {got:?}\n  ref {:?}", reference.blocks);

        let offset = |id| cfg.block(id).entry_offset;
        let got: BTreeSet<_> = cfg.edges().iter().map(|e| (offset(e.from), offset(e.to), e.kind.name())).collect();
        ensure!(got == reference.edges, "{name}: edges\n  got {got:?}\n  ref {:?}", reference.edges);

        let got: Vec<(u32, usize)> =
            graph.selectors.iter().map(|s| (u32::from_be_bytes(s.value), offset(s.entry_block))).collect();
        ensure!(got == reference.selectors, "{name}: selectors {got:x?} vs {:x?}", reference.selectors);

        blocks += cfg.len();
        edges += cfg.edges().len();
        selectors_by_fixture.insert(*name, got.iter().map(|s| s.0).collect::<Vec<_>>());
    }

    let transfer = selector_of("transfer(address,uint256)");
    ensure!(transfer == 0xa9059cbb, "keccak oracle gives {transfer:#x}");
    ensure!(selectors_by_fixture["minimal dispatcher"] == [transfer], "minimal dispatcher misses transfer");
    let shr = &selectors_by_fixture["shr dispatcher"];
    ensure!(*shr == [transfer, selector_of("balanceOf(address)")], "shr dispatcher selectors {shr:x?}");
    for other in ["div dispatcher", "div and mask dispatcher"] {
        ensure!(selectors_by_fixture[other] == *shr, "{other} disagrees with the shr dispatcher");
    }
    ensure!(selectors_by_fixture["legacy dispatcher"] == [transfer, 0x00fdd58e], "legacy dispatcher selectors");
    ensure!(selectors_by_fixture["literal without compare"].is_empty(), "selector found without a compare");
    Ok(format!("{} fixtures, {blocks} blocks, {edges} edges match the reference", fixtures.len()))
}

fn connector_topology() -> Outcome {
    let callee = ContractGraph::from_bytecode(&fixtures::callee_bytes());
    let connect = |sel: u32| {
        let caller = ContractGraph::from_bytecode(&fixtures::caller_bytes(sel));
        (connect_cfgs(&caller, &callee), caller.split_at_calls().cfg)
    };

    let (rcfg, cfg_t) = connect(0x11111111);
    let f_p = cfg_t
        .blocks()
        .iter()
        .find(|b| b.terminator().class() == OpClass::Call)
        .ok_or("no call block in the split caller")?;
    let f_n = cfg_t.block_at_offset(f_p.end_offset()).ok_or("no block after the call")?;
    let f_p = f_p.id;

    let entry = callee.selectors.iter().find(|s| s.value == [0x11; 4]).ok_or("callee lacks 0x11111111")?.entry_block;
    let reachable = callee.cfg.reachable_from([entry]);
    let returning: BTreeSet<usize> = callee
        .cfg
        .blocks()
        .iter()
        .filter(|b| reachable[b.id] && b.terminator().spec.byte_value == 0xf3)
        .map(|b| b.id)
        .collect();
    let copy_of = |original: usize| {
        rcfg.nodes()
            .iter()
            .position(|n| matches!(n.provenance, Provenance::Callee { original: o, .. } if o == original))
    };
    let mut expected = BTreeSet::new();
    expected.insert((f_p, copy_of(entry).ok_or("callee entry was not copied")?, EdgeKind::Call));
    for exit in &returning {
        expected.insert((copy_of(*exit).ok_or("callee exit was not copied")?, f_n, EdgeKind::ReturnLink));
    }
    let cross: BTreeSet<_> = rcfg.cross_edges().map(|e| (e.from, e.to, e.kind)).collect();
    ensure!(cross == expected, "cross edges {cross:?}, expected {expected:?}");
    ensure!(!rcfg.edges().iter().any(|e| e.from == f_p && e.to == f_n), "f_p -> f_n survived");

    let stripped = rcfg.strip_cross_edges();
    ensure!(stripped.blocks() == cfg_t.blocks(), "stripped blocks differ from the split caller");
    ensure!(stripped.edges() == cfg_t.edges(), "stripped edges {:?} vs {:?}", stripped.edges(), cfg_t.edges());

    let (no_match, _) = connect(0x44444444);
    let (no_return, _) = connect(0x22222222);
    let n_match = no_match.cross_edges().count();
    let n_return = no_return.cross_edges().count();
    ensure!(n_match == 0, "no-match fixture has {n_match} cross edges");
    ensure!(n_return == 1, "no-RETURN fixture has {n_return} cross edges");
    ensure!(no_return.cross_edges().all(|e| e.kind == EdgeKind::Call), "no-RETURN fixture links back");
    Ok(format!("cross edges {cross:?}; stripping restores the split caller; no-match 0, no-RETURN 1"))
}

fn random_sequence(rng: &mut ChaCha8Rng, defined: &[u8]) -> Vec<u8> {
    let mut code = Vec::new();
    for _ in 0..rng.random_range(0..=30) {
        let byte = if rng.random_bool(0.4) {
            rng.random_range(0x5f..=0x7f)
        } else {
            defined[rng.random_range(0..defined.len())]
        };
        code.push(byte);
        if (0x60..=0x7f).contains(&byte) {
            // small values keep AND results and DUP copies interesting
            let width = (byte - 0x5f) as usize;
            let small = rng.random_bool(0.5);
            code.extend((0..width).map(|k| if small && k + 1 < width { 0 } else { rng.random::<u8>() }));
        }
    }
    code
}

fn path_feasibility() -> Outcome {
    let defined: Vec<u8> = oracle::reference_table().keys().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x57ac);
    let (mut underflows, mut overflows, mut constants) = (0, 0, 0);
    for case in 0..500 {
        let code = random_sequence(&mut rng, &defined);
        let instrs = disassemble(&code);
        let ops = oracle::decode(&code);
        ensure!(instrs.len() == ops.len() && instrs.len() <= 30, "case {case}: decode disagreement");
        let height = if rng.random_bool(0.1) { rng.random_range(1016..=1024) } else { rng.random_range(0..=6) };
        let initial: Vec<U256> = (0..height).map(|_| U256::from(rng.random::<u64>())).collect();
        let concrete = oracle::run_concrete(&ops, initial);

        let mut stack = SymbolicStack::with_height(height);
        for (i, ins) in instrs.iter().enumerate() {
            match stack.apply(ins) {
                Err(fault) => {
                    let kind = match fault {
                        StackFault::Underflow { .. } => oracle::Fault::Underflow,
                        StackFault::Overflow => oracle::Fault::Overflow,
                    };
                    ensure!(
                        concrete.fault == Some((i, kind)),
                        "case {case}: {fault} at {i}, concrete {:?}",
                        concrete.fault
                    );
                    match kind {
                        oracle::Fault::Underflow => underflows += 1,
                        oracle::Fault::Overflow => overflows += 1,
                    }
                    break;
                }
                Ok(_) => {
                    ensure!(
                        concrete.fault.is_none_or(|(at, _)| at > i),
                        "case {case}: concrete faults at {i}, symbolic does not"
                    );
                    ensure!(
                        stack.height() == concrete.heights[i],
                        "case {case}: height {} vs {} at {i}",
                        stack.height(),
                        concrete.heights[i]
                    );
                    for (k, cell) in stack.items().iter().enumerate() {
                        if let StackCell::Constant(v) = cell {
                            constants += 1;
                            ensure!(concrete.stacks[i][k] == *v, "case {case}: constant {v:#x} at slot {k} after {i}");
                        }
                    }
                }
            }
        }
    }
    ensure!(underflows > 0 && overflows > 0, "coverage: {underflows} underflows, {overflows} overflows");

    let underflow = Cfg::from_bytecode(&assemble("PUSH1 @t JUMP t: JUMPDEST POP STOP").unwrap());
    let verdict = validate_path(&underflow, &[0, 1]).map_err(|e| e.to_string())?.verdict;
    ensure!(
        matches!(verdict, Verdict::Infeasible { step: 1, reason: InfeasibleReason::StackUnderflow { .. }, .. }),
        "underflow fixture: {verdict:?}"
    );

    let straight =
        Cfg::from_bytecode(&assemble("PUSH1 @b JUMP b: JUMPDEST PUSH1 @c JUMP c: JUMPDEST PUSH1 1 POP STOP").unwrap());
    let cond = validate_path(&straight, &[0, 1, 2]).map_err(|e| e.to_string())?;
    ensure!(cond.verdict == Verdict::Feasible, "unconditional path: {:?}", cond.verdict);
    ensure!(
        cond.edge_conditions == [EdgeCondition::DefaultTrue, EdgeCondition::DefaultTrue],
        "edge conditions {:?}",
        cond.edge_conditions
    );
    Ok(format!(
        "500 sequences agree ({underflows} underflows, {overflows} overflows, {constants} constant slots checked); \
         underflow rejected; unconditional path accepted"
    ))
}

fn exhaustive_fixtures() -> Vec<(&'static str, RCfg)> {
    let callee = ContractGraph::from_bytecode(&fixtures::callee_bytes());
    let single = |src: &str| RCfg::single(&ContractGraph::from_bytecode(&assemble(src).unwrap()));
    let pair = |caller: Vec<u8>| connect_cfgs(&ContractGraph::from_bytecode(&caller), &callee);
    vec![
        ("callee", RCfg::single(&callee)),
        ("dispatching caller with callee", pair(fixtures::dispatcher_caller_bytes())),
        ("direct caller with callee", pair(fixtures::caller_bytes(0x11111111))),
        ("branching callee function", pair(fixtures::caller_bytes(0x33333333))),
        (
            "three diamonds",
            single(
                "CALLVALUE PUSH1 @a JUMPI PUSH1 1 POP a: JUMPDEST \
                 CALLER PUSH1 @b JUMPI PUSH1 2 POP b: JUMPDEST \
                 ORIGIN PUSH1 @c JUMPI PUSH1 3 POP c: JUMPDEST STOP",
            ),
        ),
        (
            "four diamonds",
            single(
                "CALLVALUE PUSH1 @a JUMPI PUSH1 1 POP a: JUMPDEST \
                 CALLER PUSH1 @b JUMPI PUSH1 2 POP b: JUMPDEST \
                 ORIGIN PUSH1 @c JUMPI PUSH1 3 POP c: JUMPDEST \
                 GAS PUSH1 @d JUMPI PUSH1 4 POP d: JUMPDEST STOP",
            ),
        ),
        ("infeasible branch", single("PUSH1 1 CALLVALUE PUSH1 @a JUMPI POP POP STOP a: JUMPDEST POP STOP")),
        ("dispatcher", single(&format!("PUSH1 0 CALLDATALOAD PUSH1 0xe0 SHR {}", dispatcher_body()))),
    ]
}

fn path_exhaustiveness() -> Outcome {
    let limits = PathLimits::new(1000, 100_000, 2).map_err(|e| e.to_string())?;
    let mut total = 0;
    let mut rejected = 0;
    for (name, rcfg) in exhaustive_fixtures() {
        let succ = |n: usize| -> Vec<usize> {
            rcfg.successors(n).iter().map(|e| e.to).collect::<BTreeSet<_>>().into_iter().collect()
        };
        let mut simple = Vec::new();
        for entry in rcfg.entries() {
            simple.extend(oracle::simple_paths(entry.block, &succ).ok_or(format!("{name}: cycle"))?);
        }
        ensure!(!simple.is_empty() && simple.len() <= 16, "{name}: {} simple paths", simple.len());
        let mut expected = BTreeSet::new();
        for p in simple {
            if validate_path(&rcfg, &p).map_err(|e| format!("{name}: {e}"))?.verdict.is_feasible() {
                expected.insert(p);
            } else {
                rejected += 1;
            }
        }
        let paths = enumerate_paths(&rcfg, &limits);
        ensure!(paths.iter().all(|p| !p.truncated), "{name}: truncated output");
        let got: BTreeSet<Vec<usize>> = paths.iter().map(|p| p.blocks.clone()).collect();
        ensure!(got.len() == paths.len(), "{name}: duplicate walks");
        ensure!(got == expected, "{name}:\n  got {got:?}\n  expected {expected:?}");
        total += got.len();
    }
    ensure!(rejected > 0, "no fixture exercised an infeasible simple path");

    let looping = RCfg::single(&ContractGraph::from_bytecode(
        &assemble("PUSH1 0 l: JUMPDEST PUSH1 1 ADD DUP1 PUSH1 10 GT PUSH1 @l JUMPI POP STOP").unwrap(),
    ));
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let _ = tx.send(enumerate_paths(&looping, &PathLimits::new(64, 2048, 2).unwrap()));
    });
    let loop_paths = rx.recv_timeout(Duration::from_secs(30)).map_err(|_| "loop fixture did not terminate")?;
    ensure!(!loop_paths.is_empty(), "loop fixture produced nothing");
    for p in &loop_paths {
        let mut visits = BTreeMap::new();
        for b in &p.blocks {
            *visits.entry(b).or_insert(0) += 1;
        }
        ensure!(visits.values().all(|v| *v <= 2), "loop walk {:?} exceeds 2 visits", p.blocks);
    }
    Ok(format!(
        "{total} paths over 8 fixtures equal the feasible simple paths ({rejected} infeasible excluded); \
         loop fixture yields {} walks",
        loop_paths.len()
    ))
}

fn strings(docs: &[&[&str]]) -> Vec<Vec<String>> {
    docs.iter().map(|d| d.iter().map(|s| s.to_string()).collect()).collect()
}

fn compare_dense(corpus: &[Vec<String>], window: usize, tfidf: TfIdfVariant) -> Result<(f64, Vec<Vec<f64>>), String> {
    let (vocab, graph) = build_graph(corpus, &FeatureConfig { window, tfidf }).map_err(|e| e.to_string())?;
    let mut order: Vec<String> = vocab.tokens().to_vec();
    let distinct: BTreeSet<&String> = corpus.iter().flatten().collect();
    order.sort();
    ensure!(order.iter().collect::<BTreeSet<_>>() == distinct, "vocabulary is not the token set");
    let order = vocab.tokens();
    let reference = oracle::dense_adjacency(corpus, order, window, tfidf == TfIdfVariant::Sublinear);
    let dense = graph.to_dense();
    ensure!(dense.len() == reference.len(), "size {} vs {}", dense.len(), reference.len());
    let mut worst: f64 = 0.0;
    for (i, (a, b)) in dense.iter().zip(&reference).enumerate() {
        for (j, (x, y)) in a.iter().zip(b).enumerate() {
            let diff = (x - y).abs();
            ensure!(diff <= 1e-9, "A[{i}][{j}] = {x}, reference {y}");
            worst = worst.max(diff);
        }
    }
    Ok((worst, dense))
}

fn adjacency_oracle() -> Outcome {
    let corpus = strings(&[
        &["PUSH1", "ADD", "MSTORE", "PUSH1", "ADD"],
        &["ADD", "MSTORE", "CALL"],
        &["PUSH1", "SSTORE", "CALL", "SSTORE", "PUSH1", "SSTORE"],
    ]);
    let mut worst: f64 = 0.0;
    for tfidf in [TfIdfVariant::Raw, TfIdfVariant::Sublinear] {
        for window in [2, 3, 20] {
            let (w, dense) = compare_dense(&corpus, window, tfidf)?;
            worst = worst.max(w);
            ensure!(dense.len() == 8, "expected 3 + 5 nodes, got {}", dense.len());
            for (i, row) in dense.iter().enumerate() {
                ensure!(row[i] == 1.0, "diagonal {i} is {}", row[i]);
                for (j, v) in row.iter().enumerate() {
                    ensure!(*v == dense[j][i], "asymmetric at ({i}, {j})");
                    if i < 3 && j < 3 && i != j {
                        ensure!(*v == 0.0, "path-path entry ({i}, {j}) is {v}");
                    }
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0xadd1);
    let alphabet = ["PUSH1", "ADD", "MSTORE", "CALL", "SSTORE", "0x20", "SEL_a9059cbb", "LARGECONST"];
    for _ in 0..200 {
        let n = rng.random_range(1..=10);
        let corpus: Vec<Vec<String>> = (0..n)
            .map(|_| {
                let len = rng.random_range(1..=12);
                (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())].to_string()).collect()
            })
            .collect();
        let tfidf = if rng.random_bool(0.5) { TfIdfVariant::Raw } else { TfIdfVariant::Sublinear };
        let (w, _) = compare_dense(&corpus, rng.random_range(2..=6), tfidf)?;
        worst = worst.max(w);
    }

    // four single-window documents: A and B each in two windows, together in two
    let pmi_corpus = strings(&[&["A", "B"], &["A", "B"], &["C", "D"], &["C", "D"]]);
    let vocab = build_vocab(&pmi_corpus).map_err(|e| e.to_string())?;
    let ppmi = compute_ppmi(&pmi_corpus, &vocab, 2).map_err(|e| e.to_string())?;
    let (a, b) = (vocab.ordinal("A").unwrap(), vocab.ordinal("B").unwrap());
    let pmi = ppmi.get(&(a.min(b), a.max(b))).copied().unwrap_or_default();
    ensure!((pmi - 2f64.ln()).abs() <= 1e-12, "PMI(A, B) = {pmi}");

    let tf_corpus = strings(&[&["X", "X", "X", "Y"], &["Y", "Z"]]);
    let vocab = build_vocab(&tf_corpus).map_err(|e| e.to_string())?;
    let tfidf = compute_tfidf(&tf_corpus, &vocab, TfIdfVariant::Raw).map_err(|e| e.to_string())?;
    let w = tfidf.get(&(0, vocab.ordinal("X").unwrap())).copied().unwrap_or_default();
    ensure!((w - 3.0 * 2f64.ln()).abs() <= 1e-12, "tfidf(X) = {w}");
    ensure!(!tfidf.contains_key(&(0, vocab.ordinal("Y").unwrap())), "token in every path has weight");
    Ok(format!("3x5 fixture and 200 random corpora within {worst:.1e}; PMI ln 2 and TF-IDF 3 ln 2 reproduced"))
}

fn write_inputs(dir: &Path) {
    let hex = |code: Vec<u8>| format!("0x{}\n", hex::encode(code));
    fs::write(dir.join("callee.hex"), hex(fixtures::callee_bytes())).unwrap();
    fs::write(dir.join("caller.hex"), hex(fixtures::dispatcher_caller_bytes())).unwrap();
    fs::write(dir.join("direct.hex"), hex(fixtures::caller_bytes(0x11111111))).unwrap();
    fs::write(dir.join("branching.hex"), hex(fixtures::caller_bytes(0x33333333))).unwrap();
    let event = |id: &str, caller: &str, label: &str| {
        format!(
            r#"{{"event_id":"{id}","chain":"eth","caller_address":"0x00000000000000000000000000000000000000aa","callee_address":"0x00000000000000000000000000000000000000bb","label":"{label}","caller_code":"{caller}","callee_code":"callee.hex"}}"#
        )
    };
    let manifest = [
        event("e1", "caller.hex", "access_control"),
        event("e2", "direct.hex", "flash_loan"),
        event("e3", "branching.hex", "negative"),
        event("e4", "callee.hex", "negative"),
    ]
    .join("\n");
    fs::write(dir.join("events.jsonl"), manifest).unwrap();
}

fn build_bundle(inputs: &Path, out: &Path, threads: usize) -> Result<Vec<(String, Vec<u8>)>, String> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
    pool.install(|| {
        let manifest = Manifest::load(&inputs.join("events.jsonl")).map_err(|e| e.to_string())?;
        let resolutions = resolve_manifest(&manifest, &CodeResolver::new(None, None), threads);
        let (corpus, _) = collect_corpus(&resolutions, &PathLimits::default());
        let opts = ExportOptions {
            features: FeatureConfig::default(),
            mode: BundleMode::Supervised { ratio: 0.5, seed: 7, oversample: Oversample::Parity },
        };
        export_dataset(out, corpus, &opts).map_err(|e| e.to_string())
    })?;
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(out)
        .map_err(|e| e.to_string())?
        .map(|e| {
            let path = e.unwrap().path();
            (path.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&path).unwrap())
        })
        .collect();
    files.sort();
    Ok(files)
}

fn bundle_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_inputs(dir.path());
    let first = build_bundle(dir.path(), &dir.path().join("a"), 4)?;
    let again = build_bundle(dir.path(), &dir.path().join("b"), 4)?;
    let serial = build_bundle(dir.path(), &dir.path().join("c"), 1)?;
    let names: Vec<&str> = first.iter().map(|(n, _)| n.as_str()).collect();
    ensure!(names == ["graph.txt", "paths.jsonl", "split.json", "vocab.txt"], "bundle files {names:?}");
    ensure!(first == again, "rerun differs");
    ensure!(first == serial, "single-threaded run differs");
    let bytes: usize = first.iter().map(|(_, b)| b.len()).sum();
    Ok(format!("3 runs (4, 4 and 1 threads) byte-identical over {bytes} bytes"))
}
