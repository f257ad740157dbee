//! Cross-contract EVM bytecode analysis.
//!
//! Bytecode goes through [`disasm`] and [`cfg`]; [`connector`] splices a
//! caller graph and a callee graph together at matching call sites;
//! [`paths`] enumerates data paths that [`validator`] accepts; [`features`]
//! turns a labelled path corpus into a path/opcode graph and writes it out
//! as a dataset bundle. [`ingest`] loads bytecode and event manifests and
//! [`document`] serializes graphs.

pub mod cfg;
pub mod connector;
pub mod disasm;
pub mod document;
pub mod features;
pub mod fixtures;
pub mod ingest;
pub mod paths;
pub mod pipeline;
pub mod validator;

pub use cfg::{BasicBlock, BlockId, Cfg, Edge, EdgeKind, NodeType, Selector};
pub use connector::{connect_cfgs, ContractGraph, EntryKind, RCfg};
pub use disasm::{disassemble, Instruction, OpcodeSpec};
pub use features::{FeatureConfig, HeteroGraph, Vocabulary};
pub use paths::{DataPath, Label, PathLimits};
pub use validator::{validate_path, PathCondition, Verdict};
