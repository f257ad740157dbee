use std::collections::BTreeSet;

use super::{BlockId, Cfg, Selector};

/// The blocks of one function: everything reachable from its entry without
/// passing through another function's entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSegment {
    /// `None` for the fallback segment rooted at the contract entry.
    pub selector: Option<Selector>,
    pub entry_block: BlockId,
    /// Ascending block ids.
    pub blocks: Vec<BlockId>,
    pub has_calls: bool,
    pub ends_with_return: bool,
}

impl FunctionSegment {
    pub fn contains(&self, id: BlockId) -> bool {
        self.blocks.binary_search(&id).is_ok()
    }

    pub fn is_fallback(&self) -> bool {
        self.selector.is_none()
    }

    /// Blocks terminated by RETURN.
    pub fn exits(&self, cfg: &Cfg) -> Vec<BlockId> {
        self.blocks.iter().copied().filter(|id| cfg.block(*id).ends_with_return()).collect()
    }
}

fn collect(cfg: &Cfg, root: BlockId, barrier: &BTreeSet<BlockId>) -> Vec<BlockId> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![root];
    while let Some(id) = stack.pop() {
        if !seen.insert(id) {
            continue;
        }
        for edge in cfg.successors(id) {
            if !barrier.contains(&edge.to) && !seen.contains(&edge.to) {
                stack.push(edge.to);
            }
        }
    }
    seen.into_iter().collect()
}

fn finish(cfg: &Cfg, selector: Option<Selector>, entry_block: BlockId, blocks: Vec<BlockId>) -> FunctionSegment {
    let has_calls = blocks.iter().any(|id| cfg.block(*id).contains_call());
    let ends_with_return = blocks.iter().any(|id| cfg.block(*id).ends_with_return());
    FunctionSegment { selector, entry_block, blocks, has_calls, ends_with_return }
}

/// One segment per selector, in selector order, followed by the fallback
/// segment (absent only for empty code). Orphan blocks belong to none.
pub fn segment_functions(cfg: &Cfg, selectors: &[Selector]) -> Vec<FunctionSegment> {
    let entries: BTreeSet<BlockId> = selectors.iter().map(|s| s.entry_block).collect();
    let mut segments = Vec::new();
    let mut owned = BTreeSet::new();

    for selector in selectors {
        let mut barrier = entries.clone();
        barrier.remove(&selector.entry_block);
        let blocks = collect(cfg, selector.entry_block, &barrier);
        owned.extend(blocks.iter().copied());
        segments.push(finish(cfg, Some(selector.clone()), selector.entry_block, blocks));
    }

    if let Some(entry) = cfg.entry() {
        if !owned.contains(&entry) {
            let mut barrier = owned;
            barrier.extend(entries);
            let blocks = collect(cfg, entry, &barrier);
            segments.push(finish(cfg, None, entry, blocks));
        }
    }
    segments
}
