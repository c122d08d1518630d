//! Block-granular dirty tracking over the index pools.

use std::collections::BTreeSet;

/// Splits the linear index space into fixed-size blocks and records which
/// blocks were written since the last sync.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMap {
    block_size: u32,
    dirty: BTreeSet<u32>,
}

impl BlockMap {
    pub fn new(block_size: u32) -> Self {
        assert!(block_size > 0);
        BlockMap {
            block_size,
            dirty: BTreeSet::new(),
        }
    }

    pub fn block_size(&self) -> u32 {
        self.block_size
    }

    #[inline]
    pub fn block_of(&self, index: u32) -> u32 {
        index / self.block_size
    }

    #[inline]
    pub fn mark(&mut self, index: u32) {
        let b = self.block_of(index);
        self.dirty.insert(b);
    }

    pub fn dirty_count(&self) -> usize {
        self.dirty.len()
    }

    pub fn is_dirty(&self, block: u32) -> bool {
        self.dirty.contains(&block)
    }

    pub fn take(&mut self) -> BTreeSet<u32> {
        std::mem::take(&mut self.dirty)
    }
}
