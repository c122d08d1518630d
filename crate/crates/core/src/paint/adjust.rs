//! Deferred refine/coarsen marks, drained a bounded number per frame.

use std::collections::{BTreeMap, VecDeque};

use crate::canvas::CellRef;
use crate::color::Rgba;

pub const DEFAULT_FRAME_BUDGET: usize = 1024;
/// Children whose channels all lie within this of their mean may merge.
pub const DEFAULT_MERGE_TOLERANCE: f32 = 1.0 / 64.0;

/// A leaf waiting to be split. `pre` is its color before the first stamp
/// that asked for the split; `stamps` lists every stamp that touched it
/// since, to be re-applied at the finer level.
#[derive(Clone, Debug, PartialEq)]
pub struct RefineMark {
    pub pre: Rgba,
    pub stamps: Vec<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoarsenMark {
    pub target_depth: u32,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AdjustStats {
    pub refined: usize,
    pub coarsened: usize,
    pub dropped: usize,
    pub exhausted: bool,
}

impl AdjustStats {
    pub fn work(&self) -> usize {
        self.refined + self.coarsened
    }
}

#[derive(Clone, Debug)]
pub struct AdjustmentQueue {
    order: VecDeque<CellRef>,
    refine: BTreeMap<CellRef, RefineMark>,
    coarsen: BTreeMap<CellRef, CoarsenMark>,
    pub per_frame_budget: usize,
    pub merge_tolerance: f32,
}

impl Default for AdjustmentQueue {
    fn default() -> Self {
        AdjustmentQueue {
            order: VecDeque::new(),
            refine: BTreeMap::new(),
            coarsen: BTreeMap::new(),
            per_frame_budget: DEFAULT_FRAME_BUDGET,
            merge_tolerance: DEFAULT_MERGE_TOLERANCE,
        }
    }
}

pub(crate) enum Mark {
    Refine(RefineMark),
    Coarsen(CoarsenMark),
}

impl AdjustmentQueue {
    pub fn new(per_frame_budget: usize) -> Self {
        AdjustmentQueue {
            per_frame_budget,
            ..Default::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.refine.is_empty() && self.coarsen.is_empty()
    }

    pub fn pending(&self) -> usize {
        self.refine.len() + self.coarsen.len()
    }

    pub fn refine_marks(&self) -> impl Iterator<Item = (&CellRef, &RefineMark)> {
        self.refine.iter()
    }

    pub fn coarsen_marks(&self) -> impl Iterator<Item = (&CellRef, &CoarsenMark)> {
        self.coarsen.iter()
    }

    pub fn has_refine(&self, c: CellRef) -> bool {
        self.refine.contains_key(&c)
    }

    pub fn has_coarsen(&self, c: CellRef) -> bool {
        self.coarsen.contains_key(&c)
    }

    pub(crate) fn refine_mark_mut(&mut self, c: CellRef) -> Option<&mut RefineMark> {
        self.refine.get_mut(&c)
    }

    pub fn mark_refine(&mut self, c: CellRef, mark: RefineMark) {
        self.coarsen.remove(&c);
        if self.refine.insert(c, mark).is_none() {
            self.order.push_back(c);
        }
    }

    /// Marks `c` for coarsening unless it already carries a mark.
    pub fn mark_coarsen(&mut self, c: CellRef, target_depth: u32) {
        if self.refine.contains_key(&c) {
            return;
        }
        if let Some(m) = self.coarsen.get_mut(&c) {
            m.target_depth = m.target_depth.min(target_depth);
            return;
        }
        self.coarsen.insert(c, CoarsenMark { target_depth });
        self.order.push_back(c);
    }

    pub fn unmark(&mut self, c: CellRef) {
        self.refine.remove(&c);
        self.coarsen.remove(&c);
    }

    /// Queue slots present now; marks added while draining them wait for
    /// the next frame.
    pub(crate) fn frame_len(&self) -> usize {
        self.order.len()
    }

    pub(crate) fn pop(&mut self) -> Option<(CellRef, Option<Mark>)> {
        let c = self.order.pop_front()?;
        let mark = match self.refine.remove(&c) {
            Some(r) => Some(Mark::Refine(r)),
            None => self.coarsen.remove(&c).map(Mark::Coarsen),
        };
        Some((c, mark))
    }

    pub(crate) fn push_front(&mut self, c: CellRef, mark: Mark) {
        match mark {
            Mark::Refine(r) => {
                self.refine.insert(c, r);
            }
            Mark::Coarsen(m) => {
                self.coarsen.insert(c, m);
            }
        }
        self.order.push_front(c);
    }

    pub fn clear(&mut self) {
        self.order.clear();
        self.refine.clear();
        self.coarsen.clear();
    }
}
