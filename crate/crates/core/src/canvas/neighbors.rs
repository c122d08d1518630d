//! Three-neighbor maintenance and face-neighbor queries.
//!
//! A cell's face neighbor is the cell of equal depth across that face, or
//! the deepest existing shallower cell there. Neighbors that share the
//! parent are `c ± 2^axis`; the remaining one per axis is stored.

use super::{CellRef, DeepCanvas, Face, NONE};

impl DeepCanvas {
    /// Face neighbor of `c` across `face` with depth ≤ depth(c), or `None`
    /// at the canvas boundary. Uses sibling arithmetic, the stored neighbor
    /// pool, or root grid arithmetic.
    pub fn face_neighbor(&self, c: CellRef, face: Face) -> Option<CellRef> {
        if self.is_root(c) {
            let mut xyz = self.root_xyz(c.0).map(|v| v as i64);
            xyz[face.axis] += if face.positive { 1 } else { -1 };
            return self.root_at(xyz);
        }
        let bit = (self.slot(c) >> face.axis) & 1;
        let step = 1u32 << face.axis;
        match (bit, face.positive) {
            (0, true) => Some(CellRef(c.0 + step)),
            (1, false) => Some(CellRef(c.0 - step)),
            _ => self.stored_neighbor(c, face.axis),
        }
    }

    /// Whether the face neighbor across `face` is a sibling.
    pub fn is_sibling_face(&self, c: CellRef, face: Face) -> bool {
        !self.is_root(c) && ((self.slot(c) >> face.axis) & 1 == 1) != face.positive
    }

    /// Stored-neighbor value for `c` along `axis`, derived from the parent's
    /// face neighbor: the mirrored child of an equal-depth refined neighbor,
    /// otherwise the neighbor itself.
    pub(crate) fn compute_stored_neighbor(&self, c: CellRef, axis: usize) -> u32 {
        let face = self.stored_face(c, axis);
        if self.is_root(c) {
            return self.face_neighbor(c, face).map_or(NONE, |n| n.0);
        }
        let parent = CellRef(self.pools.parent[c.index()]);
        match self.face_neighbor(parent, face) {
            None => NONE,
            Some(pn) => {
                if self.depth(pn) == self.depth(parent) {
                    if let Some(f) = self.first_child(pn) {
                        return f.0 + (self.slot(c) ^ (1 << axis));
                    }
                }
                pn.0
            }
        }
    }

    fn set_stored(&mut self, c: CellRef, axis: usize, value: u32) {
        if self.pools.neighbor3[c.index()][axis] != value {
            self.pools.neighbor3[c.index()][axis] = value;
            self.blocks.mark(c.0);
        }
    }

    /// Recomputes the stored neighbor along `axis` for `c` and for every
    /// descendant of `c` lying on the same outer face (top-down).
    fn recompute_face_subtree(&mut self, c: CellRef, axis: usize) {
        let v = self.compute_stored_neighbor(c, axis);
        self.set_stored(c, axis, v);
        if let Some(f) = self.first_child(c) {
            let side = (self.stored_face(c, axis).positive) as u32;
            for k in 0..8u32 {
                if (k >> axis) & 1 == side {
                    self.recompute_face_subtree(CellRef(f.0 + k), axis);
                }
            }
        }
    }

    /// Repairs stored neighbors after `c` gained or lost its children: the
    /// children themselves (if any) and the face-adjacent descendants of
    /// equal-depth refined neighbors.
    pub(crate) fn repair_after_topology_change(&mut self, c: CellRef) {
        if let Some(ch) = self.children(c) {
            for k in ch {
                for axis in 0..3 {
                    let v = self.compute_stored_neighbor(k, axis);
                    self.set_stored(k, axis, v);
                }
            }
        }
        let depth = self.depth(c);
        for face in Face::ALL {
            let Some(n) = self.face_neighbor(c, face) else {
                continue;
            };
            if self.depth(n) != depth {
                continue;
            }
            let Some(f) = self.first_child(n) else {
                continue;
            };
            // Children of `n` touching the shared face sit on the side facing `c`.
            let side = (!face.positive) as u32;
            for k in 0..8u32 {
                if (k >> face.axis) & 1 == side {
                    self.recompute_face_subtree(CellRef(f.0 + k), face.axis);
                }
            }
        }
    }

    /// Brings the stored neighbors of `cells`, and of everything whose stored
    /// neighbor may have been invalidated by their topology, up to date.
    pub fn update_neighbors(&mut self, cells: &[CellRef]) {
        let mut sorted: Vec<CellRef> = cells.iter().copied().filter(|&c| self.is_live(c)).collect();
        sorted.sort_by_key(|&c| (self.depth(c), c.0));
        for c in sorted {
            for axis in 0..3 {
                let v = self.compute_stored_neighbor(c, axis);
                self.set_stored(c, axis, v);
            }
            self.repair_after_topology_change(c);
        }
    }

    /// Recomputes the whole neighbor pool top-down.
    pub fn rebuild_neighbors(&mut self) {
        for c in self.breadth_first() {
            for axis in 0..3 {
                let v = self.compute_stored_neighbor(c, axis);
                self.set_stored(c, axis, v);
            }
        }
    }

    /// Every leaf sharing a face with `c`.
    pub fn all_face_neighbors(&self, c: CellRef) -> Vec<CellRef> {
        let mut out = Vec::new();
        for face in Face::ALL {
            let Some(n) = self.face_neighbor(c, face) else {
                continue;
            };
            self.face_leaves(n, face.axis, (!face.positive) as u32, &mut out);
        }
        out
    }

    /// Leaves of the subtree of `n` on its `side` (0 = negative) along `axis`.
    pub fn face_leaves(&self, n: CellRef, axis: usize, side: u32, out: &mut Vec<CellRef>) {
        match self.first_child(n) {
            None => out.push(n),
            Some(f) => {
                for k in 0..8u32 {
                    if (k >> axis) & 1 == side {
                        self.face_leaves(CellRef(f.0 + k), axis, side, out);
                    }
                }
            }
        }
    }
}
