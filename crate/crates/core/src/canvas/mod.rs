//! Index-pool representation of an array of deep octrees.
//!
//! Every cell is identified by a 32-bit linear index into a set of parallel
//! pools (parent, first child, depth/flags, color, stored neighbors). The
//! pool starts with the `n³` root array, which is never freed. Children are
//! always created eight at a time in consecutive slots, so only the first
//! child index is stored; the slot of a child is `bx + 2*by + 4*bz`, where
//! each bit selects the lower or upper half along that axis.
//!
//! Each cell additionally stores three face neighbors, one per axis, on the
//! side where the neighbor does not share the cell's parent. The other three
//! face neighbors are siblings and follow from index arithmetic.

mod blocks;
mod locate;
mod neighbors;

use std::collections::BTreeSet;

use glam::DVec3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::color::Rgba;
use crate::paint::room::Room;

pub use blocks::BlockMap;

/// Sentinel for "no cell" in the raw index pools.
pub const NONE: u32 = u32::MAX;

/// Number of bits of `depth_flags` holding the depth.
const DEPTH_MASK: u8 = 0x1f;
/// Set on every allocated cell.
pub const FLAG_LIVE: u8 = 0x20;

pub const DEFAULT_CAPACITY: u32 = 32 * 1024 * 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CanvasError {
    #[error("cell pool exhausted (capacity {capacity} cells)")]
    PoolExhausted { capacity: u32 },
    #[error("cell {0} is already at the maximum depth")]
    MaxDepthExceeded(u32),
    #[error("cell {0} is not a leaf")]
    NotALeaf(u32),
    #[error("children of cell {0} are not all leaves")]
    ChildrenNotLeaves(u32),
    #[error("cell {0} has no children")]
    NoChildren(u32),
    #[error("cell {0} is not allocated")]
    DeadCell(u32),
    #[error("point {0:?} lies outside the canvas")]
    OutOfCanvas([f64; 3]),
    #[error("invalid canvas config: {0}")]
    InvalidConfig(String),
    #[error("invalid room: {0}")]
    InvalidRoom(String),
}

/// A linear cell index into the canvas pools.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellRef(pub u32);

impl CellRef {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub(crate) fn from_raw(raw: u32) -> Option<CellRef> {
        (raw != NONE).then_some(CellRef(raw))
    }
}

/// Face of a cell: axis (0 = x, 1 = y, 2 = z) and side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Face {
    pub axis: usize,
    pub positive: bool,
}

impl Face {
    pub const ALL: [Face; 6] = [
        Face {
            axis: 0,
            positive: false,
        },
        Face {
            axis: 0,
            positive: true,
        },
        Face {
            axis: 1,
            positive: false,
        },
        Face {
            axis: 1,
            positive: true,
        },
        Face {
            axis: 2,
            positive: false,
        },
        Face {
            axis: 2,
            positive: true,
        },
    ];

    pub fn new(axis: usize, positive: bool) -> Self {
        Face { axis, positive }
    }

    pub fn sign(self) -> f64 {
        if self.positive {
            1.0
        } else {
            -1.0
        }
    }

    pub fn opposite(self) -> Face {
        Face {
            axis: self.axis,
            positive: !self.positive,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanvasConfig {
    pub root_count_per_axis: u32,
    /// Edge length of one root cell in meters.
    pub root_size: f64,
    /// Levels below the roots.
    pub max_depth: u32,
    /// Color composited behind the canvas by the renderer.
    pub background_rgba: Rgba,
    /// Depth levels dropped per doubling of the distance to the nearest room.
    pub detail_falloff: f64,
    /// Cells per dirty-tracking block.
    pub block_size: u32,
    /// Maximum number of cells (roots included).
    pub capacity: u32,
}

impl Default for CanvasConfig {
    fn default() -> Self {
        CanvasConfig {
            root_count_per_axis: 4,
            root_size: 10_000.0,
            max_depth: 24,
            background_rgba: Rgba::new(0.05, 0.05, 0.08, 1.0),
            detail_falloff: 1.0,
            block_size: 4096,
            capacity: DEFAULT_CAPACITY,
        }
    }
}

impl CanvasConfig {
    pub fn validate(&self) -> Result<(), CanvasError> {
        let bad = |m: &str| Err(CanvasError::InvalidConfig(m.to_string()));
        if self.root_count_per_axis < 1 {
            return bad("root_count_per_axis must be at least 1");
        }
        if !(1..=30).contains(&self.max_depth) {
            return bad("max_depth must be in [1, 30]");
        }
        if !(self.root_size.is_finite() && self.root_size > 0.0) {
            return bad("root_size must be positive");
        }
        if !self.background_rgba.is_valid() {
            return bad("background_rgba channels must be in [0, 1]");
        }
        if !(self.detail_falloff.is_finite() && self.detail_falloff >= 0.0) {
            return bad("detail_falloff must be non-negative");
        }
        if self.block_size == 0 {
            return bad("block_size must be positive");
        }
        let roots = (self.root_count_per_axis as u64).pow(3);
        if roots >= self.capacity as u64 || self.capacity == NONE {
            return bad("capacity must exceed the root count");
        }
        Ok(())
    }

    pub fn root_count(&self) -> u32 {
        self.root_count_per_axis.pow(3)
    }

    /// Edge length of the whole canvas in meters.
    pub fn extent(&self) -> f64 {
        self.root_count_per_axis as f64 * self.root_size
    }

    pub fn cell_width(&self, depth: u32) -> f64 {
        self.root_size * 0.5f64.powi(depth as i32)
    }

    /// Canvas bounds; the canvas is centered on the origin.
    pub fn bounds(&self) -> Aabb {
        let h = self.extent() * 0.5;
        Aabb {
            min: DVec3::splat(-h),
            max: DVec3::splat(h),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: DVec3,
    pub max: DVec3,
}

impl Aabb {
    pub fn center(&self) -> DVec3 {
        (self.min + self.max) * 0.5
    }

    pub fn size(&self) -> DVec3 {
        self.max - self.min
    }

    pub fn contains(&self, p: DVec3) -> bool {
        p.cmpge(self.min).all() && p.cmple(self.max).all()
    }

    pub fn intersects(&self, other: &Aabb) -> bool {
        self.min.cmple(other.max).all() && other.min.cmple(self.max).all()
    }

    /// Euclidean distance from `p` to the box (zero inside).
    pub fn distance_to(&self, p: DVec3) -> f64 {
        let d = (self.min - p).max(p - self.max).max(DVec3::ZERO);
        d.length()
    }
}

/// Integer location of a cell: depth and lattice coordinates at that depth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CellCoords {
    pub depth: u32,
    pub xyz: [u64; 3],
}

/// The parallel index pools.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OctreePools {
    pub parent: Vec<u32>,
    pub first_child: Vec<u32>,
    pub depth_flags: Vec<u8>,
    pub rgba: Vec<Rgba>,
    pub neighbor3: Vec<[u32; 3]>,
}

impl OctreePools {
    fn len(&self) -> usize {
        self.parent.len()
    }

    fn push_blank(&mut self) {
        self.parent.push(NONE);
        self.first_child.push(NONE);
        self.depth_flags.push(0);
        self.rgba.push(Rgba::TRANSPARENT);
        self.neighbor3.push([NONE; 3]);
    }

    fn clear(&mut self, i: usize) {
        self.parent[i] = NONE;
        self.first_child[i] = NONE;
        self.depth_flags[i] = 0;
        self.rgba[i] = Rgba::TRANSPARENT;
        self.neighbor3[i] = [NONE; 3];
    }
}

/// An array of deep octrees stored in index pools.
#[derive(Clone, Debug)]
pub struct DeepCanvas {
    config: CanvasConfig,
    pools: OctreePools,
    /// Base indices of freed 8-cell groups, lowest reused first.
    free_groups: BTreeSet<u32>,
    live_cells: u32,
    blocks: BlockMap,
    rooms: Vec<Room>,
}

impl DeepCanvas {
    pub fn new(config: CanvasConfig) -> Result<Self, CanvasError> {
        config.validate()?;
        let roots = config.root_count();
        let mut pools = OctreePools::default();
        for _ in 0..roots {
            pools.push_blank();
        }
        pools.depth_flags.iter_mut().for_each(|f| *f = FLAG_LIVE);
        let blocks = BlockMap::new(config.block_size);
        let mut canvas = DeepCanvas {
            config,
            pools,
            free_groups: BTreeSet::new(),
            live_cells: roots,
            blocks,
            rooms: Vec::new(),
        };
        for r in 0..roots {
            let c = CellRef(r);
            for axis in 0..3 {
                let n = canvas.compute_stored_neighbor(c, axis);
                canvas.pools.neighbor3[r as usize][axis] = n;
            }
            canvas.blocks.mark(r);
        }
        Ok(canvas)
    }

    /// Reassembles a canvas from raw pools, rebuilding the free list.
    /// Structural checks are left to [`DeepCanvas::check_invariants`].
    pub(crate) fn from_parts(
        config: CanvasConfig,
        pools: OctreePools,
        rooms: Vec<Room>,
    ) -> Result<Self, CanvasError> {
        config.validate()?;
        let roots = config.root_count() as usize;
        let n = pools.len();
        let mut free_groups = BTreeSet::new();
        let mut base = roots;
        while base + 8 <= n {
            if pools.depth_flags[base] & FLAG_LIVE == 0 {
                free_groups.insert(base as u32);
            }
            base += 8;
        }
        let live_cells = pools
            .depth_flags
            .iter()
            .filter(|f| **f & FLAG_LIVE != 0)
            .count() as u32;
        let mut blocks = BlockMap::new(config.block_size);
        for i in 0..n as u32 {
            blocks.mark(i);
        }
        Ok(DeepCanvas {
            config,
            pools,
            free_groups,
            live_cells,
            blocks,
            rooms,
        })
    }

    pub fn config(&self) -> &CanvasConfig {
        &self.config
    }

    pub fn pools(&self) -> &OctreePools {
        &self.pools
    }

    pub fn rooms(&self) -> &[Room] {
        &self.rooms
    }

    /// Adds or replaces (by name) a room.
    pub fn define_room(&mut self, room: Room) -> Result<(), CanvasError> {
        room.validate(&self.config)?;
        match self.rooms.iter_mut().find(|r| r.name == room.name) {
            Some(r) => *r = room,
            None => self.rooms.push(room),
        }
        Ok(())
    }

    pub fn room(&self, name: &str) -> Option<&Room> {
        self.rooms.iter().find(|r| r.name == name)
    }

    /// Number of allocated cells, roots included.
    pub fn cell_count(&self) -> u32 {
        self.live_cells
    }

    /// One past the highest index ever allocated.
    pub fn high_water(&self) -> u32 {
        self.pools.len() as u32
    }

    /// Fraction of the pool capacity in use, in percent.
    pub fn pool_occupancy_pct(&self) -> f64 {
        100.0 * self.live_cells as f64 / self.config.capacity as f64
    }

    pub fn root_count(&self) -> u32 {
        self.config.root_count()
    }

    #[inline]
    pub fn is_root(&self, c: CellRef) -> bool {
        c.0 < self.root_count()
    }

    #[inline]
    pub fn is_live(&self, c: CellRef) -> bool {
        self.pools
            .depth_flags
            .get(c.index())
            .is_some_and(|f| f & FLAG_LIVE != 0)
    }

    #[inline]
    pub fn depth(&self, c: CellRef) -> u32 {
        (self.pools.depth_flags[c.index()] & DEPTH_MASK) as u32
    }

    #[inline]
    pub fn parent(&self, c: CellRef) -> Option<CellRef> {
        CellRef::from_raw(self.pools.parent[c.index()])
    }

    #[inline]
    pub fn first_child(&self, c: CellRef) -> Option<CellRef> {
        CellRef::from_raw(self.pools.first_child[c.index()])
    }

    #[inline]
    pub fn is_leaf(&self, c: CellRef) -> bool {
        self.pools.first_child[c.index()] == NONE
    }

    pub fn children(&self, c: CellRef) -> Option<[CellRef; 8]> {
        self.first_child(c)
            .map(|f| std::array::from_fn(|k| CellRef(f.0 + k as u32)))
    }

    /// Child slot (`bx + 2by + 4bz`) of a non-root cell.
    #[inline]
    pub fn slot(&self, c: CellRef) -> u32 {
        debug_assert!(!self.is_root(c));
        (c.0 - self.root_count()) % 8
    }

    #[inline]
    pub fn rgba(&self, c: CellRef) -> Rgba {
        self.pools.rgba[c.index()]
    }

    pub fn set_rgba(&mut self, c: CellRef, rgba: Rgba) {
        self.pools.rgba[c.index()] = rgba;
        self.blocks.mark(c.0);
    }

    /// Raw stored neighbor along `axis`, on the side given by
    /// [`DeepCanvas::stored_face`].
    pub fn stored_neighbor(&self, c: CellRef, axis: usize) -> Option<CellRef> {
        CellRef::from_raw(self.pools.neighbor3[c.index()][axis])
    }

    /// The face whose neighbor is kept in the neighbor pool: the side away
    /// from the siblings for non-roots, the negative side for roots.
    pub fn stored_face(&self, c: CellRef, axis: usize) -> Face {
        if self.is_root(c) {
            Face::new(axis, false)
        } else {
            Face::new(axis, (self.slot(c) >> axis) & 1 == 1)
        }
    }

    pub fn cell_width(&self, c: CellRef) -> f64 {
        self.config.cell_width(self.depth(c))
    }

    pub fn root_xyz(&self, root: u32) -> [u64; 3] {
        let n = self.config.root_count_per_axis;
        [
            (root % n) as u64,
            ((root / n) % n) as u64,
            (root / (n * n)) as u64,
        ]
    }

    pub fn root_at(&self, xyz: [i64; 3]) -> Option<CellRef> {
        let n = self.config.root_count_per_axis as i64;
        if xyz.iter().any(|&v| v < 0 || v >= n) {
            return None;
        }
        Some(CellRef((xyz[0] + n * xyz[1] + n * n * xyz[2]) as u32))
    }

    /// Lattice coordinates of a cell at its own depth, found by walking to the root.
    pub fn cell_coords(&self, c: CellRef) -> CellCoords {
        let depth = self.depth(c);
        let mut xyz = [0u64; 3];
        let mut cur = c;
        let mut level = 0;
        while !self.is_root(cur) {
            let s = self.slot(cur);
            for (a, v) in xyz.iter_mut().enumerate() {
                *v |= (((s >> a) & 1) as u64) << level;
            }
            level += 1;
            cur = CellRef(self.pools.parent[cur.index()]);
        }
        let r = self.root_xyz(cur.0);
        for a in 0..3 {
            xyz[a] |= r[a] << depth;
        }
        CellCoords { depth, xyz }
    }

    /// Exact (for dyadic root sizes) cell center in canvas coordinates.
    pub fn coords_center(&self, cc: CellCoords) -> DVec3 {
        let half = self.config.cell_width(cc.depth + 1);
        let h = self.config.extent() * 0.5;
        DVec3::from_array(cc.xyz.map(|k| (2 * k + 1) as f64 * half - h))
    }

    pub fn cell_center(&self, c: CellRef) -> DVec3 {
        self.coords_center(self.cell_coords(c))
    }

    pub fn cell_bounds(&self, c: CellRef) -> Aabb {
        let center = self.cell_center(c);
        let h = DVec3::splat(self.cell_width(c) * 0.5);
        Aabb {
            min: center - h,
            max: center + h,
        }
    }

    /// All allocated cells, in index order.
    pub fn live_cells(&self) -> impl Iterator<Item = CellRef> + '_ {
        (0..self.pools.len() as u32)
            .map(CellRef)
            .filter(move |&c| self.is_live(c))
    }

    pub fn leaves(&self) -> impl Iterator<Item = CellRef> + '_ {
        self.live_cells().filter(move |&c| self.is_leaf(c))
    }

    /// Cells in breadth-first order (roots first, parents before children).
    pub fn breadth_first(&self) -> Vec<CellRef> {
        let mut order: Vec<CellRef> = (0..self.root_count()).map(CellRef).collect();
        let mut i = 0;
        while i < order.len() {
            if let Some(ch) = self.children(order[i]) {
                order.extend_from_slice(&ch);
            }
            i += 1;
        }
        order
    }

    /// Allocates a zeroed group of 8 consecutive cells, reusing the lowest
    /// freed group first.
    pub fn allocate_group(&mut self) -> Result<CellRef, CanvasError> {
        if let Some(base) = self.free_groups.pop_first() {
            return Ok(CellRef(base));
        }
        let base = self.pools.len() as u32;
        if base as u64 + 8 > self.config.capacity as u64 {
            return Err(CanvasError::PoolExhausted {
                capacity: self.config.capacity,
            });
        }
        for _ in 0..8 {
            self.pools.push_blank();
        }
        Ok(CellRef(base))
    }

    /// Returns a group to the free list. The cells must already be detached
    /// from the tree.
    fn free_group(&mut self, base: CellRef) {
        for k in 0..8 {
            let i = base.0 + k;
            if self.pools.depth_flags[i as usize] & FLAG_LIVE != 0 {
                self.live_cells -= 1;
            }
            self.pools.clear(i as usize);
            self.blocks.mark(i);
        }
        self.free_groups.insert(base.0);
    }

    /// Number of freed groups waiting for reuse.
    pub fn free_group_count(&self) -> usize {
        self.free_groups.len()
    }

    pub fn is_free_group(&self, base: CellRef) -> bool {
        self.free_groups.contains(&base.0)
    }

    /// Splits a leaf into eight children that inherit its color.
    pub fn refine_cell(&mut self, c: CellRef) -> Result<CellRef, CanvasError> {
        if !self.is_live(c) {
            return Err(CanvasError::DeadCell(c.0));
        }
        if !self.is_leaf(c) {
            return Err(CanvasError::NotALeaf(c.0));
        }
        let depth = self.depth(c);
        if depth >= self.config.max_depth {
            return Err(CanvasError::MaxDepthExceeded(c.0));
        }
        let base = self.allocate_group()?;
        let rgba = self.rgba(c);
        for k in 0..8 {
            let i = (base.0 + k) as usize;
            self.pools.parent[i] = c.0;
            self.pools.first_child[i] = NONE;
            self.pools.depth_flags[i] = (depth + 1) as u8 | FLAG_LIVE;
            self.pools.rgba[i] = rgba;
            self.blocks.mark(base.0 + k);
        }
        self.live_cells += 8;
        self.pools.first_child[c.index()] = base.0;
        self.blocks.mark(c.0);
        self.repair_after_topology_change(c);
        Ok(base)
    }

    /// Merges eight leaf children back into their parent, which takes their
    /// average color.
    pub fn coarsen_cell(&mut self, c: CellRef) -> Result<(), CanvasError> {
        if !self.is_live(c) {
            return Err(CanvasError::DeadCell(c.0));
        }
        let children = self.children(c).ok_or(CanvasError::NoChildren(c.0))?;
        if children.iter().any(|&k| !self.is_leaf(k)) {
            return Err(CanvasError::ChildrenNotLeaves(c.0));
        }
        let mean = Rgba::mean(children.iter().map(|k| &self.pools.rgba[k.index()]));
        self.set_rgba(c, mean);
        self.pools.first_child[c.index()] = NONE;
        self.repair_after_topology_change(c);
        self.free_group(children[0]);
        Ok(())
    }

    /// Recomputes every interior cell's color as the mean of its children,
    /// bottom-up.
    pub fn update_interior_averages(&mut self) {
        let order = self.breadth_first();
        for &c in order.iter().rev() {
            if let Some(ch) = self.children(c) {
                let mean = Rgba::mean(ch.iter().map(|k| &self.pools.rgba[k.index()]));
                if mean != self.rgba(c) {
                    self.set_rgba(c, mean);
                }
            }
        }
    }

    /// Verifies structural invariants: forest shape, depth consistency,
    /// 0-or-8 children, liveness of linked cells, valid colors.
    pub fn check_invariants(&self) -> Result<(), String> {
        let n = self.pools.len() as u32;
        let roots = self.root_count();
        if n < roots || !(n - roots).is_multiple_of(8) {
            return Err(format!("pool length {n} is not roots + 8k"));
        }
        for r in 0..roots {
            let c = CellRef(r);
            if !self.is_live(c) || self.depth(c) != 0 || self.parent(c).is_some() {
                return Err(format!("root {r} is malformed"));
            }
        }
        let mut seen = 0u32;
        for c in self.breadth_first() {
            seen += 1;
            if !self.is_live(c) {
                return Err(format!("cell {} reachable but not live", c.0));
            }
            if !self.rgba(c).is_valid() {
                return Err(format!("cell {} has invalid color", c.0));
            }
            if let Some(f) = self.first_child(c) {
                if f.0 < roots || !(f.0 - roots).is_multiple_of(8) || f.0 + 8 > n {
                    return Err(format!("cell {} has misaligned children {}", c.0, f.0));
                }
                for k in 0..8 {
                    let ch = CellRef(f.0 + k);
                    if self.parent(ch) != Some(c) {
                        return Err(format!("child {} does not point back to {}", ch.0, c.0));
                    }
                    if self.depth(ch) != self.depth(c) + 1 {
                        return Err(format!("child {} has inconsistent depth", ch.0));
                    }
                    if self.depth(ch) > self.config.max_depth {
                        return Err(format!("child {} exceeds max depth", ch.0));
                    }
                }
            }
        }
        if seen != self.live_cells {
            return Err(format!(
                "{} live cells but {} reachable",
                self.live_cells, seen
            ));
        }
        Ok(())
    }

    pub fn blocks(&self) -> &BlockMap {
        &self.blocks
    }

    pub fn map_index_to_block(&self, index: u32) -> u32 {
        self.blocks.block_of(index)
    }

    /// Returns and clears the set of blocks written since the last call.
    pub fn take_dirty_blocks(&mut self) -> BTreeSet<u32> {
        self.blocks.take()
    }
}
