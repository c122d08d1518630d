//! Independent oracles shared by the integration tests. Nothing here calls
//! into the traversal or neighbor code under test; they only use topology
//! accessors (parent, children, depth, lattice coordinates).

#![allow(dead_code)]

use std::collections::BTreeSet;

use canvox_core::canvas::CellCoords;
use canvox_core::paint::{
    apply_mode, effective_max_depth, stamp_coverage, target_depth, BrushMode, StampGeom,
};
use canvox_core::{CanvasConfig, CellRef, DeepCanvas, Face, Rgba};
use glam::DVec3;
use rand::Rng;

pub fn small_config(n: u32, root_size: f64, max_depth: u32) -> CanvasConfig {
    CanvasConfig {
        root_count_per_axis: n,
        root_size,
        max_depth,
        ..Default::default()
    }
}

/// Random refine/coarsen sequence until the canvas holds at least
/// `min_cells` cells. Picking random pool indices favours recently created
/// cells, which produces deep, unbalanced trees.
pub fn random_tree(
    cfg: CanvasConfig,
    min_cells: u32,
    coarsen_rate: f64,
    rng: &mut impl Rng,
) -> DeepCanvas {
    let mut c = DeepCanvas::new(cfg).unwrap();
    let max_depth = c.config().max_depth;
    while c.cell_count() < min_cells {
        random_step(&mut c, max_depth, coarsen_rate, rng);
    }
    c
}

/// One random topology change; returns the cell that changed, if any.
pub fn random_step(
    c: &mut DeepCanvas,
    max_depth: u32,
    coarsen_rate: f64,
    rng: &mut impl Rng,
) -> Option<CellRef> {
    let hw = c.high_water();
    let cell = CellRef(rng.gen_range(0..hw));
    if !c.is_live(cell) {
        return None;
    }
    if rng.gen_bool(coarsen_rate) {
        let p = if c.is_leaf(cell) {
            c.parent(cell)?
        } else {
            cell
        };
        let kids = c.children(p)?;
        if kids.iter().all(|&k| c.is_leaf(k)) {
            c.coarsen_cell(p).unwrap();
            return Some(p);
        }
        None
    } else if c.is_leaf(cell) && c.depth(cell) < max_depth {
        c.refine_cell(cell).unwrap();
        Some(cell)
    } else {
        None
    }
}

/// Lattice box of a cell at `depth` resolution: [lo, hi) per axis.
pub fn lattice_box(c: &DeepCanvas, cell: CellRef, depth: u32) -> ([u64; 3], [u64; 3]) {
    let CellCoords { depth: d, xyz } = c.cell_coords(cell);
    let s = depth - d;
    (xyz.map(|v| v << s), xyz.map(|v| (v + 1) << s))
}

/// Neighbor across `face` by point query: step a quarter of the finest
/// width past the face center, locate in double precision, then climb to
/// depth ≤ depth(cell).
pub fn brute_face_neighbor(c: &DeepCanvas, cell: CellRef, face: Face) -> Option<CellRef> {
    let b = c.cell_bounds(cell);
    let fine = c.config().cell_width(c.config().max_depth);
    let mut p = b.center();
    p[face.axis] = if face.positive {
        b.max[face.axis] + 0.25 * fine
    } else {
        b.min[face.axis] - 0.25 * fine
    };
    let (mut leaf, _) = c.locate_leaf(p).ok()?;
    let d = c.depth(cell);
    while c.depth(leaf) > d {
        leaf = c.parent(leaf).unwrap();
    }
    Some(leaf)
}

/// Every leaf sharing a face (positive area) with `cell`, by scanning all
/// leaves on the integer lattice.
pub fn brute_all_face_neighbors(c: &DeepCanvas, cell: CellRef) -> BTreeSet<CellRef> {
    let md = c.config().max_depth;
    let (lo, hi) = lattice_box(c, cell, md);
    let mut out = BTreeSet::new();
    for l in c.leaves() {
        if l == cell {
            continue;
        }
        let (llo, lhi) = lattice_box(c, l, md);
        for a in 0..3 {
            let touching = lhi[a] == lo[a] || llo[a] == hi[a];
            let overlap = (0..3)
                .filter(|&b| b != a)
                .all(|b| llo[b] < hi[b] && lo[b] < lhi[b]);
            if touching && overlap {
                out.insert(l);
            }
        }
    }
    out
}

/// Number of stored-neighbor and face-neighbor mismatches against the
/// point-query oracle, plus sibling-arithmetic violations.
pub fn neighbor_mismatches(c: &DeepCanvas) -> usize {
    let mut bad = 0;
    for cell in c.live_cells() {
        for axis in 0..3 {
            let f = c.stored_face(cell, axis);
            if c.stored_neighbor(cell, axis) != brute_face_neighbor(c, cell, f) {
                bad += 1;
            }
        }
        for face in Face::ALL {
            let got = c.face_neighbor(cell, face);
            if got != brute_face_neighbor(c, cell, face) {
                bad += 1;
            }
            if !c.is_root(cell) {
                let bit = (c.slot(cell) >> face.axis) & 1;
                let step = 1u32 << face.axis;
                let sib = match (bit, face.positive) {
                    (0, true) => Some(cell.0 + step),
                    (1, false) => Some(cell.0 - step),
                    _ => None,
                };
                if let Some(s) = sib {
                    if got != Some(CellRef(s)) {
                        bad += 1;
                    }
                }
            }
        }
    }
    bad
}

/// Refines every leaf until all are at `depth`.
pub fn uniform_grid(cfg: CanvasConfig, depth: u32) -> DeepCanvas {
    let mut c = DeepCanvas::new(cfg).unwrap();
    for _ in 0..depth {
        let leaves: Vec<_> = c.leaves().collect();
        for l in leaves {
            c.refine_cell(l).unwrap();
        }
    }
    c
}

/// Result of an Amanatides-Woo voxel walk over a uniform lattice.
pub struct VoxelWalk {
    pub cells: Vec<[i64; 3]>,
    /// The ray passed within `tol` cell widths of an edge or corner.
    pub degenerate: bool,
}

/// Double-precision voxel walk through an `n`-per-axis lattice of width
/// `w` whose low corner is `min`. `None` if the ray misses.
pub fn voxel_walk(n: i64, w: f64, min: DVec3, o: DVec3, d: DVec3, tol: f64) -> Option<VoxelWalk> {
    let max = min + DVec3::splat(n as f64 * w);
    let mut t0 = 0.0f64;
    let mut t1 = f64::INFINITY;
    let mut entry_axis = 3;
    for a in 0..3 {
        if d[a] == 0.0 {
            if o[a] < min[a] || o[a] > max[a] {
                return None;
            }
            continue;
        }
        let (ta, tb) = ((min[a] - o[a]) / d[a], (max[a] - o[a]) / d[a]);
        if ta.min(tb) > t0 {
            t0 = ta.min(tb);
            entry_axis = a;
        }
        t1 = t1.min(ta.max(tb));
    }
    if t0 >= t1 {
        return None;
    }
    let p = o + d * t0;
    let mut idx = [0i64; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    let mut degenerate = false;
    for a in 0..3 {
        let u = (p[a] - min[a]) / w;
        idx[a] = (u.floor() as i64).clamp(0, n - 1);
        if d[a] > 0.0 {
            t_max[a] = (min[a] + (idx[a] + 1) as f64 * w - o[a]) / d[a];
        } else if d[a] < 0.0 {
            t_max[a] = (min[a] + idx[a] as f64 * w - o[a]) / d[a];
        }
        if d[a] != 0.0 {
            t_delta[a] = w / d[a].abs();
        }
        // Entering next to a grid plane of another axis.
        let frac = u - u.round();
        if a != entry_axis && frac.abs() < tol {
            degenerate = true;
        }
    }
    let mut cells = vec![idx];
    loop {
        let a = (0..3).fold(0, |m, k| if t_max[k] < t_max[m] { k } else { m });
        let t = t_max[a];
        for b in 0..3 {
            if b != a && d[b] != 0.0 {
                let ahead = (t_max[b] - t) * d[b].abs();
                let behind = (t - (t_max[b] - t_delta[b])) * d[b].abs();
                if ahead.min(behind) < tol * w {
                    degenerate = true;
                }
            }
        }
        idx[a] += if d[a] > 0.0 { 1 } else { -1 };
        if idx[a] < 0 || idx[a] >= n {
            break;
        }
        t_max[a] += t_delta[a];
        cells.push(idx);
    }
    Some(VoxelWalk { cells, degenerate })
}

/// Non-deferred painting: for each stamp in order, refine every
/// intersecting leaf shallower than the target until none remain, then
/// paint the leaves. Children inherit their parent's color.
pub fn direct_paint(c: &mut DeepCanvas, stamps: &[(StampGeom, Rgba, BrushMode)]) {
    for (geom, rgba, mode) in stamps {
        let target = target_depth(geom.detail_radius(), c.config());
        loop {
            let todo: Vec<CellRef> = c
                .leaves()
                .filter(|&l| {
                    let b = c.cell_bounds(l);
                    let limit = effective_max_depth(b.center(), c.rooms(), c.config());
                    c.depth(l) < target.min(limit) && geom.intersects(&b)
                })
                .collect();
            if todo.is_empty() {
                break;
            }
            for l in todo {
                c.refine_cell(l).unwrap();
            }
        }
        let leaves: Vec<CellRef> = c.leaves().collect();
        for l in leaves {
            let f = stamp_coverage(geom, &c.cell_bounds(l));
            if f > 0.0 {
                let out = apply_mode(*mode, *rgba, f, c.rgba(l));
                c.set_rgba(l, out);
            }
        }
    }
}

/// Leaves keyed by lattice position with their colors; two canvases with
/// equal maps have the same leaf partition and leaf colors.
pub fn leaf_map(c: &DeepCanvas) -> Vec<(CellCoords, Rgba)> {
    let mut v: Vec<_> = c.leaves().map(|l| (c.cell_coords(l), c.rgba(l))).collect();
    v.sort_by_key(|(cc, _)| (cc.depth, cc.xyz));
    v
}

/// Fraction of `cell_min..cell_max` inside a sphere, by Monte Carlo.
pub fn mc_sphere_fraction(
    center: DVec3,
    r: f64,
    lo: DVec3,
    hi: DVec3,
    n: usize,
    rng: &mut impl Rng,
) -> f64 {
    let mut inside = 0usize;
    for _ in 0..n {
        let p = DVec3::new(
            rng.gen_range(lo.x..hi.x),
            rng.gen_range(lo.y..hi.y),
            rng.gen_range(lo.z..hi.z),
        );
        if (p - center).length_squared() <= r * r {
            inside += 1;
        }
    }
    inside as f64 / n as f64
}

/// Hex SHA-256, used to pin golden images.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Replays a script file from the repository's `scripts/` directory on a
/// default canvas with a default painter.
pub fn replay_repo_script(name: &str) -> (DeepCanvas, canvox_core::io::ReplayStats) {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scripts")
        .join(name);
    let text = std::fs::read_to_string(path).unwrap();
    let events = canvox_core::io::parse_script_str(&text).unwrap();
    let mut c = DeepCanvas::new(CanvasConfig::default()).unwrap();
    let mut p = canvox_core::paint::Painter::new();
    let stats = canvox_core::io::replay(&mut c, &mut p, events).unwrap();
    (c, stats)
}
