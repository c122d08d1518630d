mod common;

use std::collections::BTreeSet;

use canvox_core::{CanvasConfig, CanvasError, CellRef, DeepCanvas, Rgba};
use common::*;
use glam::DVec3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn first_allocation_follows_roots_and_free_reuses() {
    let mut c = DeepCanvas::new(CanvasConfig::default()).unwrap();
    let g = c.allocate_group().unwrap();
    assert_eq!(g, CellRef(64));
    let base = c.refine_cell(CellRef(5)).unwrap();
    c.coarsen_cell(CellRef(5)).unwrap();
    assert_eq!(c.refine_cell(CellRef(5)).unwrap(), base);
}

#[test]
fn shadow_set_allocation() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut c = DeepCanvas::new(small_config(2, 8.0, 10)).unwrap();
    let mut live: BTreeSet<u32> = BTreeSet::new();
    let mut refined: Vec<CellRef> = Vec::new();
    for _ in 0..1000 {
        if refined.is_empty() || rng.gen_bool(0.6) {
            let leaves: Vec<_> = c.leaves().filter(|&l| c.depth(l) < 10).collect();
            let l = leaves[rng.gen_range(0..leaves.len())];
            let base = c.refine_cell(l).unwrap();
            assert!(live.insert(base.0), "group {} handed out twice", base.0);
            refined.push(l);
        } else {
            // Only cells whose children are leaves can be coarsened.
            let i = rng.gen_range(0..refined.len());
            let p = refined[i];
            if c.children(p).unwrap().iter().all(|&k| c.is_leaf(k)) {
                let base = c.first_child(p).unwrap();
                c.coarsen_cell(p).unwrap();
                live.remove(&base.0);
                refined.swap_remove(i);
            }
        }
        for &b in &live {
            assert!(!c.is_free_group(CellRef(b)));
        }
    }
    c.check_invariants().unwrap();
}

#[test]
fn uniform_depth_three_cell_count() {
    let c = uniform_grid(CanvasConfig::default(), 3);
    assert_eq!(c.cell_count(), 64 + 64 * (8 + 64 + 512));
}

#[test]
fn refine_coarsen_restores_pools() {
    let mut c = DeepCanvas::new(small_config(2, 8.0, 8)).unwrap();
    c.set_rgba(CellRef(3), Rgba::new(0.1, 0.2, 0.3, 0.4));
    let before = c.pools().clone();
    c.refine_cell(CellRef(3)).unwrap();
    for k in c.children(CellRef(3)).unwrap() {
        assert_eq!(c.rgba(k), Rgba::new(0.1, 0.2, 0.3, 0.4));
        assert_eq!(c.depth(k), 1);
    }
    c.coarsen_cell(CellRef(3)).unwrap();
    let after = c.pools();
    for i in 0..8 {
        assert_eq!(after.parent[i], before.parent[i]);
        assert_eq!(after.first_child[i], before.first_child[i]);
        assert_eq!(after.rgba[i], before.rgba[i]);
        assert_eq!(after.neighbor3[i], before.neighbor3[i]);
    }
}

#[test]
fn coarsen_requires_leaf_children_and_averages() {
    let mut c = DeepCanvas::new(small_config(1, 8.0, 8)).unwrap();
    let base = c.refine_cell(CellRef(0)).unwrap();
    c.refine_cell(base).unwrap();
    assert!(matches!(
        c.coarsen_cell(CellRef(0)),
        Err(CanvasError::ChildrenNotLeaves(_))
    ));
    c.coarsen_cell(base).unwrap();
    for k in 0..8 {
        let a = if k == 0 { 1.0 } else { 0.0 };
        c.set_rgba(CellRef(base.0 + k), Rgba::new(0.5, 0.5, 0.5, a));
    }
    c.coarsen_cell(CellRef(0)).unwrap();
    assert_eq!(c.rgba(CellRef(0)).a(), 0.125);
}

#[test]
fn max_depth_refuses() {
    let mut c = DeepCanvas::new(small_config(1, 8.0, 1)).unwrap();
    let b = c.refine_cell(CellRef(0)).unwrap();
    assert!(matches!(
        c.refine_cell(b),
        Err(CanvasError::MaxDepthExceeded { .. })
    ));
}

#[test]
fn random_trees_match_brute_force_neighbors() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..6 {
        let c = random_tree(small_config(2, 16.0, 14), 3000, 0.25, &mut rng);
        c.check_invariants().unwrap();
        assert_eq!(neighbor_mismatches(&c), 0, "tree {i}");
    }
}

#[test]
fn neighbors_stay_correct_through_every_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut c = DeepCanvas::new(small_config(2, 16.0, 10)).unwrap();
    for step in 0..200 {
        random_step(&mut c, 10, 0.3, &mut rng);
        assert_eq!(neighbor_mismatches(&c), 0, "step {step}");
    }
}

#[test]
fn all_face_neighbors_match_lattice_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..3 {
        let c = random_tree(small_config(2, 16.0, 8), 600, 0.2, &mut rng);
        for cell in c.leaves() {
            let got: BTreeSet<_> = c.all_face_neighbors(cell).into_iter().collect();
            assert_eq!(got, brute_all_face_neighbors(&c, cell), "cell {cell:?}");
        }
    }
}

#[test]
fn locate_center_point() {
    let c = DeepCanvas::new(CanvasConfig::default()).unwrap();
    let (cell, q) = c.locate_leaf(DVec3::ZERO).unwrap();
    assert!(c.is_root(cell));
    assert!(q.to_array().iter().all(|v| v.abs() == 0.5));
    assert!(c.locate_leaf(DVec3::splat(30_000.0)).is_err());
}

#[test]
fn locate_deep_leaf_center() {
    let mut c = DeepCanvas::new(CanvasConfig::default()).unwrap();
    let mut cell = CellRef(21);
    for k in 0..24 {
        let base = c.refine_cell(cell).unwrap();
        cell = CellRef(base.0 + (k * 5 % 8));
    }
    let (found, q) = c.locate_leaf(c.cell_center(cell)).unwrap();
    assert_eq!(found, cell);
    assert_eq!(q, DVec3::ZERO);
}

#[test]
fn locate_random_points_against_descent() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let c = random_tree(small_config(4, 10_000.0, 24), 20_000, 0.1, &mut rng);
    let h = c.config().extent() * 0.5;
    for _ in 0..100_000 {
        let p = DVec3::new(
            rng.gen_range(-h..h),
            rng.gen_range(-h..h),
            rng.gen_range(-h..h),
        );
        let (leaf, q) = c.locate_leaf(p).unwrap();
        assert!(c.is_leaf(leaf));
        let b = c.cell_bounds(leaf);
        assert!(b.contains(p), "{p:?} not in {b:?}");
        assert!(q.to_array().iter().all(|v| v.abs() <= 0.5));
        let back = b.center() + q * c.cell_width(leaf);
        assert!((back - p).length() <= 1e-9 * c.cell_width(leaf).max(1.0));
    }
}

#[test]
fn dirty_blocks_bounded_by_touched_cells() {
    use canvox_core::paint::{BrushMode, Painter, Stamp, StampGeom};
    // Grow the tree the usual way: a stroke, then its adjustment frames.
    let mut c = DeepCanvas::new(CanvasConfig::default()).unwrap();
    let mut p = Painter::new();
    let at = DVec3::new(311.5, -20.25, 47.0);
    let grow = Stamp::new(
        StampGeom::sphere(at, 0.8),
        Rgba::new(0.0, 0.0, 1.0, 0.5),
        BrushMode::Paint,
        &c,
    );
    p.apply_stamp(&mut c, grow);
    p.drain(&mut c);
    c.take_dirty_blocks();
    let geom = StampGeom::sphere(at + DVec3::splat(0.2), 0.3);
    let stamp = Stamp::new(geom, Rgba::new(1.0, 0.0, 0.0, 0.5), BrushMode::Paint, &c);
    let touched = p.apply_stamp(&mut c, stamp);
    assert!(touched > 100, "{touched}");
    let dirty = c.take_dirty_blocks();
    let bs = c.blocks().block_size() as usize;
    assert!(
        dirty.len() <= touched.div_ceil(bs) + 2,
        "{} blocks for {touched} cells",
        dirty.len()
    );
    assert!(c.take_dirty_blocks().is_empty());
    assert_eq!(c.map_index_to_block(0), 0);
    assert_eq!(c.map_index_to_block(4096), 1);
}

#[test]
fn every_write_lands_in_a_dirty_block() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut c = random_tree(small_config(2, 8.0, 10), 2000, 0.2, &mut rng);
    c.take_dirty_blocks();
    let before = c.pools().clone();
    for _ in 0..50 {
        random_step(&mut c, 10, 0.3, &mut rng);
        let i = CellRef(rng.gen_range(0..c.high_water()));
        if c.is_live(i) {
            c.set_rgba(i, Rgba::new(rng.gen(), rng.gen(), rng.gen(), rng.gen()));
        }
    }
    let dirty = c.take_dirty_blocks();
    let after = c.pools();
    let n = before.parent.len().max(after.parent.len());
    for i in 0..n {
        let changed = before.parent.get(i) != after.parent.get(i)
            || before.first_child.get(i) != after.first_child.get(i)
            || before.depth_flags.get(i) != after.depth_flags.get(i)
            || before.rgba.get(i) != after.rgba.get(i)
            || before.neighbor3.get(i) != after.neighbor3.get(i);
        if changed {
            assert!(
                dirty.contains(&c.map_index_to_block(i as u32)),
                "index {i} changed but block clean"
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn structure_and_colors_survive_random_ops(seed in any::<u64>(), ops in 1usize..300) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = DeepCanvas::new(small_config(2, 8.0, 9)).unwrap();
        for _ in 0..ops {
            let cell = CellRef(rng.gen_range(0..c.high_water()));
            if !c.is_live(cell) { continue; }
            if c.is_leaf(cell) && c.depth(cell) < 9 && rng.gen_bool(0.7) {
                let col = Rgba::new(rng.gen(), rng.gen(), rng.gen(), rng.gen());
                c.set_rgba(cell, col);
                c.refine_cell(cell).unwrap();
                for k in c.children(cell).unwrap() {
                    prop_assert_eq!(c.rgba(k), col);
                }
            } else if let Some(p) = if c.is_leaf(cell) { c.parent(cell) } else { Some(cell) } {
                let kids = c.children(p).unwrap();
                if kids.iter().all(|&k| c.is_leaf(k)) {
                    let cols: Vec<Rgba> = kids.iter().map(|&k| c.rgba(k)).collect();
                    c.coarsen_cell(p).unwrap();
                    prop_assert_eq!(c.rgba(p), Rgba::mean(&cols));
                    prop_assert!(c.is_free_group(kids[0]));
                }
            }
        }
        prop_assert!(c.check_invariants().is_ok());
        for cell in c.live_cells() {
            if let Some(f) = c.first_child(cell) {
                prop_assert!(!c.is_free_group(f));
            }
        }
    }
}
