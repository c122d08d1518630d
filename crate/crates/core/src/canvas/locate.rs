//! Point location in double precision.

use glam::DVec3;

use super::{CanvasError, CellRef, DeepCanvas};

impl DeepCanvas {
    /// Finds the leaf containing `p` (canvas coordinates, meters) and the
    /// point in that leaf's local frame (origin at the center, unit size,
    /// coordinates in `[-0.5, 0.5]`). Points on a shared face resolve to the
    /// upper cell.
    pub fn locate_leaf(&self, p: DVec3) -> Result<(CellRef, DVec3), CanvasError> {
        self.locate_leaf_directed(p, DVec3::ZERO)
    }

    /// Like [`DeepCanvas::locate_leaf`], but a point lying exactly on a face
    /// resolves to the cell that `dir` points into.
    pub fn locate_leaf_directed(
        &self,
        p: DVec3,
        dir: DVec3,
    ) -> Result<(CellRef, DVec3), CanvasError> {
        let bounds = self.config.bounds();
        if !p.is_finite() || !bounds.contains(p) {
            return Err(CanvasError::OutOfCanvas(p.to_array()));
        }
        let n = self.config.root_count_per_axis as i64;
        let size = self.config.root_size;
        let h = self.config.extent() * 0.5;
        let mut ix = [0i64; 3];
        let mut q = DVec3::ZERO;
        for a in 0..3 {
            let mut i = (((p[a] + h) / size).floor() as i64).clamp(0, n - 1);
            let center = |i: i64| (i as f64 + 0.5) * size - h;
            let mut local = (p[a] - center(i)) / size;
            if local < -0.5 && i > 0 {
                i -= 1;
                local = (p[a] - center(i)) / size;
            } else if local > 0.5 && i < n - 1 {
                i += 1;
                local = (p[a] - center(i)) / size;
            }
            if local == -0.5 && dir[a] < 0.0 && i > 0 {
                i -= 1;
                local = 0.5;
            } else if local == 0.5 && dir[a] > 0.0 && i < n - 1 {
                i += 1;
                local = -0.5;
            }
            ix[a] = i;
            q[a] = local.clamp(-0.5, 0.5);
        }
        let root = self.root_at(ix).expect("root index in range");
        Ok(self.descend_directed(root, q, dir))
    }

    /// Descends from `cell` to the leaf containing local point `q`,
    /// re-expressing `q` in each child's frame.
    pub fn descend_directed(
        &self,
        mut cell: CellRef,
        mut q: DVec3,
        dir: DVec3,
    ) -> (CellRef, DVec3) {
        while let Some(f) = self.first_child(cell) {
            let mut slot = 0;
            for a in 0..3 {
                let upper = q[a] > 0.0 || (q[a] == 0.0 && dir[a] >= 0.0);
                if upper {
                    slot |= 1 << a;
                    q[a] = 2.0 * q[a] - 0.5;
                } else {
                    q[a] = 2.0 * q[a] + 0.5;
                }
            }
            cell = CellRef(f.0 + slot);
        }
        (cell, q)
    }
}

#[cfg(test)]
mod tests {
    use crate::canvas::{CanvasConfig, CanvasError, DeepCanvas};
    use glam::DVec3;

    #[test]
    fn canvas_center_lands_on_root_corner() {
        let c = DeepCanvas::new(CanvasConfig::default()).unwrap();
        let (cell, local) = c.locate_leaf(DVec3::ZERO).unwrap();
        assert_eq!(c.root_xyz(cell.0), [2, 2, 2]);
        assert_eq!(local, DVec3::splat(-0.5));
        let (cell, local) = c
            .locate_leaf_directed(DVec3::ZERO, DVec3::splat(-1.0))
            .unwrap();
        assert_eq!(c.root_xyz(cell.0), [1, 1, 1]);
        assert_eq!(local, DVec3::splat(0.5));
    }

    #[test]
    fn outside_is_rejected() {
        let c = DeepCanvas::new(CanvasConfig::default()).unwrap();
        assert!(matches!(
            c.locate_leaf(DVec3::new(20_000.1, 0.0, 0.0)),
            Err(CanvasError::OutOfCanvas(_))
        ));
        assert!(c.locate_leaf(DVec3::new(20_000.0, 0.0, 0.0)).is_ok());
        assert!(c.locate_leaf(DVec3::new(f64::NAN, 0.0, 0.0)).is_err());
    }

    #[test]
    fn deep_leaf_center_is_local_origin() {
        let mut c = DeepCanvas::new(CanvasConfig::default()).unwrap();
        let target = DVec3::new(1234.5678, -987.654, 4321.0);
        for _ in 0..24 {
            let (leaf, _) = c.locate_leaf(target).unwrap();
            c.refine_cell(leaf).unwrap();
        }
        let (leaf, _) = c.locate_leaf(target).unwrap();
        assert_eq!(c.depth(leaf), 24);
        let center = c.cell_center(leaf);
        let (again, local) = c.locate_leaf(center).unwrap();
        assert_eq!(again, leaf);
        assert_eq!(local, DVec3::ZERO);
    }
}
