use glam::{DVec3, Vec3};

use super::{AbortReason, Accum, Outcome, RayError, TraceOptions};
use crate::canvas::{CellRef, DeepCanvas, Face};

/// The start of a ray: leaf, point in its frame, and direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Entry {
    pub cell: CellRef,
    /// Start point in the leaf frame, double precision.
    pub p64: DVec3,
    /// The same point rounded to single precision.
    pub p: Vec3,
    pub d: Vec3,
    /// Entry point minus ray origin, meters (zero when starting inside).
    pub offset: DVec3,
}

/// One crossed cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub cell: CellRef,
    pub face: Face,
    pub t: f32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalTrace {
    pub entry: Entry,
    pub accum: Accum,
    pub outcome: Outcome,
    /// Last cell visited and the exit point in its frame.
    pub end_cell: CellRef,
    pub end_p: Vec3,
    pub crossed: u64,
    /// Meters travelled, accumulated in double precision.
    pub path_length: f64,
    /// Sum of the widths of crossed cells, meters.
    pub width_sum: f64,
}

/// Locates the first leaf of a ray. `dir` need not be normalized; it is
/// normalized in double precision and then rounded to single precision,
/// and that rounded direction defines the ray from here on.
pub fn ray_entry(canvas: &DeepCanvas, origin: DVec3, dir: DVec3) -> Result<Entry, RayError> {
    let d = dir.try_normalize().ok_or(RayError::MissesCanvas)?.as_vec3();
    let dd = d.as_dvec3();
    let bounds = canvas.config().bounds();
    let (start, offset) = if bounds.contains(origin) {
        (origin, DVec3::ZERO)
    } else {
        let mut enter = f64::NEG_INFINITY;
        let mut leave = f64::INFINITY;
        let mut axis = 0;
        for a in 0..3 {
            if dd[a] == 0.0 {
                if origin[a] < bounds.min[a] || origin[a] > bounds.max[a] {
                    return Err(RayError::MissesCanvas);
                }
                continue;
            }
            let t1 = (bounds.min[a] - origin[a]) / dd[a];
            let t2 = (bounds.max[a] - origin[a]) / dd[a];
            let (near, far) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            if near > enter {
                enter = near;
                axis = a;
            }
            leave = leave.min(far);
        }
        if enter > leave || leave < 0.0 {
            return Err(RayError::MissesCanvas);
        }
        let mut q = origin + dd * enter;
        q[axis] = if dd[axis] > 0.0 {
            bounds.min[axis]
        } else {
            bounds.max[axis]
        };
        let q = q.clamp(bounds.min, bounds.max);
        (q, q - origin)
    };
    let (cell, p64) = canvas
        .locate_leaf_directed(start, dd)
        .map_err(|_| RayError::MissesCanvas)?;
    let p = p64.as_vec3().clamp(Vec3::splat(-0.5), Vec3::splat(0.5));
    Ok(Entry {
        cell,
        p64,
        p,
        d,
        offset,
    })
}

/// Distance (in cell units) to the exit face. Ties go to the lower axis.
pub fn cell_exit(p: Vec3, d: Vec3) -> Result<(f32, Face), RayError> {
    let mut best = f32::INFINITY;
    let mut face = None;
    for a in 0..3 {
        if d[a] != 0.0 {
            let side = if d[a] > 0.0 { 0.5 } else { -0.5 };
            let t = (side - p[a]) / d[a];
            if t < best {
                best = t;
                face = Some(Face::new(a, d[a] > 0.0));
            }
        }
    }
    match face {
        Some(f) if best >= 0.0 => Ok((best, f)),
        _ => Err(RayError::TraversalAbort(AbortReason::NegativeStep)),
    }
}

/// Point where the ray leaves the cell, snapped onto the exit face.
pub fn exit_point(p: Vec3, d: Vec3, t: f32, face: Face) -> Vec3 {
    let mut q = Vec3::new(
        t.mul_add(d.x, p.x),
        t.mul_add(d.y, p.y),
        t.mul_add(d.z, p.z),
    );
    q = q.clamp(Vec3::splat(-0.5), Vec3::splat(0.5));
    q[face.axis] = if face.positive { 0.5 } else { -0.5 };
    q
}

/// Moves an exit point into the frame of the leaf across `face`.
///
/// The face neighbor is never deeper than `c`; its frame is reached by
/// scaling with `2^-(depth difference)` and shifting by the center of `c`'s
/// ancestor chain, both exactly representable. The point then descends
/// into the neighbor's children (doubling and shifting by a half each
/// level), skipping children narrower than `lod_width` meters when that is
/// positive. Returns `None` at the canvas boundary.
pub fn to_neighbor_local(
    canvas: &DeepCanvas,
    c: CellRef,
    p_exit: Vec3,
    face: Face,
    d: Vec3,
    lod_width: f64,
) -> Option<(CellRef, Vec3)> {
    let n = canvas.face_neighbor(c, face)?;
    let dc = canvas.depth(c);
    let dn = canvas.depth(n);
    let mut q = p_exit;
    if dc > dn {
        let k = dc - dn;
        let mut off = DVec3::ZERO;
        let mut cur = c;
        for _ in 0..k {
            let s = canvas.slot(cur);
            let center = DVec3::new(
                ((s & 1) as f64 - 0.5) * 0.5,
                (((s >> 1) & 1) as f64 - 0.5) * 0.5,
                (((s >> 2) & 1) as f64 - 0.5) * 0.5,
            );
            off = off * 0.5 + center;
            cur = canvas.parent(cur).expect("non-root has a parent");
        }
        let scale = (-(k as i32) as f32).exp2();
        q = q * scale + off.as_vec3();
    }
    q[face.axis] = if face.positive { -0.5 } else { 0.5 };
    q = q.clamp(Vec3::splat(-0.5), Vec3::splat(0.5));
    let mut cell = n;
    while let Some(f) = canvas.first_child(cell) {
        if lod_width > 0.0 && canvas.config().cell_width(canvas.depth(cell) + 1) < lod_width {
            break;
        }
        let mut slot = 0;
        for a in 0..3 {
            if q[a] > 0.0 || (q[a] == 0.0 && d[a] >= 0.0) {
                slot |= 1 << a;
                q[a] = 2.0 * q[a] - 0.5;
            } else {
                q[a] = 2.0 * q[a] + 0.5;
            }
        }
        cell = CellRef(f.0 + slot);
    }
    Some((cell, q))
}

/// Traverses one ray through leaves in cell-local single precision. When
/// `record` is given, every crossed cell is appended to it.
pub fn trace_local(
    canvas: &DeepCanvas,
    origin: DVec3,
    dir: DVec3,
    opts: &TraceOptions,
    mut record: Option<&mut Vec<Step>>,
) -> Result<LocalTrace, RayError> {
    let entry = ray_entry(canvas, origin, dir)?;
    let d = entry.d;
    let mut cell = entry.cell;
    let mut p = entry.p;
    let mut accum = Accum::default();
    let mut crossed = 0u64;
    let mut path_length = entry.offset.length();
    let start_path = path_length;
    let mut width_sum = 0.0;
    let outcome;
    let end_p;
    loop {
        if crossed >= opts.step_cap {
            outcome = Outcome::Aborted(AbortReason::StepCap);
            end_p = p;
            break;
        }
        let (t, face) = match cell_exit(p, d) {
            Ok(x) => x,
            Err(_) => {
                outcome = Outcome::Aborted(AbortReason::NegativeStep);
                end_p = p;
                break;
            }
        };
        let w = canvas.cell_width(cell);
        accum.composite(canvas.rgba(cell), t);
        crossed += 1;
        path_length += t as f64 * w;
        width_sum += w;
        if let Some(r) = record.as_deref_mut() {
            r.push(Step { cell, face, t });
        }
        let pe = exit_point(p, d, t, face);
        if accum.done() {
            outcome = Outcome::Opaque;
            end_p = pe;
            break;
        }
        let lod = if opts.lod_angle > 0.0 {
            (path_length - start_path) * opts.lod_angle
        } else {
            0.0
        };
        match to_neighbor_local(canvas, cell, pe, face, d, lod) {
            Some((n, q)) => {
                cell = n;
                p = q;
            }
            None => {
                outcome = Outcome::Exited;
                end_p = pe;
                break;
            }
        }
    }
    Ok(LocalTrace {
        entry,
        accum,
        outcome,
        end_cell: cell,
        end_p,
        crossed,
        path_length: path_length - start_path,
        width_sum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canvas::CanvasConfig;

    #[test]
    fn exit_examples() {
        assert_eq!(
            cell_exit(Vec3::ZERO, Vec3::Y).unwrap(),
            (0.5, Face::new(1, true))
        );
        assert_eq!(
            cell_exit(Vec3::new(-0.5, 0.0, 0.0), Vec3::X).unwrap(),
            (1.0, Face::new(0, true))
        );
        // Corner: x wins the tie.
        let d = Vec3::new(1.0, 1.0, 0.0).normalize();
        assert_eq!(cell_exit(Vec3::ZERO, d).unwrap().1, Face::new(0, true));
        assert!(cell_exit(Vec3::new(0.7, 0.0, 0.0), Vec3::X).is_err());
        assert!(cell_exit(Vec3::ZERO, Vec3::ZERO).is_err());
    }

    #[test]
    fn equal_depth_transition_flips_one_coordinate() {
        let c = DeepCanvas::new(CanvasConfig::default()).unwrap();
        let p = Vec3::new(0.5, 0.123_456_7, -0.377);
        let (n, q) =
            to_neighbor_local(&c, CellRef(5), p, Face::new(0, true), Vec3::X, 0.0).unwrap();
        assert_eq!(n, CellRef(6));
        assert_eq!(q, Vec3::new(-0.5, p.y, p.z));
    }

    #[test]
    fn descends_one_level_into_refined_neighbor() {
        let mut c = DeepCanvas::new(CanvasConfig::default()).unwrap();
        let base = c.refine_cell(CellRef(6)).unwrap();
        let p = Vec3::new(0.5, 0.25, -0.25);
        let (n, q) =
            to_neighbor_local(&c, CellRef(5), p, Face::new(0, true), Vec3::X, 0.0).unwrap();
        // Lower x, upper y, lower z.
        assert_eq!(n, CellRef(base.0 + 2));
        assert_eq!(c.depth(n), 1);
        assert_eq!(q, Vec3::new(-0.5, 0.0, 0.0));
    }

    #[test]
    fn entry_from_outside_snaps_to_face() {
        let c = DeepCanvas::new(CanvasConfig::default()).unwrap();
        let e = ray_entry(&c, DVec3::new(-50_000.0, 1.0, 2.0), DVec3::X).unwrap();
        assert_eq!(e.p.x, -0.5);
        assert_eq!(e.p64.x, -0.5);
        assert_eq!(c.root_xyz(e.cell.0), [0, 2, 2]);
        assert!(ray_entry(&c, DVec3::new(-50_000.0, 1.0, 2.0), -DVec3::X).is_err());
    }

    #[test]
    fn entry_at_deep_leaf_center_is_origin() {
        let mut c = DeepCanvas::new(CanvasConfig::default()).unwrap();
        let mut cell = CellRef(21);
        for _ in 0..24 {
            cell = c.refine_cell(cell).unwrap();
        }
        let center = c.cell_center(cell);
        let e = ray_entry(&c, center, DVec3::new(0.3, 0.2, 0.1)).unwrap();
        assert_eq!(e.cell, cell);
        assert_eq!(e.p, Vec3::ZERO);
    }

    #[test]
    fn empty_canvas_ray_exits() {
        let c = DeepCanvas::new(CanvasConfig::default()).unwrap();
        let t = trace_local(
            &c,
            DVec3::new(0.0, 0.0, -30_000.0),
            DVec3::Z,
            &TraceOptions::default(),
            None,
        )
        .unwrap();
        assert_eq!(t.outcome, Outcome::Exited);
        assert_eq!(t.crossed, 4);
        assert!((t.path_length - 40_000.0).abs() < 1e-6);
    }
}
