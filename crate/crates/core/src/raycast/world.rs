//! The drift baseline: the same traversal with the ray point kept in
//! single-precision canvas coordinates.

use glam::{DVec3, Vec3};

use super::local::ray_entry;
use super::{AbortReason, Accum, Outcome, RayError, TraceOptions};
use crate::canvas::{CellRef, DeepCanvas, Face};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorldTrace {
    pub d: Vec3,
    /// Start point (eye or canvas entry) in double precision and its leaf.
    pub start: DVec3,
    pub start_cell: CellRef,
    pub accum: Accum,
    pub outcome: Outcome,
    pub end_cell: CellRef,
    /// Final point in canvas coordinates.
    pub end: Vec3,
    pub crossed: u64,
    pub path_length: f64,
}

pub fn trace_world(
    canvas: &DeepCanvas,
    origin: DVec3,
    dir: DVec3,
    opts: &TraceOptions,
) -> Result<WorldTrace, RayError> {
    let entry = ray_entry(canvas, origin, dir)?;
    let d = entry.d;
    let start = origin + entry.offset;
    let mut p = start.as_vec3();
    let mut cell = entry.cell;
    let mut accum = Accum::default();
    let mut crossed = 0u64;
    let mut path_length = 0.0f64;
    let outcome;
    loop {
        if crossed >= opts.step_cap {
            outcome = Outcome::Aborted(AbortReason::StepCap);
            break;
        }
        let center = canvas.cell_center(cell);
        let w = canvas.cell_width(cell);
        let mut best = f32::INFINITY;
        let mut face = None;
        let mut plane = 0.0f32;
        for a in 0..3 {
            if d[a] == 0.0 {
                continue;
            }
            let f = if d[a] > 0.0 {
                (center[a] + 0.5 * w) as f32
            } else {
                (center[a] - 0.5 * w) as f32
            };
            let t = (f - p[a]) / d[a];
            if t < best {
                best = t;
                face = Some(Face::new(a, d[a] > 0.0));
                plane = f;
            }
        }
        let Some(face) = face else {
            outcome = Outcome::Aborted(AbortReason::NegativeStep);
            break;
        };
        let t = best.max(0.0);
        accum.composite(canvas.rgba(cell), t / w as f32);
        crossed += 1;
        path_length += t as f64;
        p = Vec3::new(p.x + t * d.x, p.y + t * d.y, p.z + t * d.z);
        p[face.axis] = plane;
        if accum.done() {
            outcome = Outcome::Opaque;
            break;
        }
        let Some(mut n) = canvas.face_neighbor(cell, face) else {
            outcome = Outcome::Exited;
            break;
        };
        while let Some(f) = canvas.first_child(n) {
            let c = canvas.cell_center(n).as_vec3();
            let mut slot = 0;
            for a in 0..3 {
                // Entering across `face`, the near half is the one facing it.
                let upper = if a == face.axis {
                    !face.positive
                } else {
                    p[a] > c[a] || (p[a] == c[a] && d[a] >= 0.0)
                };
                if upper {
                    slot |= 1 << a;
                }
            }
            n = CellRef(f.0 + slot);
        }
        cell = n;
    }
    Ok(WorldTrace {
        d,
        start,
        start_cell: entry.cell,
        accum,
        outcome,
        end_cell: cell,
        end: p,
        crossed,
        path_length,
    })
}
