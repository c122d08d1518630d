//! Stamp geometry: signed distance functions, bounds and per-cell coverage.

use glam::{DVec2, DVec3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::brush::StampShape;
use crate::canvas::Aabb;

/// The swept hull of two spheres.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TaperedCapsule {
    pub p0: DVec3,
    pub p1: DVec3,
    pub r0: f64,
    pub r1: f64,
}

impl TaperedCapsule {
    pub fn sdf(&self, p: DVec3) -> f64 {
        round_cone_sdf(p, self.p0, self.p1, self.r0, self.r1)
    }
}

/// One deposited footprint.
#[derive(Clone, Debug, PartialEq)]
pub enum StampGeom {
    Shape {
        shape: StampShape,
        center: DVec3,
        radius: f64,
        noise: Option<PerlinNoise>,
    },
    Capsule(TaperedCapsule),
}

impl StampGeom {
    pub fn shape(shape: StampShape, center: DVec3, radius: f64, seed: u64) -> Self {
        let noise = (shape == StampShape::Perlin).then(|| PerlinNoise::new(seed));
        StampGeom::Shape {
            shape,
            center,
            radius,
            noise,
        }
    }

    pub fn sphere(center: DVec3, radius: f64) -> Self {
        StampGeom::shape(StampShape::Sphere, center, radius, 0)
    }

    /// Radius used to pick the refinement depth.
    pub fn detail_radius(&self) -> f64 {
        match self {
            StampGeom::Shape { radius, .. } => *radius,
            StampGeom::Capsule(c) => c.r0.min(c.r1),
        }
    }

    /// Signed distance (exact for every shape; perlin stamps use their
    /// bounding sphere).
    pub fn sdf(&self, p: DVec3) -> f64 {
        match self {
            StampGeom::Capsule(c) => c.sdf(p),
            StampGeom::Shape {
                shape,
                center,
                radius,
                ..
            } => {
                let q = p - *center;
                let r = *radius;
                match shape {
                    StampShape::Sphere | StampShape::Perlin => q.length() - r,
                    StampShape::Box => {
                        let d = q.abs() - DVec3::splat(r);
                        d.max(DVec3::ZERO).length() + d.max_element().min(0.0)
                    }
                    StampShape::Cylinder => {
                        let d = DVec2::new(DVec2::new(q.x, q.z).length() - r, q.y.abs() - r);
                        d.max_element().min(0.0) + d.max(DVec2::ZERO).length()
                    }
                    StampShape::Cone => capped_cone_sdf(q, r, r, 0.0),
                }
            }
        }
    }

    /// Extra inside/outside mask on top of the distance field.
    fn mask(&self, p: DVec3) -> bool {
        match self {
            StampGeom::Shape {
                noise: Some(noise),
                center,
                radius,
                ..
            } => noise.fbm((p - *center) * (2.0 / radius)) > 0.0,
            _ => true,
        }
    }

    fn has_mask(&self) -> bool {
        matches!(self, StampGeom::Shape { noise: Some(_), .. })
    }

    pub fn bounds(&self) -> Aabb {
        match self {
            StampGeom::Shape { center, radius, .. } => {
                // Cone, cylinder and box all fit in the axis-aligned cube of half-size r.
                Aabb {
                    min: *center - DVec3::splat(*radius),
                    max: *center + DVec3::splat(*radius),
                }
            }
            StampGeom::Capsule(c) => {
                let a = Aabb {
                    min: c.p0 - DVec3::splat(c.r0),
                    max: c.p0 + DVec3::splat(c.r0),
                };
                let b = Aabb {
                    min: c.p1 - DVec3::splat(c.r1),
                    max: c.p1 + DVec3::splat(c.r1),
                };
                Aabb {
                    min: a.min.min(b.min),
                    max: a.max.max(b.max),
                }
            }
        }
    }

    /// Conservative intersection test against a cell box.
    pub fn intersects(&self, cell: &Aabb) -> bool {
        if !self.bounds().intersects(cell) {
            return false;
        }
        let half_diag = cell.size().length() * 0.5;
        if self.sdf(cell.center()) >= half_diag {
            return false;
        }
        match self {
            // Coverage samples sit a quarter cell in from the faces, and the
            // ramp reaches a quarter cell outside the surface.
            StampGeom::Shape {
                shape: StampShape::Sphere | StampShape::Perlin,
                center,
                radius,
                ..
            } => cell.distance_to(*center) < radius + 0.25 * cell.size().max_element(),
            _ => true,
        }
    }
}

/// Fraction of `cell` covered by the stamp, in `[0, 1]`.
///
/// Cells entirely outside or inside are exact. Boundary cells average eight
/// sub-cells, each covered by a linear ramp of its center distance across
/// the sub-cell width (exact for a plane cutting a sub-cell along an axis).
pub fn stamp_coverage(stamp: &StampGeom, cell: &Aabb) -> f32 {
    if !stamp.bounds().intersects(cell) {
        return 0.0;
    }
    let center = cell.center();
    let size = cell.size();
    let half_diag = size.length() * 0.5;
    let d = stamp.sdf(center);
    if d >= half_diag {
        return 0.0;
    }
    if d <= -half_diag && !stamp.has_mask() {
        return 1.0;
    }
    let sub = size * 0.5;
    let width = sub.max_element();
    let mut acc = 0.0;
    for k in 0..8 {
        let offset = DVec3::new(
            if k & 1 == 0 { -0.25 } else { 0.25 },
            if k & 2 == 0 { -0.25 } else { 0.25 },
            if k & 4 == 0 { -0.25 } else { 0.25 },
        ) * size;
        let p = center + offset;
        if !stamp.mask(p) {
            continue;
        }
        acc += (0.5 - stamp.sdf(p) / width).clamp(0.0, 1.0);
    }
    (acc / 8.0) as f32
}

fn dot2(v: DVec2) -> f64 {
    v.dot(v)
}

/// Cone of half-height `h` with bottom radius `r1` (at -h) and top radius `r2`.
fn capped_cone_sdf(p: DVec3, h: f64, r1: f64, r2: f64) -> f64 {
    let q = DVec2::new(DVec2::new(p.x, p.z).length(), p.y);
    let k1 = DVec2::new(r2, h);
    let k2 = DVec2::new(r2 - r1, 2.0 * h);
    let ca = DVec2::new(
        q.x - q.x.min(if q.y < 0.0 { r1 } else { r2 }),
        q.y.abs() - h,
    );
    let cb = q - k1 + k2 * ((k1 - q).dot(k2) / dot2(k2)).clamp(0.0, 1.0);
    let s = if cb.x < 0.0 && ca.y < 0.0 { -1.0 } else { 1.0 };
    s * dot2(ca).min(dot2(cb)).sqrt()
}

/// Convex hull of spheres (a, r1) and (b, r2).
fn round_cone_sdf(p: DVec3, a: DVec3, b: DVec3, r1: f64, r2: f64) -> f64 {
    let ba = b - a;
    let l2 = ba.dot(ba);
    let rr = r1 - r2;
    let a2 = l2 - rr * rr;
    if a2 <= 0.0 {
        // One sphere contains the other.
        return ((p - a).length() - r1).min((p - b).length() - r2);
    }
    let il2 = 1.0 / l2;
    let pa = p - a;
    let y = pa.dot(ba);
    let z = y - l2;
    let x2 = (pa * l2 - ba * y).length_squared();
    let y2 = y * y * l2;
    let z2 = z * z * l2;
    let k = rr.signum() * rr * rr * x2;
    if z.signum() * a2 * z2 > k {
        return (x2 + z2).sqrt() * il2 - r2;
    }
    if y.signum() * a2 * y2 < k {
        return (x2 + y2).sqrt() * il2 - r1;
    }
    ((x2 * a2 * il2).sqrt() + y * rr) * il2 - r1
}

/// Classic gradient noise with a seeded permutation.
#[derive(Clone, Debug, PartialEq)]
pub struct PerlinNoise {
    perm: Vec<u8>,
}

impl PerlinNoise {
    pub fn new(seed: u64) -> Self {
        let mut p: Vec<u8> = (0..=255).collect();
        p.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let perm = p.iter().chain(p.iter()).copied().collect();
        PerlinNoise { perm }
    }

    /// Three octaves, amplitudes halving per octave.
    pub fn fbm(&self, p: DVec3) -> f64 {
        (0..3)
            .map(|o| self.noise(p * (1u32 << o) as f64) / (1u32 << o) as f64)
            .sum()
    }

    pub fn noise(&self, p: DVec3) -> f64 {
        let fl = p.floor();
        let xi = (fl.x as i64 & 255) as usize;
        let yi = (fl.y as i64 & 255) as usize;
        let zi = (fl.z as i64 & 255) as usize;
        let f = p - fl;
        let fade = |t: f64| t * t * t * (t * (t * 6.0 - 15.0) + 10.0);
        let (u, v, w) = (fade(f.x), fade(f.y), fade(f.z));
        let pm = &self.perm;
        let a = pm[xi] as usize + yi;
        let aa = pm[a] as usize + zi;
        let ab = pm[a + 1] as usize + zi;
        let b = pm[xi + 1] as usize + yi;
        let ba = pm[b] as usize + zi;
        let bb = pm[b + 1] as usize + zi;
        let lerp = |t: f64, a: f64, b: f64| a + t * (b - a);
        let (x, y, z) = (f.x, f.y, f.z);
        lerp(
            w,
            lerp(
                v,
                lerp(u, grad(pm[aa], x, y, z), grad(pm[ba], x - 1.0, y, z)),
                lerp(
                    u,
                    grad(pm[ab], x, y - 1.0, z),
                    grad(pm[bb], x - 1.0, y - 1.0, z),
                ),
            ),
            lerp(
                v,
                lerp(
                    u,
                    grad(pm[aa + 1], x, y, z - 1.0),
                    grad(pm[ba + 1], x - 1.0, y, z - 1.0),
                ),
                lerp(
                    u,
                    grad(pm[ab + 1], x, y - 1.0, z - 1.0),
                    grad(pm[bb + 1], x - 1.0, y - 1.0, z - 1.0),
                ),
            ),
        )
    }
}

fn grad(hash: u8, x: f64, y: f64, z: f64) -> f64 {
    let h = hash & 15;
    let u = if h < 8 { x } else { y };
    let v = if h < 4 {
        y
    } else if h == 12 || h == 14 {
        x
    } else {
        z
    };
    (if h & 1 == 0 { u } else { -u }) + (if h & 2 == 0 { v } else { -v })
}
