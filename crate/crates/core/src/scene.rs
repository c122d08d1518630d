//! Generated scenes for the precision harness: a view cone far from the
//! canvas origin refined to depth 20 and deeper, graded towards the eye.

use glam::DVec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::canvas::{Aabb, CanvasConfig, CanvasError, CellRef, DeepCanvas};
use crate::color::Rgba;
use crate::raycast::{Camera, RayError};

#[derive(Clone, Debug, PartialEq)]
pub struct SceneParams {
    /// Eye position, canvas coordinates.
    pub focus: DVec3,
    pub view_dir: DVec3,
    pub fov_y: f64,
    pub image_size: u32,
    /// Depth of the cells around the eye.
    pub eye_depth: u32,
    /// Minimum depth everywhere inside the view cone.
    pub floor_depth: u32,
    /// Cells per distance doubling in the graded zone.
    pub grade: f64,
    /// Everything beyond this distance from the eye is opaque.
    pub far: f64,
    pub blobs: usize,
    /// Closest blob distance from the eye, meters.
    pub blob_near: f64,
    pub seed: u64,
}

impl Default for SceneParams {
    fn default() -> Self {
        SceneParams {
            focus: DVec3::new(3217.123, -1841.77, 2605.5),
            view_dir: DVec3::new(0.36, 0.48, -0.8),
            fov_y: 1f64.to_radians(),
            image_size: 256,
            eye_depth: 24,
            floor_depth: 22,
            grade: 16.0,
            far: 4.0,
            blobs: 12,
            blob_near: 0.5,
            seed: 7,
        }
    }
}

impl SceneParams {
    /// The camera the scene is built around.
    pub fn camera(&self) -> Result<Camera, RayError> {
        Camera::look_dir(
            self.focus,
            self.view_dir,
            DVec3::Y,
            self.fov_y,
            self.image_size,
            self.image_size,
        )
    }
}

pub struct PrecisionScene {
    pub canvas: DeepCanvas,
    pub camera: Camera,
}

const SKY: Rgba = Rgba::new(0.55, 0.62, 0.78, 1.0);

pub fn precision_scene(params: &SceneParams) -> Result<PrecisionScene, CanvasError> {
    let mut canvas = DeepCanvas::new(CanvasConfig::default())?;
    let camera = params
        .camera()
        .map_err(|e| CanvasError::InvalidConfig(e.to_string()))?;
    let axis = camera.forward;
    let half_angle = ((params.fov_y * 0.5).tan() * std::f64::consts::SQRT_2).atan() * 1.1;
    let cfg = canvas.config().clone();
    let w_eye = cfg.cell_width(params.eye_depth);
    let reach = params.far + 2.0 * cfg.cell_width(params.floor_depth);
    let focus = params.focus;

    let in_cone = |b: &Aabb| {
        let v = b.center() - focus;
        let rho = b.size().length() * 0.5;
        let dist = v.length();
        if dist <= rho {
            return true;
        }
        if b.distance_to(focus) > reach {
            return false;
        }
        let angle = axis.dot(v / dist).clamp(-1.0, 1.0).acos();
        angle - (rho / dist).min(1.0).asin() <= half_angle
    };
    let wanted = |b: &Aabb| {
        let dist = b.distance_to(focus);
        let drop = (1.0 + dist / (params.grade * w_eye)).log2().floor();
        (params.eye_depth as f64 - drop).max(params.floor_depth as f64) as u32
    };

    let mut stack: Vec<CellRef> = (0..canvas.root_count()).map(CellRef).collect();
    while let Some(c) = stack.pop() {
        let b = canvas.cell_bounds(c);
        if !in_cone(&b) || canvas.depth(c) >= wanted(&b) {
            continue;
        }
        let base = canvas.refine_cell(c)?;
        stack.extend((0..8).map(|k| CellRef(base.0 + k)));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let (u, v) = (camera.right, camera.up);
    let tan = (params.fov_y * 0.5).tan();
    let blobs: Vec<(DVec3, f64, Rgba)> = (0..params.blobs)
        .map(|_| {
            let dir =
                (axis + u * rng.gen_range(-tan..tan) + v * rng.gen_range(-tan..tan)).normalize();
            let dist =
                params.blob_near * (params.far * 0.85 / params.blob_near).powf(rng.gen::<f64>());
            let radius = dist * tan * rng.gen_range(0.2..0.6);
            let color = Rgba::new(
                rng.gen_range(0.2..1.0),
                rng.gen_range(0.2..1.0),
                rng.gen_range(0.2..1.0),
                1.0,
            );
            (focus + dir * dist, radius, color)
        })
        .collect();

    let leaves: Vec<CellRef> = canvas.leaves().collect();
    for leaf in leaves {
        let c = canvas.cell_center(leaf);
        let color = if (c - focus).length() > params.far {
            SKY
        } else if let Some(b) = blobs.iter().find(|b| (c - b.0).length() <= b.1) {
            b.2
        } else {
            continue;
        };
        canvas.set_rgba(leaf, color);
    }
    Ok(PrecisionScene { canvas, camera })
}
