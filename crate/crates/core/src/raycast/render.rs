use rayon::prelude::*;

use super::{trace_local, trace_world, Camera, Outcome, TraceOptions};
use crate::canvas::DeepCanvas;

/// Linear RGB image, row-major from the top-left.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<[f32; 3]>,
    /// Rays that hit the step cap or a corrupt state and fell back to the
    /// background.
    pub aborted: usize,
}

impl Image {
    pub fn pixel(&self, x: u32, y: u32) -> [f32; 3] {
        self.pixels[(y * self.width + x) as usize]
    }

    /// 8-bit RGB bytes.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .flat_map(|p| p.map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u8))
            .collect()
    }
}

/// Color of one pixel and how its ray ended (`None` when it missed).
pub fn cast_ray(
    canvas: &DeepCanvas,
    camera: &Camera,
    px: u32,
    py: u32,
    opts: &TraceOptions,
) -> ([f32; 3], Option<Outcome>) {
    let bg = canvas.config().background_rgba;
    match trace_local(
        canvas,
        camera.eye,
        camera.pixel_direction(px, py),
        opts,
        None,
    ) {
        Err(_) => (bg.rgb(), None),
        Ok(t) => match t.outcome {
            Outcome::Aborted(_) => (bg.rgb(), Some(t.outcome)),
            o => (t.accum.resolve(bg), Some(o)),
        },
    }
}

/// [`cast_ray`] with the world-coordinate traversal.
pub fn cast_ray_world(
    canvas: &DeepCanvas,
    camera: &Camera,
    px: u32,
    py: u32,
    opts: &TraceOptions,
) -> ([f32; 3], Option<Outcome>) {
    let bg = canvas.config().background_rgba;
    match trace_world(canvas, camera.eye, camera.pixel_direction(px, py), opts) {
        Err(_) => (bg.rgb(), None),
        Ok(t) => match t.outcome {
            Outcome::Aborted(_) => (bg.rgb(), Some(t.outcome)),
            o => (t.accum.resolve(bg), Some(o)),
        },
    }
}

/// Casts one ray per pixel, rows in parallel.
pub fn render_image(canvas: &DeepCanvas, camera: &Camera, opts: &TraceOptions) -> Image {
    let rows: Vec<(Vec<[f32; 3]>, usize)> = (0..camera.height)
        .into_par_iter()
        .map(|y| {
            let mut aborted = 0;
            let row = (0..camera.width)
                .map(|x| {
                    let (rgb, o) = cast_ray(canvas, camera, x, y, opts);
                    if matches!(o, Some(Outcome::Aborted(_))) {
                        aborted += 1;
                    }
                    rgb
                })
                .collect();
            (row, aborted)
        })
        .collect();
    let mut pixels = Vec::with_capacity((camera.width * camera.height) as usize);
    let mut aborted = 0;
    for (row, a) in rows {
        pixels.extend(row);
        aborted += a;
    }
    Image {
        width: camera.width,
        height: camera.height,
        pixels,
        aborted,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canvas::{CanvasConfig, CellRef};
    use crate::color::Rgba;
    use glam::DVec3;

    #[test]
    fn empty_canvas_renders_background() {
        let c = DeepCanvas::new(CanvasConfig::default()).unwrap();
        let cam = Camera::look_at(
            DVec3::new(1.0, 2.0, -30_000.0),
            DVec3::ZERO,
            DVec3::Y,
            1.0,
            8,
            6,
        )
        .unwrap();
        let img = render_image(&c, &cam, &TraceOptions::default());
        let bg = c.config().background_rgba.rgb();
        assert!(img.pixels.iter().all(|p| *p == bg));
    }

    #[test]
    fn single_opaque_root_shows_its_color() {
        let cfg = CanvasConfig {
            root_count_per_axis: 1,
            ..Default::default()
        };
        let mut c = DeepCanvas::new(cfg).unwrap();
        c.set_rgba(CellRef(0), Rgba::new(0.9, 0.2, 0.1, 1.0));
        let cam = Camera::look_at(
            DVec3::new(0.0, 0.0, -50_000.0),
            DVec3::ZERO,
            DVec3::Y,
            0.1,
            1,
            1,
        )
        .unwrap();
        let img = render_image(&c, &cam, &TraceOptions::default());
        assert_eq!(img.pixel(0, 0), [0.9, 0.2, 0.1]);
        let (one, _) = cast_ray(&c, &cam, 0, 0, &TraceOptions::default());
        assert_eq!(img.pixel(0, 0), one);
    }
}
