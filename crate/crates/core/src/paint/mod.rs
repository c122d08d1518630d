//! Volumetric brush strokes and deferred tree adaptation.

pub mod adjust;
pub mod brush;
pub mod painter;
pub mod room;
pub mod stamp;
pub mod stroke;

pub use adjust::{AdjustStats, AdjustmentQueue};
pub use brush::{apply_mode, Brush, BrushMode, StampShape};
pub use painter::{pickup_color, Painter, Stamp, StampReport};
pub use room::{effective_max_depth, Room};
pub use stamp::{stamp_coverage, StampGeom, TaperedCapsule};
pub use stroke::{effective_radius, resample_stroke, StrokeResampler, StrokeSample};

use crate::canvas::CanvasConfig;

/// Voxels across a brush radius at the target depth.
pub const VOXELS_PER_RADIUS: f64 = 10.0;

/// Shallowest depth whose cells fit at least ten times into `radius`,
/// clamped to `[0, max_depth]`.
pub fn target_depth(radius: f64, config: &CanvasConfig) -> u32 {
    let need = VOXELS_PER_RADIUS * config.root_size * (1.0 - 1e-12);
    let mut d = 0;
    let mut reach = radius;
    while d < config.max_depth && reach < need {
        reach *= 2.0;
        d += 1;
    }
    d
}
