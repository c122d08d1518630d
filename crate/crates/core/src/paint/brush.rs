//! Brush description and the per-cell paint modes.

use serde::{Deserialize, Serialize};

use crate::color::{blend_color, Rgba};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StampShape {
    #[default]
    Sphere,
    Cylinder,
    Box,
    Cone,
    Perlin,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BrushMode {
    #[default]
    Paint,
    Erase,
    Recolor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Brush {
    #[serde(default)]
    pub shape: StampShape,
    /// Base radius in meters (before pressure and zoom scaling).
    pub radius: f64,
    pub rgba: Rgba,
    #[serde(default)]
    pub mode: BrushMode,
    #[serde(default)]
    pub pickup_strength: f32,
    #[serde(default)]
    pub noise_seed: u64,
}

impl Default for Brush {
    fn default() -> Self {
        Brush {
            shape: StampShape::Sphere,
            radius: 1.0,
            rgba: Rgba::new(1.0, 1.0, 1.0, 1.0),
            mode: BrushMode::Paint,
            pickup_strength: 0.0,
            noise_seed: 0,
        }
    }
}

impl Brush {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(format!(
                "brush radius must be positive, got {}",
                self.radius
            ));
        }
        if !self.rgba.is_valid() {
            return Err("brush rgba channels must be in [0, 1]".into());
        }
        if self.mode == BrushMode::Paint && self.rgba.a() <= 0.0 {
            return Err("paint mode needs a brush alpha in (0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.pickup_strength) {
            return Err(format!(
                "pickup_strength must be in [0, 1], got {}",
                self.pickup_strength
            ));
        }
        Ok(())
    }
}

/// Applies one brush dab with coverage `f` to a canvas color.
pub fn apply_mode(mode: BrushMode, brush: Rgba, coverage: f32, canvas: Rgba) -> Rgba {
    match mode {
        BrushMode::Paint => blend_color(brush.with_alpha(brush.a() * coverage), canvas),
        BrushMode::Erase => canvas.with_alpha(canvas.a() * (1.0 - brush.a() * coverage)),
        BrushMode::Recolor => {
            let m = brush.a() * coverage;
            let c = canvas.0;
            let b = brush.0;
            Rgba([
                m * b[0] + (1.0 - m) * c[0],
                m * b[1] + (1.0 - m) * c[1],
                m * b[2] + (1.0 - m) * c[2],
                c[3],
            ])
        }
    }
}
