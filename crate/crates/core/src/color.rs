//! Straight (non-premultiplied) RGBA colors and the additive brush blend.

use serde::{Deserialize, Serialize};

/// A straight-alpha color, each channel nominally in `[0, 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Rgba(pub [f32; 4]);

impl Rgba {
    pub const TRANSPARENT: Rgba = Rgba([0.0, 0.0, 0.0, 0.0]);
    pub const BLACK: Rgba = Rgba([0.0, 0.0, 0.0, 1.0]);
    pub const WHITE: Rgba = Rgba([1.0, 1.0, 1.0, 1.0]);

    pub const fn new(r: f32, g: f32, b: f32, a: f32) -> Self {
        Rgba([r, g, b, a])
    }

    #[inline]
    pub fn r(&self) -> f32 {
        self.0[0]
    }
    #[inline]
    pub fn g(&self) -> f32 {
        self.0[1]
    }
    #[inline]
    pub fn b(&self) -> f32 {
        self.0[2]
    }
    #[inline]
    pub fn a(&self) -> f32 {
        self.0[3]
    }

    pub fn rgb(&self) -> [f32; 3] {
        [self.0[0], self.0[1], self.0[2]]
    }

    pub fn with_alpha(self, a: f32) -> Self {
        Rgba([self.0[0], self.0[1], self.0[2], a])
    }

    pub fn is_valid(&self) -> bool {
        self.0
            .iter()
            .all(|c| c.is_finite() && (0.0..=1.0).contains(c))
    }

    /// Straight arithmetic mean of a set of colors.
    pub fn mean<'a>(colors: impl IntoIterator<Item = &'a Rgba>) -> Rgba {
        let mut acc = [0.0f64; 4];
        let mut n = 0usize;
        for c in colors {
            for (a, v) in acc.iter_mut().zip(c.0) {
                *a += v as f64;
            }
            n += 1;
        }
        if n == 0 {
            return Rgba::TRANSPARENT;
        }
        Rgba(acc.map(|a| (a / n as f64) as f32))
    }

    /// Largest per-channel absolute difference.
    pub fn max_channel_diff(&self, other: &Rgba) -> f32 {
        self.0
            .iter()
            .zip(other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }
}

/// Mixes a brush color into a canvas color.
///
/// The brush weight is `m = B_a / (B_a + C_a)`, rgb is `m*B + (1-m)*C`, and
/// opacities add (clamped to 1). If both alphas are zero the canvas color is
/// returned unchanged.
pub fn blend_color(brush: Rgba, canvas: Rgba) -> Rgba {
    let ba = brush.a();
    let ca = canvas.a();
    let total = ba + ca;
    if total <= 0.0 {
        return canvas;
    }
    let m = ba / total;
    let mix = |b: f32, c: f32| m * b + (1.0 - m) * c;
    Rgba([
        mix(brush.r(), canvas.r()),
        mix(brush.g(), canvas.g()),
        mix(brush.b(), canvas.b()),
        total.min(1.0),
    ])
}
