use crate::color::Rgba;

/// Rays stop once less than this fraction of light gets through.
pub const TERMINATION_TRANSMITTANCE: f32 = 0.003;

/// Front-to-back accumulation state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Accum {
    pub rgb: [f32; 3],
    pub transmittance: f32,
}

impl Default for Accum {
    fn default() -> Self {
        Accum {
            rgb: [0.0; 3],
            transmittance: 1.0,
        }
    }
}

impl Accum {
    /// Composites a segment of length `t` (in units of the leaf's own
    /// width). A leaf's alpha is its opacity over one full crossing, so the
    /// segment transmits `(1 - a)^t`.
    pub fn composite(&mut self, leaf: Rgba, t: f32) {
        let a = leaf.a();
        if a <= 0.0 || t <= 0.0 {
            return;
        }
        let ts = if a >= 1.0 { 0.0 } else { (1.0 - a).powf(t) };
        let w = self.transmittance * (1.0 - ts);
        for (c, l) in self.rgb.iter_mut().zip(leaf.rgb()) {
            *c += w * l;
        }
        self.transmittance *= ts;
    }

    pub fn done(&self) -> bool {
        self.transmittance < TERMINATION_TRANSMITTANCE
    }

    /// Final color over the background.
    pub fn resolve(&self, background: Rgba) -> [f32; 3] {
        let mut out = self.rgb;
        for (c, b) in out.iter_mut().zip(background.rgb()) {
            *c += self.transmittance * b;
        }
        out
    }
}
