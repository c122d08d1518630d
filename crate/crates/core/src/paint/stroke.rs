//! Stroke input: samples, pressure/zoom radius mapping and sub-sampling.

use glam::DVec3;
use serde::{Deserialize, Serialize};

/// Minimum time between kept samples (about 5 Hz).
pub const RESAMPLE_PERIOD: f64 = 0.2;
/// A sample is also kept once it moved this many radii from the last one.
pub const RESAMPLE_DISTANCE: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrokeSample {
    pub time: f64,
    pub position: DVec3,
    pub pressure: f64,
    pub zoom: f64,
}

impl StrokeSample {
    pub fn new(time: f64, position: DVec3, pressure: f64, zoom: f64) -> Self {
        StrokeSample {
            time,
            position,
            pressure,
            zoom,
        }
    }
}

/// Radius actually deposited for a sample.
pub fn effective_radius(base_radius: f64, sample: &StrokeSample) -> f64 {
    base_radius * sample.zoom * (0.5 + 0.5 * sample.pressure)
}

/// Streaming sub-sampler: decides per incoming sample whether to keep it.
#[derive(Clone, Debug, Default)]
pub struct StrokeResampler {
    last_kept: Option<StrokeSample>,
    pending: Option<StrokeSample>,
}

impl StrokeResampler {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feeds one raw sample; returns it if it should be painted. `radius` is
    /// the effective radius of the last kept sample.
    pub fn push(&mut self, sample: StrokeSample, radius: f64) -> Option<StrokeSample> {
        let keep = match &self.last_kept {
            None => true,
            Some(last) => {
                sample.time - last.time >= RESAMPLE_PERIOD
                    || (sample.position - last.position).length() >= RESAMPLE_DISTANCE * radius
            }
        };
        if keep {
            self.last_kept = Some(sample);
            self.pending = None;
            Some(sample)
        } else {
            self.pending = Some(sample);
            None
        }
    }

    /// Ends the stroke, returning the final raw sample if it was not kept.
    pub fn finish(&mut self) -> Option<StrokeSample> {
        self.last_kept = None;
        self.pending.take()
    }
}

/// Batch form: keeps the first and last sample plus every sample at least
/// 0.2 s or half a radius away from the previously kept one.
pub fn resample_stroke(samples: &[StrokeSample], base_radius: f64) -> Vec<StrokeSample> {
    let mut r = StrokeResampler::new();
    let mut out = Vec::new();
    let mut radius = 0.0;
    for s in samples {
        if let Some(k) = r.push(*s, radius) {
            radius = effective_radius(base_radius, &k);
            out.push(k);
        }
    }
    out.extend(r.finish());
    out
}
