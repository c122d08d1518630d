//! Rooms: artist-defined viewing boxes used for teleporting and for
//! limiting refinement far away from any of them.

use glam::DVec3;
use serde::{Deserialize, Serialize};

use crate::canvas::{Aabb, CanvasConfig, CanvasError};

/// Depth limit never drops below this (unless `max_depth` itself is lower).
pub const MIN_EFFECTIVE_DEPTH: u32 = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub name: String,
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub suggested_scale: f64,
}

impl Room {
    pub fn new(
        name: impl Into<String>,
        min: [f64; 3],
        max: [f64; 3],
        suggested_scale: f64,
    ) -> Self {
        Room {
            name: name.into(),
            min,
            max,
            suggested_scale,
        }
    }

    pub fn aabb(&self) -> Aabb {
        Aabb {
            min: DVec3::from_array(self.min),
            max: DVec3::from_array(self.max),
        }
    }

    /// Length of the box diagonal.
    pub fn diameter(&self) -> f64 {
        self.aabb().size().length()
    }

    pub fn validate(&self, config: &CanvasConfig) -> Result<(), CanvasError> {
        let err = |m: String| Err(CanvasError::InvalidRoom(m));
        if self.name.is_empty() {
            return err("room name is empty".into());
        }
        let b = self.aabb();
        if !(b.min.is_finite() && b.max.is_finite()) || b.min.cmpge(b.max).any() {
            return err(format!("room '{}' has an empty box", self.name));
        }
        let canvas = config.bounds();
        if !(canvas.contains(b.min) && canvas.contains(b.max)) {
            return err(format!("room '{}' extends outside the canvas", self.name));
        }
        if !(self.suggested_scale.is_finite() && self.suggested_scale > 0.0) {
            return err(format!("room '{}' needs a positive scale", self.name));
        }
        Ok(())
    }
}

/// Deepest level allowed at `position`: the full `max_depth` inside a room
/// or when no rooms exist, otherwise reduced by `detail_falloff` levels per
/// doubling of the distance to the nearest room (in units of that room's
/// diameter).
pub fn effective_max_depth(position: DVec3, rooms: &[Room], config: &CanvasConfig) -> u32 {
    let max = config.max_depth;
    let nearest = rooms
        .iter()
        .map(|r| (r.aabb().distance_to(position), r.diameter()))
        .min_by(|a, b| a.0.total_cmp(&b.0));
    let Some((dist, diameter)) = nearest else {
        return max;
    };
    if dist <= 0.0 {
        return max;
    }
    let levels = (1.0 + dist / diameter).log2().floor() * config.detail_falloff;
    let floor = MIN_EFFECTIVE_DEPTH.min(max);
    let reduced = max as f64 - levels.floor();
    (reduced.max(floor as f64) as u32).min(max)
}
