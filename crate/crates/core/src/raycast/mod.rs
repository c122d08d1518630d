//! Software ray casting in cell-local coordinates.
//!
//! A ray carries a fixed single-precision direction and a single-precision
//! point inside the current cell's unit frame. Moving to a neighbor
//! re-expresses that point through power-of-two scales and dyadic shifts,
//! so positional error stays relative to the current cell instead of the
//! canvas.

pub mod analysis;
mod camera;
mod composite;
mod local;
mod render;
mod world;

pub use analysis::{
    analyze_precision, angle_bound_deg, Bin, ErrorReport, RaySample, TraversalMode,
};
pub use camera::Camera;
pub use composite::{Accum, TERMINATION_TRANSMITTANCE};
pub use local::{
    cell_exit, exit_point, ray_entry, to_neighbor_local, trace_local, Entry, LocalTrace, Step,
};
pub use render::{cast_ray, cast_ray_world, render_image, Image};
pub use world::{trace_world, WorldTrace};

use thiserror::Error;

/// Default cap on traversal steps per ray.
pub const DEFAULT_STEP_CAP: u64 = 1_000_000;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum RayError {
    #[error("ray misses the canvas")]
    MissesCanvas,
    #[error("traversal aborted: {0:?}")]
    TraversalAbort(AbortReason),
    #[error("invalid camera: {0}")]
    InvalidCamera(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbortReason {
    NegativeStep,
    StepCap,
}

/// How a traversal ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// Accumulated opacity reached the termination threshold.
    Opaque,
    /// Left the canvas.
    Exited,
    Aborted(AbortReason),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    pub step_cap: u64,
    /// Stop descending into cells narrower than this many radians of view
    /// angle at their distance, compositing the interior average instead.
    /// Zero disables it.
    pub lod_angle: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            step_cap: DEFAULT_STEP_CAP,
            lod_angle: 0.0,
        }
    }
}
