//! Volumetric painting on an array of deep sparse octrees.

pub mod canvas;
pub mod color;
pub mod io;
pub mod paint;
pub mod raycast;
pub mod scene;

pub use canvas::{Aabb, CanvasConfig, CanvasError, CellRef, DeepCanvas, Face};
pub use color::{blend_color, Rgba};
