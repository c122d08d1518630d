//! Snapshots, stroke scripts, precision reports and image files.

pub mod image;
pub mod report;
pub mod script;
pub mod snapshot;

#[cfg(feature = "png")]
pub use image::{encode_png, write_png};
pub use image::{encode_ppm, write_image, write_ppm};
pub use report::{scatter_csv, write_report_json, write_scatter_csv};
pub use script::{
    apply_event, finish_replay, parse_line, parse_script, parse_script_str, replay,
    serialize_script, ReplayError, ReplayStats, ScriptError, ScriptEvent, ScriptRecord,
    ScriptRecorder,
};
pub use snapshot::{
    decode_snapshot, encode_snapshot, load_snapshot, read_snapshot, save_snapshot, write_snapshot,
    SnapshotError,
};
