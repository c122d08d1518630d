//! WebSocket wire protocol. Every message is a JSON text frame tagged by
//! `type`; a `frame` message is followed by exactly one binary message
//! holding the PNG image.

use canvox_core::paint::{Brush, Room};
use canvox_core::CanvasConfig;
use serde::{Deserialize, Serialize};

fn default_up() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}

fn default_zoom() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMsg {
    Hello {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        client: Option<String>,
    },
    SetBrush {
        brush: Brush,
    },
    StrokeBegin {},
    /// `zoom` scales the brush radius, so clients send radii in view units.
    /// `seq` is echoed back as `last_seq` in stats once the sample is applied.
    StrokeSample {
        pos: [f64; 3],
        pressure: f64,
        #[serde(default = "default_zoom")]
        zoom: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seq: Option<u64>,
    },
    StrokeEnd {},
    /// `fov` is the vertical field of view in degrees, `size` is `[w, h]`.
    SetCamera {
        eye: [f64; 3],
        look: [f64; 3],
        #[serde(default = "default_up")]
        up: [f64; 3],
        fov: f64,
        size: [u32; 2],
    },
    Teleport {
        room: String,
    },
    DefineRoom {
        room: Room,
    },
    Save {
        path: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMsg {
    Hello {
        config: CanvasConfig,
        rooms: Vec<Room>,
    },
    Frame {
        seq: u64,
        width: u32,
        height: u32,
    },
    Stats {
        cells: u32,
        pool_pct: f64,
        dirty_blocks: usize,
        last_seq: u64,
    },
    Error {
        code: ErrorCode,
        msg: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// Malformed or unknown message; the connection is closed after it.
    Protocol,
    InvalidBrush,
    InvalidSample,
    NoStroke,
    /// Another client is in the middle of a stroke.
    StrokeBusy,
    InvalidCamera,
    UnknownRoom,
    InvalidRoom,
    SaveFailed,
    PoolExhausted,
}

impl ClientMsg {
    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("client messages serialize")
    }
}

impl ServerMsg {
    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }

    pub fn error(code: ErrorCode, msg: impl Into<String>) -> Self {
        ServerMsg::Error {
            code,
            msg: msg.into(),
        }
    }
}
