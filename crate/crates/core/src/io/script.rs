//! JSON-lines stroke scripts: parsing, writing and replay.
//!
//! One record per line, e.g.
//! `{"t":0.5,"type":"sample","pos":[1,2,3],"pressure":0.8,"zoom":1}`.
//! `t` (seconds) is optional and defaults to 0. Blank lines are skipped.

use std::io::{self, BufRead, Write};

use glam::DVec3;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::canvas::{CanvasError, DeepCanvas};
use crate::paint::painter::PaintError;
use crate::paint::{AdjustStats, Brush, Painter, Room, StrokeSample};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScriptRecord {
    Brush {
        brush: Brush,
    },
    StrokeBegin {},
    Sample {
        pos: [f64; 3],
        pressure: f64,
        zoom: f64,
    },
    StrokeEnd {},
    Room {
        name: String,
        min: [f64; 3],
        max: [f64; 3],
        scale: f64,
    },
    /// Advances one adjustment frame.
    Frame {},
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScriptEvent {
    pub t: f64,
    pub record: ScriptRecord,
}

impl ScriptEvent {
    pub fn new(t: f64, record: ScriptRecord) -> Self {
        ScriptEvent { t, record }
    }

    /// Range checks on the record's fields.
    pub fn validate(&self) -> Result<(), String> {
        if !self.t.is_finite() {
            return Err("t must be finite".into());
        }
        match &self.record {
            ScriptRecord::Brush { brush } => brush.validate(),
            ScriptRecord::Sample {
                pos,
                pressure,
                zoom,
            } => {
                if !pos.iter().all(|v| v.is_finite()) {
                    Err("pos must be finite".into())
                } else if !(0.0..=1.0).contains(pressure) {
                    Err(format!("pressure {pressure} outside [0, 1]"))
                } else if !(zoom.is_finite() && *zoom > 0.0) {
                    Err(format!("zoom must be positive, got {zoom}"))
                } else {
                    Ok(())
                }
            }
            ScriptRecord::Room {
                name,
                min,
                max,
                scale,
            } => {
                if name.is_empty() {
                    Err("room name is empty".into())
                } else if !(0..3)
                    .all(|a| min[a].is_finite() && max[a].is_finite() && min[a] < max[a])
                {
                    Err("room box is empty".into())
                } else if !(scale.is_finite() && *scale > 0.0) {
                    Err(format!("room scale must be positive, got {scale}"))
                } else {
                    Ok(())
                }
            }
            ScriptRecord::StrokeBegin {} | ScriptRecord::StrokeEnd {} | ScriptRecord::Frame {} => {
                Ok(())
            }
        }
    }

    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(&self.record).expect("records serialize");
        v.as_object_mut()
            .expect("tagged record is an object")
            .insert("t".into(), self.t.into());
        v.to_string()
    }
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Parses one line; `Ok(None)` for blank lines.
pub fn parse_line(text: &str, line: usize) -> Result<Option<ScriptEvent>, ScriptError> {
    let err = |reason: String| ScriptError::Parse { line, reason };
    if text.trim().is_empty() {
        return Ok(None);
    }
    let mut v: Value = serde_json::from_str(text).map_err(|e| err(e.to_string()))?;
    let obj = v
        .as_object_mut()
        .ok_or_else(|| err("record must be a JSON object".into()))?;
    let t = match obj.remove("t") {
        None => 0.0,
        Some(Value::Number(n)) => n.as_f64().ok_or_else(|| err("t is not a number".into()))?,
        Some(_) => return Err(err("t is not a number".into())),
    };
    let record: ScriptRecord = serde_json::from_value(v).map_err(|e| err(e.to_string()))?;
    let ev = ScriptEvent { t, record };
    ev.validate().map_err(err)?;
    Ok(Some(ev))
}

/// Streaming parser over lines; yields events or the first error.
pub fn parse_script(
    reader: impl BufRead,
) -> impl Iterator<Item = Result<ScriptEvent, ScriptError>> {
    reader
        .lines()
        .enumerate()
        .filter_map(|(i, line)| match line {
            Err(e) => Some(Err(ScriptError::Io(e))),
            Ok(text) => parse_line(&text, i + 1).transpose(),
        })
}

pub fn parse_script_str(text: &str) -> Result<Vec<ScriptEvent>, ScriptError> {
    parse_script(text.as_bytes()).collect()
}

pub fn serialize_script(events: &[ScriptEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&e.to_json());
        out.push('\n');
    }
    out
}

/// Appends events to a script as they happen.
pub struct ScriptRecorder<W: Write> {
    out: W,
    count: usize,
}

impl<W: Write> ScriptRecorder<W> {
    pub fn new(out: W) -> Self {
        ScriptRecorder { out, count: 0 }
    }

    pub fn record(&mut self, event: &ScriptEvent) -> io::Result<()> {
        writeln!(self.out, "{}", event.to_json())?;
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("event {index}: {source}")]
    Paint { index: usize, source: PaintError },
    #[error("event {index}: {source}")]
    Canvas { index: usize, source: CanvasError },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ReplayStats {
    pub events: usize,
    pub kept_samples: usize,
    pub touched: usize,
    pub frames: usize,
    pub refined: usize,
    pub coarsened: usize,
    /// A frame ran out of pool capacity.
    pub exhausted: bool,
}

impl ReplayStats {
    fn add_frame(&mut self, s: AdjustStats) {
        self.frames += 1;
        self.refined += s.refined;
        self.coarsened += s.coarsened;
        self.exhausted |= s.exhausted;
    }
}

/// Applies one event.
pub fn apply_event(
    canvas: &mut DeepCanvas,
    painter: &mut Painter,
    event: &ScriptEvent,
    stats: &mut ReplayStats,
) -> Result<(), ReplayError> {
    let index = stats.events;
    let paint = |source| ReplayError::Paint { index, source };
    match &event.record {
        ScriptRecord::Brush { brush } => painter.set_brush(brush.clone()).map_err(paint)?,
        ScriptRecord::StrokeBegin {} => painter.begin_stroke(),
        ScriptRecord::Sample {
            pos,
            pressure,
            zoom,
        } => {
            let s = StrokeSample::new(event.t, DVec3::from_array(*pos), *pressure, *zoom);
            if let Some(r) = painter.add_sample(canvas, s).map_err(paint)? {
                stats.kept_samples += 1;
                stats.touched += r.touched;
            }
        }
        ScriptRecord::StrokeEnd {} => {
            if let Some(r) = painter.end_stroke(canvas).map_err(paint)? {
                stats.kept_samples += 1;
                stats.touched += r.touched;
            }
        }
        ScriptRecord::Room {
            name,
            min,
            max,
            scale,
        } => canvas
            .define_room(Room::new(name.clone(), *min, *max, *scale))
            .map_err(|source| ReplayError::Canvas { index, source })?,
        ScriptRecord::Frame {} => {
            let s = painter.process_adjustments(canvas);
            stats.add_frame(s);
        }
    }
    stats.events += 1;
    Ok(())
}

/// Applies all events, then runs adjustment frames until the queue drains
/// (or stops making progress).
pub fn replay(
    canvas: &mut DeepCanvas,
    painter: &mut Painter,
    events: impl IntoIterator<Item = ScriptEvent>,
) -> Result<ReplayStats, ReplayError> {
    let mut stats = ReplayStats::default();
    for e in events {
        apply_event(canvas, painter, &e, &mut stats)?;
    }
    finish_replay(canvas, painter, &mut stats)?;
    Ok(stats)
}

/// Closes a stroke left open by the script (not counted as an event) and
/// drains the adjustment queue.
pub fn finish_replay(
    canvas: &mut DeepCanvas,
    painter: &mut Painter,
    stats: &mut ReplayStats,
) -> Result<(), ReplayError> {
    if painter.in_stroke() {
        let ev = ScriptEvent::new(0.0, ScriptRecord::StrokeEnd {});
        apply_event(canvas, painter, &ev, stats)?;
        stats.events -= 1;
    }
    while !painter.queue.is_empty() {
        let s = painter.process_adjustments(canvas);
        stats.add_frame(s);
        if s.exhausted && s.work() == 0 {
            break;
        }
    }
    Ok(())
}
