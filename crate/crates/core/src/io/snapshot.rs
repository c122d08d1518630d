//! `.cvox` snapshots: a fixed little-endian header followed by the dense
//! index pools up to the high-water mark.
//!
//! ```text
//! offset  size  field
//!      0     5  magic "CVOX1"
//!      5     1  flags (bit 0: neighbor pool present)
//!      6     2  reserved
//!      8     4  roots per axis (u32)
//!     12     4  max depth (u32)
//!     16     8  root size, meters (f64)
//!     24    16  background rgba (4 x f32)
//!     40     8  detail falloff (f64)
//!     48     4  block size (u32)
//!     52     4  capacity (u32)
//!     56     4  cell count n, dead slots included (u32)
//!     60     4  room count (u32)
//!     64     -  rooms: name length (u32), UTF-8 name, min (3 x f64),
//!               max (3 x f64), suggested scale (f64)
//!      -     -  liveness bitmap, ceil(n/8) bytes, LSB first
//!      -     -  parent (n x u32), first child (n x u32), depth/flags
//!               (n x u8), rgba (n x 4 x f32), neighbors (n x 3 x u32, if
//!               flagged)
//! ```
//!
//! Free groups are not stored; they are recovered from the dead slots.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::canvas::{CanvasConfig, CanvasError, DeepCanvas, OctreePools, FLAG_LIVE};
use crate::color::Rgba;
use crate::paint::Room;

pub const MAGIC: &[u8; 4] = b"CVOX";
pub const VERSION: u8 = b'1';
pub const HEADER_LEN: usize = 64;
const FLAG_NEIGHBORS: u8 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("not a canvas snapshot (bad magic)")]
    BadMagic,
    #[error("unsupported snapshot version {0:?}")]
    VersionMismatch(char),
    #[error("snapshot is truncated")]
    TruncatedFile,
    #[error("snapshot fails structural checks: {0}")]
    InvariantViolation(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl From<CanvasError> for SnapshotError {
    fn from(e: CanvasError) -> Self {
        SnapshotError::InvariantViolation(e.to_string())
    }
}

pub fn save_snapshot(canvas: &DeepCanvas, path: impl AsRef<Path>) -> Result<(), SnapshotError> {
    let bytes = encode_snapshot(canvas, true);
    let path = path.as_ref();
    // Write beside the target and rename, so a failed save leaves any old file intact.
    let tmp = path.with_extension("cvox.partial");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_snapshot(path: impl AsRef<Path>) -> Result<DeepCanvas, SnapshotError> {
    let bytes = fs::read(path)?;
    decode_snapshot(&bytes)
}

pub fn encode_snapshot(canvas: &DeepCanvas, with_neighbors: bool) -> Vec<u8> {
    let cfg = canvas.config();
    let pools = canvas.pools();
    let n = pools.parent.len();
    let mut out = Vec::with_capacity(HEADER_LEN + n * 40);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(if with_neighbors { FLAG_NEIGHBORS } else { 0 });
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&cfg.root_count_per_axis.to_le_bytes());
    out.extend_from_slice(&cfg.max_depth.to_le_bytes());
    out.extend_from_slice(&cfg.root_size.to_le_bytes());
    for c in cfg.background_rgba.0 {
        out.extend_from_slice(&c.to_le_bytes());
    }
    out.extend_from_slice(&cfg.detail_falloff.to_le_bytes());
    out.extend_from_slice(&cfg.block_size.to_le_bytes());
    out.extend_from_slice(&cfg.capacity.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&(canvas.rooms().len() as u32).to_le_bytes());
    debug_assert_eq!(out.len(), HEADER_LEN);
    for room in canvas.rooms() {
        out.extend_from_slice(&(room.name.len() as u32).to_le_bytes());
        out.extend_from_slice(room.name.as_bytes());
        for v in room
            .min
            .iter()
            .chain(&room.max)
            .chain([&room.suggested_scale])
        {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut bitmap = vec![0u8; n.div_ceil(8)];
    for (i, f) in pools.depth_flags.iter().enumerate() {
        if f & FLAG_LIVE != 0 {
            bitmap[i / 8] |= 1 << (i % 8);
        }
    }
    out.extend_from_slice(&bitmap);
    for v in &pools.parent {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in &pools.first_child {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&pools.depth_flags);
    for c in &pools.rgba {
        for v in c.0 {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    if with_neighbors {
        for nb in &pools.neighbor3 {
            for v in nb {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SnapshotError> {
        if self.buf.len() < n {
            return Err(SnapshotError::TruncatedFile);
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], SnapshotError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32, SnapshotError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn f32(&mut self) -> Result<f32, SnapshotError> {
        Ok(f32::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64, SnapshotError> {
        Ok(f64::from_le_bytes(self.array()?))
    }
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<DeepCanvas, SnapshotError> {
    if bytes.len() < MAGIC.len() + 1 {
        return if MAGIC.starts_with(bytes) {
            Err(SnapshotError::TruncatedFile)
        } else {
            Err(SnapshotError::BadMagic)
        };
    }
    if &bytes[..4] != MAGIC {
        return Err(SnapshotError::BadMagic);
    }
    if bytes[4] != VERSION {
        return Err(SnapshotError::VersionMismatch(bytes[4] as char));
    }
    let mut r = Reader { buf: &bytes[5..] };
    let flags = r.array::<1>()?[0];
    r.take(2)?;
    let root_count_per_axis = r.u32()?;
    let max_depth = r.u32()?;
    let root_size = r.f64()?;
    let background_rgba = Rgba([r.f32()?, r.f32()?, r.f32()?, r.f32()?]);
    let detail_falloff = r.f64()?;
    let block_size = r.u32()?;
    let capacity = r.u32()?;
    let n = r.u32()? as usize;
    let room_count = r.u32()?;
    let config = CanvasConfig {
        root_count_per_axis,
        root_size,
        max_depth,
        background_rgba,
        detail_falloff,
        block_size,
        capacity,
    };
    config.validate()?;
    if n as u64 > capacity as u64 {
        return Err(SnapshotError::InvariantViolation(format!(
            "{n} cells exceed capacity {capacity}"
        )));
    }
    let mut rooms = Vec::new();
    for _ in 0..room_count {
        let len = r.u32()? as usize;
        let name = String::from_utf8(r.take(len)?.to_vec())
            .map_err(|_| SnapshotError::InvariantViolation("room name is not UTF-8".into()))?;
        let min = [r.f64()?, r.f64()?, r.f64()?];
        let max = [r.f64()?, r.f64()?, r.f64()?];
        let scale = r.f64()?;
        rooms.push(Room::new(name, min, max, scale));
    }
    let bitmap = r.take(n.div_ceil(8))?;
    let mut pools = OctreePools::default();
    let words = r.take(n * 4)?;
    pools.parent = words
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let words = r.take(n * 4)?;
    pools.first_child = words
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    pools.depth_flags = r.take(n)?.to_vec();
    let words = r.take(n * 16)?;
    pools.rgba = words
        .chunks_exact(16)
        .map(|c| {
            let f = |i: usize| f32::from_le_bytes(c[4 * i..4 * i + 4].try_into().unwrap());
            Rgba([f(0), f(1), f(2), f(3)])
        })
        .collect();
    let has_neighbors = flags & FLAG_NEIGHBORS != 0;
    if has_neighbors {
        let words = r.take(n * 12)?;
        pools.neighbor3 = words
            .chunks_exact(12)
            .map(|c| {
                let f = |i: usize| u32::from_le_bytes(c[4 * i..4 * i + 4].try_into().unwrap());
                [f(0), f(1), f(2)]
            })
            .collect();
    } else {
        pools.neighbor3 = vec![[crate::canvas::NONE; 3]; n];
    }
    if !r.buf.is_empty() {
        return Err(SnapshotError::InvariantViolation(format!(
            "{} trailing bytes",
            r.buf.len()
        )));
    }
    for (i, f) in pools.depth_flags.iter().enumerate() {
        let live = bitmap[i / 8] >> (i % 8) & 1 == 1;
        if live != (f & FLAG_LIVE != 0) {
            return Err(SnapshotError::InvariantViolation(format!(
                "liveness of cell {i} disagrees with its flags"
            )));
        }
    }
    for room in &rooms {
        room.validate(&config)?;
    }
    let stored = pools.neighbor3.clone();
    let mut canvas = DeepCanvas::from_parts(config, pools, rooms)?;
    canvas
        .check_invariants()
        .map_err(SnapshotError::InvariantViolation)?;
    canvas.rebuild_neighbors();
    if has_neighbors && canvas.pools().neighbor3 != stored {
        return Err(SnapshotError::InvariantViolation(
            "stored neighbor pool is stale".into(),
        ));
    }
    Ok(canvas)
}

/// Reads a snapshot from any reader.
pub fn read_snapshot(mut reader: impl Read) -> Result<DeepCanvas, SnapshotError> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    decode_snapshot(&bytes)
}

pub fn write_snapshot(canvas: &DeepCanvas, mut writer: impl Write) -> Result<(), SnapshotError> {
    writer.write_all(&encode_snapshot(canvas, true))?;
    Ok(())
}
