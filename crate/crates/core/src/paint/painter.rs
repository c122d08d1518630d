//! Stamp application, pick-up, stroke state and the per-frame adjustment
//! pass.

use glam::DVec3;
use thiserror::Error;

use super::adjust::{AdjustStats, AdjustmentQueue, Mark, RefineMark};
use super::brush::{apply_mode, Brush, BrushMode, StampShape};
use super::room::effective_max_depth;
use super::stamp::{stamp_coverage, StampGeom, TaperedCapsule};
use super::stroke::{effective_radius, StrokeResampler, StrokeSample};
use super::target_depth;
use crate::canvas::{Aabb, CanvasError, CellRef, DeepCanvas};
use crate::color::Rgba;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PaintError {
    #[error("sample received outside a stroke")]
    NoStroke,
    #[error("invalid brush: {0}")]
    InvalidBrush(String),
    #[error("invalid sample: {0}")]
    InvalidSample(String),
}

/// One footprint with the color it deposits and the depth it wants.
#[derive(Clone, Debug, PartialEq)]
pub struct Stamp {
    pub geom: StampGeom,
    pub rgba: Rgba,
    pub mode: BrushMode,
    pub target_depth: u32,
}

impl Stamp {
    pub fn new(geom: StampGeom, rgba: Rgba, mode: BrushMode, canvas: &DeepCanvas) -> Self {
        let target_depth = target_depth(geom.detail_radius(), canvas.config());
        Stamp {
            geom,
            rgba,
            mode,
            target_depth,
        }
    }
}

/// What a kept stroke sample did.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StampReport {
    pub touched: usize,
    pub rgba: Rgba,
}

#[derive(Clone, Debug)]
struct StrokeState {
    working: Rgba,
    resampler: StrokeResampler,
    last: Option<(DVec3, f64)>,
}

/// Owns the brush, the active stroke and the deferred adjustment queue for
/// one canvas.
#[derive(Clone, Debug, Default)]
pub struct Painter {
    pub queue: AdjustmentQueue,
    stamps: Vec<Stamp>,
    brush: Brush,
    stroke: Option<StrokeState>,
}

impl Painter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_budget(per_frame_budget: usize) -> Self {
        Painter {
            queue: AdjustmentQueue::new(per_frame_budget),
            ..Default::default()
        }
    }

    pub fn brush(&self) -> &Brush {
        &self.brush
    }

    pub fn set_brush(&mut self, brush: Brush) -> Result<(), PaintError> {
        brush.validate().map_err(PaintError::InvalidBrush)?;
        self.brush = brush;
        Ok(())
    }

    pub fn in_stroke(&self) -> bool {
        self.stroke.is_some()
    }

    /// Stamps registered since the queue last drained.
    pub fn registered_stamps(&self) -> usize {
        self.stamps.len()
    }

    /// Paints one stamp on the current tree and records refine/coarsen
    /// marks. Never changes topology. Returns the number of leaves with
    /// non-zero coverage.
    pub fn apply_stamp(&mut self, canvas: &mut DeepCanvas, stamp: Stamp) -> usize {
        let id = self.stamps.len() as u32;
        self.stamps.push(stamp);
        let stamp = &self.stamps[id as usize];
        let mut touched = 0;
        for leaf in stamp_leaves(canvas, &stamp.geom) {
            if paint_leaf(canvas, &mut self.queue, stamp, id, leaf) {
                touched += 1;
            }
        }
        touched
    }

    pub fn begin_stroke(&mut self) {
        self.stroke = Some(StrokeState {
            working: self.brush.rgba,
            resampler: StrokeResampler::new(),
            last: None,
        });
    }

    /// Feeds one raw input sample. Returns a report when the sample was
    /// kept and painted.
    pub fn add_sample(
        &mut self,
        canvas: &mut DeepCanvas,
        sample: StrokeSample,
    ) -> Result<Option<StampReport>, PaintError> {
        validate_sample(&sample)?;
        let st = self.stroke.as_mut().ok_or(PaintError::NoStroke)?;
        let radius = st.last.map_or(0.0, |(_, r)| r);
        match st.resampler.push(sample, radius) {
            Some(kept) => Ok(Some(self.paint_sample(canvas, kept))),
            None => Ok(None),
        }
    }

    /// Finishes the stroke: paints the last raw sample if the resampler held
    /// it back, then drops the picked-up working color.
    pub fn end_stroke(
        &mut self,
        canvas: &mut DeepCanvas,
    ) -> Result<Option<StampReport>, PaintError> {
        let st = self.stroke.as_mut().ok_or(PaintError::NoStroke)?;
        let report = st.resampler.finish().map(|s| self.paint_sample(canvas, s));
        self.stroke = None;
        Ok(report)
    }

    fn paint_sample(&mut self, canvas: &mut DeepCanvas, s: StrokeSample) -> StampReport {
        let brush = &self.brush;
        let st = self.stroke.as_mut().expect("stroke active");
        let r = effective_radius(brush.radius, &s);
        let geom = match (brush.shape, st.last) {
            (StampShape::Sphere, Some((p0, r0))) => StampGeom::Capsule(TaperedCapsule {
                p0,
                p1: s.position,
                r0,
                r1: r,
            }),
            _ => StampGeom::shape(brush.shape, s.position, r, brush.noise_seed),
        };
        if brush.pickup_strength > 0.0 {
            st.working = pickup_color(canvas, &geom, st.working, brush.pickup_strength);
        }
        st.last = Some((s.position, r));
        let rgba = st.working;
        let stamp = Stamp::new(geom, rgba, brush.mode, canvas);
        let touched = self.apply_stamp(canvas, stamp);
        StampReport { touched, rgba }
    }

    /// One frame of deferred adjustment with the queue's own budget.
    pub fn process_adjustments(&mut self, canvas: &mut DeepCanvas) -> AdjustStats {
        let budget = self.queue.per_frame_budget;
        self.process_with_budget(canvas, budget)
    }

    /// Handles up to `budget` marks that existed when the frame started.
    /// Each refine mark splits one level and replays its stamps into the
    /// children, which may be marked again; each coarsen mark merges one
    /// level when the children agree within the merge tolerance.
    pub fn process_with_budget(&mut self, canvas: &mut DeepCanvas, budget: usize) -> AdjustStats {
        let mut stats = AdjustStats::default();
        let slots = self.queue.frame_len();
        let mut handled = 0;
        for _ in 0..slots {
            if handled >= budget {
                break;
            }
            let Some((c, mark)) = self.queue.pop() else {
                break;
            };
            let Some(mark) = mark else { continue };
            handled += 1;
            match mark {
                Mark::Refine(r) => match self.refine_marked(canvas, c, &r) {
                    Ok(true) => stats.refined += 1,
                    Ok(false) => stats.dropped += 1,
                    Err(_) => {
                        self.queue.push_front(c, Mark::Refine(r));
                        stats.exhausted = true;
                        break;
                    }
                },
                Mark::Coarsen(m) => {
                    if self.coarsen_marked(canvas, c, m.target_depth) {
                        stats.coarsened += 1;
                    } else {
                        stats.dropped += 1;
                    }
                }
            }
        }
        if self.queue.is_empty() {
            self.queue.clear();
            self.stamps.clear();
        }
        stats
    }

    /// Runs frames until the queue is empty or stops making progress.
    /// Returns the number of frames used.
    pub fn drain(&mut self, canvas: &mut DeepCanvas) -> usize {
        let mut frames = 0;
        while !self.queue.is_empty() {
            let s = self.process_adjustments(canvas);
            frames += 1;
            if s.exhausted && s.work() == 0 {
                break;
            }
        }
        frames
    }

    fn refine_marked(
        &mut self,
        canvas: &mut DeepCanvas,
        c: CellRef,
        mark: &RefineMark,
    ) -> Result<bool, CanvasError> {
        if !canvas.is_live(c) || !canvas.is_leaf(c) {
            return Ok(false);
        }
        let base = match canvas.refine_cell(c) {
            Ok(b) => b,
            Err(e @ CanvasError::PoolExhausted { .. }) => return Err(e),
            Err(_) => return Ok(false),
        };
        for k in 0..8 {
            let child = CellRef(base.0 + k);
            canvas.set_rgba(child, mark.pre);
            let bounds = canvas.cell_bounds(child);
            for &id in &mark.stamps {
                let stamp = &self.stamps[id as usize];
                if stamp.geom.intersects(&bounds) {
                    paint_leaf(canvas, &mut self.queue, stamp, id, child);
                }
            }
        }
        Ok(true)
    }

    fn coarsen_marked(&mut self, canvas: &mut DeepCanvas, c: CellRef, target: u32) -> bool {
        if !canvas.is_live(c) {
            return false;
        }
        let Some(children) = canvas.children(c) else {
            return false;
        };
        if children
            .iter()
            .any(|&k| !canvas.is_leaf(k) || self.queue.has_refine(k))
        {
            return false;
        }
        let colors: Vec<Rgba> = children.iter().map(|&k| canvas.rgba(k)).collect();
        let mean = Rgba::mean(&colors);
        if colors
            .iter()
            .any(|k| k.max_channel_diff(&mean) > self.queue.merge_tolerance)
        {
            return false;
        }
        if canvas.coarsen_cell(c).is_err() {
            return false;
        }
        for k in children {
            self.queue.unmark(k);
        }
        if canvas.depth(c) > target {
            if let Some(p) = canvas.parent(c) {
                self.queue.mark_coarsen(p, target);
            }
        }
        true
    }
}

fn validate_sample(s: &StrokeSample) -> Result<(), PaintError> {
    if !s.position.is_finite() || !s.time.is_finite() {
        return Err(PaintError::InvalidSample(
            "non-finite position or time".into(),
        ));
    }
    if !(0.0..=1.0).contains(&s.pressure) {
        return Err(PaintError::InvalidSample(format!(
            "pressure {} outside [0, 1]",
            s.pressure
        )));
    }
    if !(s.zoom.is_finite() && s.zoom > 0.0) {
        return Err(PaintError::InvalidSample(format!(
            "zoom must be positive, got {}",
            s.zoom
        )));
    }
    Ok(())
}

/// Applies `stamp` to one intersecting leaf and updates its marks. Returns
/// whether the coverage was non-zero.
fn paint_leaf(
    canvas: &mut DeepCanvas,
    queue: &mut AdjustmentQueue,
    stamp: &Stamp,
    id: u32,
    leaf: CellRef,
) -> bool {
    let bounds = canvas.cell_bounds(leaf);
    let depth = canvas.depth(leaf);
    let limit = effective_max_depth(bounds.center(), canvas.rooms(), canvas.config());
    let target = stamp.target_depth.min(limit);
    let before = canvas.rgba(leaf);
    if depth < target && !queue.has_refine(leaf) {
        queue.mark_refine(
            leaf,
            RefineMark {
                pre: before,
                stamps: Vec::new(),
            },
        );
    }
    if let Some(m) = queue.refine_mark_mut(leaf) {
        m.stamps.push(id);
    }
    let f = stamp_coverage(&stamp.geom, &bounds);
    if f <= 0.0 {
        return false;
    }
    let after = apply_mode(stamp.mode, stamp.rgba, f, before);
    if after != before {
        canvas.set_rgba(leaf, after);
    }
    if depth > target && f >= 1.0 {
        if let Some(p) = canvas.parent(leaf) {
            queue.mark_coarsen(p, target);
        }
    }
    true
}

/// Leaves whose boxes the stamp may cover, found by descending from the
/// roots overlapping its bounds.
pub fn stamp_leaves(canvas: &DeepCanvas, geom: &StampGeom) -> Vec<CellRef> {
    let cfg = canvas.config();
    let b = geom.bounds();
    let half = cfg.extent() * 0.5;
    let n = cfg.root_count_per_axis as i64;
    let mut lo = [0i64; 3];
    let mut hi = [0i64; 3];
    for a in 0..3 {
        if b.max[a] < -half || b.min[a] > half {
            return Vec::new();
        }
        lo[a] = (((b.min[a] + half) / cfg.root_size).floor() as i64).clamp(0, n - 1);
        hi[a] = (((b.max[a] + half) / cfg.root_size).floor() as i64).clamp(0, n - 1);
    }
    let mut stack = Vec::new();
    for z in lo[2]..=hi[2] {
        for y in lo[1]..=hi[1] {
            for x in lo[0]..=hi[0] {
                let r = canvas.root_at([x, y, z]).expect("root in range");
                stack.push((r, canvas.cell_bounds(r)));
            }
        }
    }
    let mut out = Vec::new();
    while let Some((c, bounds)) = stack.pop() {
        if !geom.intersects(&bounds) {
            continue;
        }
        match canvas.first_child(c) {
            None => out.push(c),
            Some(f) => {
                for k in 0..8 {
                    stack.push((CellRef(f.0 + k), child_bounds(&bounds, k)));
                }
            }
        }
    }
    out.sort_unstable();
    out
}

fn child_bounds(b: &Aabb, slot: u32) -> Aabb {
    let c = b.center();
    let mut out = *b;
    for a in 0..3 {
        if (slot >> a) & 1 == 1 {
            out.min[a] = c[a];
        } else {
            out.max[a] = c[a];
        }
    }
    out
}

/// Coverage- and opacity-weighted mean color under the stamp, mixed into
/// the brush color by `strength`. Alpha is kept; transparent regions leave
/// the brush unchanged.
pub fn pickup_color(canvas: &DeepCanvas, geom: &StampGeom, brush: Rgba, strength: f32) -> Rgba {
    if strength <= 0.0 {
        return brush;
    }
    let mut acc = [0.0f64; 3];
    let mut total = 0.0f64;
    for leaf in stamp_leaves(canvas, geom) {
        let bounds = canvas.cell_bounds(leaf);
        let f = stamp_coverage(geom, &bounds) as f64;
        let c = canvas.rgba(leaf);
        let w = f * c.a() as f64 * bounds.size().x.powi(3);
        if w > 0.0 {
            for (a, v) in acc.iter_mut().zip(c.rgb()) {
                *a += w * v as f64;
            }
            total += w;
        }
    }
    if total <= 0.0 {
        return brush;
    }
    let s = strength.min(1.0);
    let mut out = brush;
    for (i, a) in acc.iter().enumerate() {
        let picked = (a / total) as f32;
        out.0[i] = (1.0 - s) * brush.0[i] + s * picked;
    }
    out
}
