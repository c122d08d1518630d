//! Precision harness: single-precision traversal against a double-precision
//! replay that is forced through the same cells and faces.

use glam::DVec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{trace_local, trace_world, Camera, Outcome, Step, TraceOptions};
use crate::canvas::{CellRef, DeepCanvas};

/// Single-precision unit roundoff as used by the bound.
pub const EPSILON: f64 = 1.0 / (1u64 << 23) as f64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraversalMode {
    Local,
    World,
}

/// Measurements for one ray.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RaySample {
    /// Eye to final point, meters.
    pub length: f64,
    pub crossed: u64,
    pub angle_deg: f64,
    /// Distance between the single- and double-precision final points, meters.
    pub position_error: f64,
    /// Start point rounding error, meters.
    pub e0: f64,
    /// Start point rounding error in units of the start cell.
    pub e0_local: f64,
    pub bound_deg: f64,
    /// Sum of crossed cell widths over the length.
    pub width_ratio: f64,
    /// The double-precision replay would have picked another face somewhere.
    pub diverged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Bin {
    pub bin_key: String,
    pub count: usize,
    pub max_deg: f64,
    pub p99_deg: f64,
    pub mean_deg: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ErrorReport {
    pub mode: TraversalMode,
    pub requested: usize,
    pub analyzed: usize,
    pub missed: usize,
    pub aborted: usize,
    pub max_angle_deg: f64,
    pub max_e0_local: f64,
    pub max_position_error: f64,
    pub angle_violations: usize,
    pub position_violations: usize,
    pub diverged_rays: usize,
    pub min_crossed: u64,
    pub mean_width_ratio: f64,
    pub max_width_ratio: f64,
    pub by_length: Vec<Bin>,
    pub by_cells: Vec<Bin>,
    #[serde(skip)]
    pub samples: Vec<RaySample>,
}

/// True when `v` is above `bound` or either is NaN.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn exceeds(v: f64, bound: f64) -> bool {
    !(v <= bound)
}

/// `asin(sqrt(2) * (e0/L + 7.5 eps))` in degrees.
pub fn angle_bound_deg(e0: f64, length: f64) -> f64 {
    let s = std::f64::consts::SQRT_2 * (e0 / length + 7.5 * EPSILON);
    s.min(1.0).asin().to_degrees()
}

fn angle_deg(d: DVec3, v: DVec3) -> f64 {
    d.cross(v).length().atan2(d.dot(v)).to_degrees()
}

/// Offset between two cell centers, meters, from integer lattice
/// coordinates (no cancellation against the canvas origin).
fn center_offset(canvas: &DeepCanvas, from: CellRef, to: CellRef) -> DVec3 {
    let a = canvas.cell_coords(from);
    let b = canvas.cell_coords(to);
    let depth = a.depth.max(b.depth);
    let half = canvas.config().cell_width(depth + 1);
    let k =
        |c: &crate::canvas::CellCoords, i: usize| ((2 * c.xyz[i] + 1) << (depth - c.depth)) as i64;
    DVec3::new(
        (k(&b, 0) - k(&a, 0)) as f64 * half,
        (k(&b, 1) - k(&a, 1)) as f64 * half,
        (k(&b, 2) - k(&a, 2)) as f64 * half,
    )
}

/// Re-expresses a double-precision local point of `from` in the frame of `to`.
pub fn transfer_local(canvas: &DeepCanvas, from: CellRef, to: CellRef, p: DVec3) -> DVec3 {
    let wf = canvas.cell_width(from);
    let wt = canvas.cell_width(to);
    let scale = (canvas.depth(to) as f64 - canvas.depth(from) as f64).exp2();
    debug_assert!(((wf / wt) - scale).abs() <= 1e-12 * scale);
    p * scale - center_offset(canvas, from, to) / wt
}

/// Replays `steps` in double precision from `p0` along `d`, returning the
/// final point in the last cell's frame and whether any own face choice
/// differed from the recorded one.
pub fn replay_double(canvas: &DeepCanvas, steps: &[Step], p0: DVec3, d: DVec3) -> (DVec3, bool) {
    let mut p = p0;
    let mut diverged = false;
    for (i, st) in steps.iter().enumerate() {
        let mut best = f64::INFINITY;
        let mut own = st.face;
        for a in 0..3 {
            if d[a] != 0.0 {
                let t = ((if d[a] > 0.0 { 0.5 } else { -0.5 }) - p[a]) / d[a];
                if t < best {
                    best = t;
                    own = crate::canvas::Face::new(a, d[a] > 0.0);
                }
            }
        }
        diverged |= own != st.face;
        let a = st.face.axis;
        let side = if st.face.positive { 0.5 } else { -0.5 };
        let t = (side - p[a]) / d[a];
        let mut q = p + d * t;
        q[a] = side;
        p = match steps.get(i + 1) {
            Some(next) if canvas.depth(next.cell) == canvas.depth(st.cell) => {
                // Same-size neighbor: a unit shift along the exit axis.
                q[a] -= 2.0 * side;
                q
            }
            Some(next) => transfer_local(canvas, st.cell, next.cell, q),
            None => q,
        };
    }
    (p, diverged)
}

fn analyze_local(
    canvas: &DeepCanvas,
    eye: DVec3,
    dir: DVec3,
    opts: &TraceOptions,
) -> Result<RaySample, bool> {
    let mut steps = Vec::new();
    let tr = trace_local(canvas, eye, dir, opts, Some(&mut steps)).map_err(|_| false)?;
    if matches!(tr.outcome, Outcome::Aborted(_)) || steps.is_empty() {
        return Err(true);
    }
    let d = tr.entry.d.as_dvec3();
    let start = tr.entry.cell;
    let w0 = canvas.cell_width(start);
    let wend = canvas.cell_width(tr.end_cell);
    let (p_double, diverged) = replay_double(canvas, &steps, tr.entry.p64, d);
    let p_single = tr.end_p.as_dvec3();
    let e0_local = (tr.entry.p.as_dvec3() - tr.entry.p64).length();
    let e0 = e0_local * w0;
    let v = tr.entry.offset + center_offset(canvas, start, tr.end_cell) + p_single * wend
        - tr.entry.p64 * w0;
    let length = v.length();
    let angle = angle_deg(d, v);
    let position_error = (p_single - p_double).length() * wend;
    Ok(RaySample {
        length,
        crossed: tr.crossed,
        angle_deg: angle,
        position_error,
        e0,
        e0_local,
        bound_deg: angle_bound_deg(e0, length),
        width_ratio: tr.width_sum / length,
        diverged,
    })
}

fn analyze_world(
    canvas: &DeepCanvas,
    eye: DVec3,
    dir: DVec3,
    opts: &TraceOptions,
) -> Result<RaySample, bool> {
    let tr = trace_world(canvas, eye, dir, opts).map_err(|_| false)?;
    if matches!(tr.outcome, Outcome::Aborted(_)) {
        return Err(true);
    }
    let d = tr.d.as_dvec3();
    let e0 = (tr.start.as_vec3().as_dvec3() - tr.start).length();
    let v = tr.end.as_dvec3() - eye;
    let length = v.length();
    let w0 = canvas.cell_width(tr.start_cell);
    Ok(RaySample {
        length,
        crossed: tr.crossed,
        angle_deg: angle_deg(d, v),
        position_error: d.cross(v).length(),
        e0,
        e0_local: e0 / w0,
        bound_deg: angle_bound_deg(e0, length),
        width_ratio: f64::NAN,
        diverged: false,
    })
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn make_bins(samples: &[RaySample], key: impl Fn(&RaySample) -> i32, label: &str) -> Vec<Bin> {
    let mut groups: std::collections::BTreeMap<i32, Vec<f64>> = Default::default();
    for s in samples {
        groups.entry(key(s)).or_default().push(s.angle_deg);
    }
    groups
        .into_iter()
        .map(|(k, mut v)| {
            v.sort_by(f64::total_cmp);
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            Bin {
                bin_key: format!("{label}:[2^{k},2^{})", k + 1),
                count: v.len(),
                max_deg: *v.last().unwrap(),
                p99_deg: percentile(&v, 0.99),
                mean_deg: mean,
            }
        })
        .collect()
}

/// Casts `n_rays` rays through uniformly random image positions (seeded)
/// and measures each against the error bound.
pub fn analyze_precision(
    canvas: &DeepCanvas,
    camera: &Camera,
    n_rays: usize,
    seed: u64,
    mode: TraversalMode,
) -> ErrorReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs: Vec<DVec3> = (0..n_rays)
        .map(|_| {
            let x = rng.gen::<f64>() * camera.width as f64;
            let y = rng.gen::<f64>() * camera.height as f64;
            camera.direction(x, y)
        })
        .collect();
    let opts = TraceOptions::default();
    let results: Vec<Result<RaySample, bool>> = dirs
        .par_iter()
        .map(|&dir| match mode {
            TraversalMode::Local => analyze_local(canvas, camera.eye, dir, &opts),
            TraversalMode::World => analyze_world(canvas, camera.eye, dir, &opts),
        })
        .collect();
    let mut samples = Vec::with_capacity(n_rays);
    let mut missed = 0;
    let mut aborted = 0;
    for r in results {
        match r {
            Ok(s) => samples.push(s),
            Err(true) => aborted += 1,
            Err(false) => missed += 1,
        }
    }
    ErrorReport::from_samples(mode, n_rays, missed, aborted, samples)
}

impl ErrorReport {
    pub fn from_samples(
        mode: TraversalMode,
        requested: usize,
        missed: usize,
        aborted: usize,
        samples: Vec<RaySample>,
    ) -> Self {
        let max = |f: fn(&RaySample) -> f64| samples.iter().map(f).fold(0.0, f64::max);
        let ratios: Vec<f64> = samples
            .iter()
            .map(|s| s.width_ratio)
            .filter(|r| r.is_finite())
            .collect();
        let mean_width_ratio = if ratios.is_empty() {
            f64::NAN
        } else {
            ratios.iter().sum::<f64>() / ratios.len() as f64
        };
        ErrorReport {
            mode,
            requested,
            analyzed: samples.len(),
            missed,
            aborted,
            max_angle_deg: max(|s| s.angle_deg),
            max_e0_local: max(|s| s.e0_local),
            max_position_error: max(|s| s.position_error),
            angle_violations: samples
                .iter()
                .filter(|s| exceeds(s.angle_deg, s.bound_deg))
                .count(),
            position_violations: samples
                .iter()
                .filter(|s| exceeds(s.position_error, s.e0 + 7.5 * EPSILON * s.length))
                .count(),
            diverged_rays: samples.iter().filter(|s| s.diverged).count(),
            min_crossed: samples.iter().map(|s| s.crossed).min().unwrap_or(0),
            mean_width_ratio,
            max_width_ratio: ratios.iter().copied().fold(f64::NAN, f64::max),
            by_length: make_bins(&samples, |s| s.length.log2().floor() as i32, "L"),
            by_cells: make_bins(&samples, |s| (s.crossed as f64).log2().floor() as i32, "n"),
            samples,
        }
    }

    /// Bins with at least `min_count` rays.
    pub fn populated(bins: &[Bin], min_count: usize) -> Vec<&Bin> {
        bins.iter().filter(|b| b.count >= min_count).collect()
    }

    /// p99 never rises by more than `slack` from one populated cell-count
    /// bin to the next, ignoring the first bin.
    pub fn cells_trend_ok(&self, min_count: usize, slack: f64) -> bool {
        let bins = Self::populated(&self.by_cells, min_count);
        bins.iter()
            .skip(1)
            .zip(bins.iter().skip(2))
            .all(|(a, b)| b.p99_deg <= slack * a.p99_deg)
    }

    /// The shortest populated length bin has at least the error of the
    /// longest one.
    pub fn length_trend_ok(&self, min_count: usize) -> bool {
        let bins = Self::populated(&self.by_length, min_count);
        match (bins.first(), bins.last()) {
            (Some(a), Some(b)) => a.p99_deg >= b.p99_deg,
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_limit_for_long_rays() {
        let deg = angle_bound_deg(0.0, 1.0);
        let rad = deg.to_radians();
        assert!((rad - 1.2645e-6).abs() < 1e-9, "{rad}");
        assert!((deg - 7.245e-5).abs() < 1e-7, "{deg}");
    }

    #[test]
    fn percentile_nearest_rank() {
        let v: Vec<f64> = (1..=100).map(|x| x as f64).collect();
        assert_eq!(percentile(&v, 0.99), 99.0);
        assert_eq!(percentile(&v[..1], 0.99), 1.0);
    }
}
