//! Subcommands of the `canvox` binary.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use canvox_core::io::{
    apply_event, finish_replay, load_snapshot, parse_script, save_snapshot, write_image,
    write_report_json, write_scatter_csv, ReplayError, ReplayStats, ScriptError,
};
use canvox_core::paint::Painter;
use canvox_core::raycast::{
    analyze_precision, render_image, Camera, ErrorReport, TraceOptions, TraversalMode,
};
use canvox_core::scene::{precision_scene, SceneParams};
use canvox_core::{CanvasConfig, CanvasError, DeepCanvas};
use clap::{Args, Parser, Subcommand};
use glam::DVec3;
use serde::Serialize;

use crate::service::{ServeOptions, Server};

/// Exit status for a script that fails to parse.
pub const EXIT_PARSE: u8 = 2;
/// Exit status when the cell pool runs out during a replay.
pub const EXIT_POOL_EXHAUSTED: u8 = 3;
/// Exit status when a cell-local ray breaks the error bound.
pub const EXIT_BOUND_VIOLATED: u8 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "canvox",
    version,
    about = "Paint, render and analyze deep octree canvases"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Apply a JSON-lines stroke script and save the resulting canvas.
    Replay(ReplayArgs),
    /// Render a snapshot to a PNG or PPM image.
    Render(RenderArgs),
    /// Measure ray traversal precision in cell-local and world coordinates.
    Analyze(AnalyzeArgs),
    /// Run the interactive WebSocket paint service.
    Serve(ServeArgs),
    /// Generate the deep test scene used by `analyze`.
    Scene(SceneArgs),
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    pub script: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
    /// Start from this snapshot instead of an empty canvas.
    #[arg(long)]
    pub from: Option<PathBuf>,
    /// Save whatever was painted even if the replay fails.
    #[arg(long)]
    pub keep_partial: bool,
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    pub snapshot: PathBuf,
    /// Output image; `.ppm` writes binary PPM, anything else PNG.
    #[arg(short, long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub camera: CameraArgs,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    pub snapshot: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    pub rays: usize,
    /// Rays for the world-coordinate pass (defaults to `--rays`).
    #[arg(long)]
    pub world_rays: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// JSON report path.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Also write the cell-local per-ray samples as CSV.
    #[arg(long)]
    pub scatter: Option<PathBuf>,
    /// Without camera flags the deep scene's own camera is used.
    #[command(flatten)]
    pub camera: CameraArgs,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    /// Snapshot to start from; an empty canvas otherwise.
    pub snapshot: Option<PathBuf>,
    #[arg(long, default_value_t = 8765)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Directory that `save` requests write into.
    #[arg(long, default_value = ".")]
    pub save_dir: PathBuf,
    /// Adjustment frame rate.
    #[arg(long, default_value_t = 30.0)]
    pub tick_hz: f64,
}

#[derive(Args, Debug)]
pub struct SceneArgs {
    #[arg(short, long)]
    pub out: PathBuf,
    /// Minimum depth inside the view cone.
    #[arg(long)]
    pub floor_depth: Option<u32>,
    /// Distance from the eye beyond which the scene is opaque, meters.
    #[arg(long)]
    pub far: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
pub struct CameraArgs {
    /// Eye position `x,y,z`.
    #[arg(long, allow_hyphen_values = true)]
    pub eye: Option<Vec3Arg>,
    /// Point looked at, `x,y,z`.
    #[arg(long, allow_hyphen_values = true)]
    pub look: Option<Vec3Arg>,
    #[arg(long, allow_hyphen_values = true, default_value = "0,1,0")]
    pub up: Vec3Arg,
    /// Vertical field of view in degrees.
    #[arg(long, default_value_t = 50.0)]
    pub fov: f64,
    #[arg(long, default_value = "256x256")]
    pub size: SizeArg,
    /// Frame a named room instead of using `--eye`/`--look`.
    #[arg(long, conflicts_with_all = ["eye", "look"])]
    pub room: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vec3Arg(pub DVec3);

impl FromStr for Vec3Arg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let v: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}")))
            .collect::<Result<_, _>>()?;
        match v[..] {
            [x, y, z] if v.iter().all(|c| c.is_finite()) => Ok(Vec3Arg(DVec3::new(x, y, z))),
            _ => Err(format!("expected three finite numbers x,y,z, got '{s}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SizeArg(pub u32, pub u32);

impl FromStr for SizeArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (w, h) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected WxH, got '{s}'"))?;
        let w: u32 = w.trim().parse().map_err(|e| format!("width: {e}"))?;
        let h: u32 = h.trim().parse().map_err(|e| format!("height: {e}"))?;
        if w == 0 || h == 0 {
            return Err("image size must be at least 1x1".into());
        }
        Ok(SizeArg(w, h))
    }
}

impl CameraArgs {
    fn is_set(&self) -> bool {
        self.eye.is_some() || self.look.is_some() || self.room.is_some()
    }

    pub fn build(&self, canvas: &DeepCanvas) -> Result<Camera> {
        let SizeArg(w, h) = self.size;
        let fov = self.fov.to_radians();
        if let Some(name) = &self.room {
            let room = canvas.room(name).ok_or_else(|| {
                let names: Vec<&str> = canvas.rooms().iter().map(|r| r.name.as_str()).collect();
                if names.is_empty() {
                    anyhow!("unknown room '{name}': the snapshot defines no rooms")
                } else {
                    anyhow!(
                        "unknown room '{name}'; available rooms: {}",
                        names.join(", ")
                    )
                }
            })?;
            return Ok(Camera::room_view(room, fov, w, h)?);
        }
        match (self.eye, self.look) {
            (Some(eye), Some(look)) => Ok(Camera::look_at(eye.0, look.0, self.up.0, fov, w, h)?),
            _ => bail!("give --room NAME, or both --eye and --look"),
        }
    }
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Replay(a) => replay(a),
        Command::Render(a) => render(a),
        Command::Analyze(a) => analyze(a),
        Command::Serve(a) => serve(a),
        Command::Scene(a) => scene(a),
    }
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

enum ReplayFailure {
    Parse(ScriptError),
    Replay(ReplayError),
}

fn replay(a: ReplayArgs) -> Result<ExitCode> {
    if let Some(from) = &a.from {
        if same_file(from, &a.out) {
            bail!(
                "output would overwrite the input snapshot {}",
                from.display()
            );
        }
    }
    let file = File::open(&a.script).with_context(|| format!("opening {}", a.script.display()))?;
    let mut canvas = match &a.from {
        Some(p) => load_snapshot(p).with_context(|| format!("loading {}", p.display()))?,
        None => DeepCanvas::new(CanvasConfig::default())?,
    };
    let mut painter = Painter::new();
    let mut stats = ReplayStats::default();
    let t0 = Instant::now();
    let result = (|| {
        for event in parse_script(BufReader::new(file)) {
            let event = event.map_err(ReplayFailure::Parse)?;
            apply_event(&mut canvas, &mut painter, &event, &mut stats)
                .map_err(ReplayFailure::Replay)?;
        }
        finish_replay(&mut canvas, &mut painter, &mut stats).map_err(ReplayFailure::Replay)
    })();
    let secs = t0.elapsed().as_secs_f64();

    let (code, failure) = match result {
        Err(ReplayFailure::Parse(e)) => (EXIT_PARSE, Some(format!("{}: {e}", a.script.display()))),
        Err(ReplayFailure::Replay(e)) => {
            let exhausted = matches!(
                &e,
                ReplayError::Canvas {
                    source: CanvasError::PoolExhausted { .. },
                    ..
                }
            );
            (
                if exhausted { EXIT_POOL_EXHAUSTED } else { 1 },
                Some(e.to_string()),
            )
        }
        Ok(()) if stats.exhausted => (
            EXIT_POOL_EXHAUSTED,
            Some(format!(
                "cell pool exhausted (capacity {} cells)",
                canvas.config().capacity
            )),
        ),
        Ok(()) => (0, None),
    };
    println!("events {}", stats.events);
    println!("cells {}", canvas.cell_count());
    println!("pool {:.3}%", canvas.pool_occupancy_pct());
    println!("time {secs:.3} s");
    if let Some(msg) = &failure {
        eprintln!("error: {msg}");
        if !a.keep_partial {
            return Ok(ExitCode::from(code));
        }
        eprintln!("keeping partial canvas in {}", a.out.display());
    }
    save_snapshot(&canvas, &a.out).with_context(|| format!("saving {}", a.out.display()))?;
    Ok(ExitCode::from(code))
}

fn render(a: RenderArgs) -> Result<ExitCode> {
    let canvas =
        load_snapshot(&a.snapshot).with_context(|| format!("loading {}", a.snapshot.display()))?;
    let camera = a.camera.build(&canvas)?;
    let t0 = Instant::now();
    let img = render_image(&canvas, &camera, &TraceOptions::default());
    write_image(&img, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "{}x{} in {:.3} s",
        img.width,
        img.height,
        t0.elapsed().as_secs_f64()
    );
    if img.aborted > 0 {
        eprintln!(
            "warning: {} rays aborted and show the background",
            img.aborted
        );
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct AnalysisReport {
    seed: u64,
    eye: [f64; 3],
    forward: [f64; 3],
    fov_deg: f64,
    size: [u32; 2],
    /// Cell-local rays breaking the angle or position bound.
    bound_violations: usize,
    local: ErrorReport,
    world: ErrorReport,
}

fn summary(r: &ErrorReport) -> String {
    format!(
        "{:?}: {} of {} rays, max angle {:.3e} deg, {} angle / {} position violations",
        r.mode, r.analyzed, r.requested, r.max_angle_deg, r.angle_violations, r.position_violations
    )
}

fn analyze(a: AnalyzeArgs) -> Result<ExitCode> {
    let canvas =
        load_snapshot(&a.snapshot).with_context(|| format!("loading {}", a.snapshot.display()))?;
    let camera = if a.camera.is_set() {
        a.camera.build(&canvas)?
    } else {
        SceneParams::default().camera()?
    };
    let t0 = Instant::now();
    let mut local = analyze_precision(&canvas, &camera, a.rays, a.seed, TraversalMode::Local);
    println!("{} ({:.1} s)", summary(&local), t0.elapsed().as_secs_f64());
    let t0 = Instant::now();
    let mut world = analyze_precision(
        &canvas,
        &camera,
        a.world_rays.unwrap_or(a.rays),
        a.seed,
        TraversalMode::World,
    );
    println!("{} ({:.1} s)", summary(&world), t0.elapsed().as_secs_f64());
    if let Some(p) = &a.scatter {
        write_scatter_csv(&local, p).with_context(|| format!("writing {}", p.display()))?;
    }
    local.samples.clear();
    world.samples.clear();
    let bound_violations = local.angle_violations + local.position_violations;
    let report = AnalysisReport {
        seed: a.seed,
        eye: camera.eye.to_array(),
        forward: camera.forward.to_array(),
        fov_deg: camera.fov_y.to_degrees(),
        size: [camera.width, camera.height],
        bound_violations,
        local,
        world,
    };
    write_report_json(&report, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    if bound_violations > 0 {
        eprintln!("error: {bound_violations} cell-local rays exceed the error bound");
        return Ok(ExitCode::from(EXIT_BOUND_VIOLATED));
    }
    Ok(ExitCode::SUCCESS)
}

fn serve(a: ServeArgs) -> Result<ExitCode> {
    let canvas = match &a.snapshot {
        Some(p) => load_snapshot(p).with_context(|| format!("loading {}", p.display()))?,
        None => DeepCanvas::new(CanvasConfig::default())?,
    };
    if !(a.tick_hz.is_finite() && a.tick_hz > 0.0) {
        bail!("--tick-hz must be positive");
    }
    let opts = ServeOptions {
        tick_hz: a.tick_hz,
        save_dir: a.save_dir,
        ..Default::default()
    };
    let server = Server::bind((a.host.as_str(), a.port), canvas, opts)
        .with_context(|| format!("binding {}:{}", a.host, a.port))?;
    println!("listening on ws://{}", server.local_addr()?);
    server.run()?;
    Ok(ExitCode::SUCCESS)
}

fn scene(a: SceneArgs) -> Result<ExitCode> {
    let mut params = SceneParams::default();
    if let Some(d) = a.floor_depth {
        params.floor_depth = d;
    }
    if let Some(f) = a.far {
        params.far = f;
    }
    if let Some(s) = a.seed {
        params.seed = s;
    }
    let t0 = Instant::now();
    let scene = precision_scene(&params)?;
    save_snapshot(&scene.canvas, &a.out).with_context(|| format!("saving {}", a.out.display()))?;
    let cam = scene.camera;
    let v = |d: DVec3| format!("{},{},{}", d.x, d.y, d.z);
    println!("cells {}", scene.canvas.cell_count());
    println!("time {:.3} s", t0.elapsed().as_secs_f64());
    println!(
        "camera --eye {} --look {} --fov {} --size {}x{}",
        v(cam.eye),
        v(cam.eye + cam.forward),
        cam.fov_y.to_degrees(),
        cam.width,
        cam.height
    );
    Ok(ExitCode::SUCCESS)
}
