use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use canvox_core::io::{encode_snapshot, load_snapshot, save_snapshot};
use canvox_core::raycast::{cast_ray, Camera, Image, TraceOptions};
use canvox_core::{CanvasConfig, DeepCanvas};
use glam::DVec3;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

// Recorded from the first verified replay of scripts/teaser.jsonl; the core
// golden test pins the same values.
const TEASER_CELLS: u32 = 1_829_544;
const STUDIO_SHA256: &str = "bbc80723f1b0214924fd6dac77b96bcb4be37d48e874f8b5960bc92064309c4d";
const GARDEN_SHA256: &str = "c40996a248c0a2cbb3b9864084dca0f8038390515373ff4493d7db98fe374b0c";

fn canvox(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_canvox"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn teaser() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scripts/teaser.jsonl")
}

/// RGB8 bytes and size of a PNG file.
fn decode_png(path: &Path) -> (Vec<u8>, u32, u32) {
    let decoder = png::Decoder::new(fs::File::open(path).unwrap());
    let mut reader = decoder.read_info().unwrap();
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).unwrap();
    assert_eq!(info.color_type, png::ColorType::Rgb);
    buf.truncate(info.buffer_size());
    (buf, info.width, info.height)
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[test]
fn empty_script_gives_fresh_canvas() {
    let dir = TempDir::new().unwrap();
    let script = dir.path().join("empty.jsonl");
    fs::write(&script, "").unwrap();
    let out = dir.path().join("out.cvox");
    let o = canvox(&["replay", p(&script), "-o", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("cells 64"));
    let fresh = DeepCanvas::new(CanvasConfig::default()).unwrap();
    assert_eq!(fs::read(&out).unwrap(), encode_snapshot(&fresh, true));
}

#[test]
fn teaser_replay_is_deterministic_and_renders_goldens() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.cvox");
    let b = dir.path().join("b.cvox");
    for out in [&a, &b] {
        let o = canvox(&["replay", p(&teaser()), "-o", p(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(
            stdout(&o).contains(&format!("cells {TEASER_CELLS}\n")),
            "{}",
            stdout(&o)
        );
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let mut hashes = Vec::new();
    for room in ["studio", "garden"] {
        let img = dir.path().join(format!("{room}.png"));
        let o = canvox(&[
            "render",
            p(&a),
            "-o",
            p(&img),
            "--room",
            room,
            "--fov",
            "50",
            "--size",
            "256x256",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let (rgb, w, h) = decode_png(&img);
        assert_eq!((w, h), (256, 256));
        hashes.push(sha256_hex(&rgb));
    }
    assert_eq!(hashes, [STUDIO_SHA256, GARDEN_SHA256]);
}

#[test]
fn unknown_room_lists_available() {
    let dir = TempDir::new().unwrap();
    let snap = dir.path().join("r.cvox");
    let mut c = DeepCanvas::new(CanvasConfig::default()).unwrap();
    c.define_room(canvox_core::paint::Room::new(
        "attic", [0.0; 3], [4.0; 3], 1.0,
    ))
    .unwrap();
    c.define_room(canvox_core::paint::Room::new(
        "cellar", [-9.0; 3], [-5.0; 3], 1.0,
    ))
    .unwrap();
    save_snapshot(&c, &snap).unwrap();
    let img = dir.path().join("x.png");
    let o = canvox(&["render", p(&snap), "-o", p(&img), "--room", "kitchen"]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(
        err.contains("kitchen") && err.contains("attic") && err.contains("cellar"),
        "{err}"
    );
    assert!(!img.exists());
}

#[test]
fn one_pixel_render_matches_cast_ray() {
    let dir = TempDir::new().unwrap();
    let snap = dir.path().join("s.cvox");
    let mut c = DeepCanvas::new(CanvasConfig::default()).unwrap();
    let mut painter = canvox_core::paint::Painter::new();
    let stamp = canvox_core::paint::Stamp::new(
        canvox_core::paint::StampGeom::sphere(DVec3::new(0.3, 0.2, -0.1), 0.5),
        canvox_core::Rgba::new(0.9, 0.3, 0.1, 0.7),
        canvox_core::paint::BrushMode::Paint,
        &c,
    );
    painter.apply_stamp(&mut c, stamp);
    painter.drain(&mut c);
    save_snapshot(&c, &snap).unwrap();

    let img = dir.path().join("px.png");
    let o = canvox(&[
        "render",
        p(&snap),
        "-o",
        p(&img),
        "--eye",
        "0,0.1,3",
        "--look",
        "0.3,0.2,-0.1",
        "--size",
        "1x1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (rgb, w, h) = decode_png(&img);
    assert_eq!((w, h), (1, 1));

    let cam = Camera::look_at(
        DVec3::new(0.0, 0.1, 3.0),
        DVec3::new(0.3, 0.2, -0.1),
        DVec3::Y,
        50f64.to_radians(),
        1,
        1,
    )
    .unwrap();
    let (px, _) = cast_ray(&c, &cam, 0, 0, &TraceOptions::default());
    let expect = Image {
        width: 1,
        height: 1,
        pixels: vec![px],
        aborted: 0,
    }
    .to_rgb8();
    assert_eq!(rgb, expect);
    // The stamp is in view, so the pixel is not the background.
    let bg = Image {
        width: 1,
        height: 1,
        pixels: vec![c.config().background_rgba.rgb()],
        aborted: 0,
    }
    .to_rgb8();
    assert_ne!(rgb, bg);
}

#[test]
fn parse_error_exits_nonzero_and_keeps_partial_on_request() {
    let dir = TempDir::new().unwrap();
    let script = dir.path().join("bad.jsonl");
    fs::write(
        &script,
        concat!(
            "{\"type\":\"room\",\"name\":\"box\",\"min\":[0,0,0],\"max\":[2,2,2],\"scale\":1}\n",
            "{\"type\":\"stroke_begin\"}\n",
            "{\"type\":\"sample\",\"pos\":[1,1,1],\"pressure\":2,\"zoom\":1}\n",
        ),
    )
    .unwrap();
    let out = dir.path().join("out.cvox");
    let o = canvox(&["replay", p(&script), "-o", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    assert!(!out.exists());

    let o = canvox(&["replay", p(&script), "-o", p(&out), "--keep-partial"]);
    assert_eq!(o.status.code(), Some(2));
    let c = load_snapshot(&out).unwrap();
    assert!(c.room("box").is_some());
}

#[test]
fn pool_exhaustion_exits_nonzero() {
    let dir = TempDir::new().unwrap();
    let base = dir.path().join("tiny.cvox");
    let cfg = CanvasConfig {
        root_count_per_axis: 1,
        root_size: 8.0,
        max_depth: 10,
        capacity: 200,
        ..Default::default()
    };
    save_snapshot(&DeepCanvas::new(cfg).unwrap(), &base).unwrap();
    let before = fs::read(&base).unwrap();
    let script = dir.path().join("s.jsonl");
    fs::write(
        &script,
        concat!(
            "{\"type\":\"brush\",\"brush\":{\"radius\":0.05,\"rgba\":[1,0,0,1]}}\n",
            "{\"type\":\"stroke_begin\"}\n",
            "{\"type\":\"sample\",\"pos\":[0.5,0.5,0.5],\"pressure\":1,\"zoom\":1}\n",
            "{\"type\":\"stroke_end\"}\n",
        ),
    )
    .unwrap();
    let out = dir.path().join("out.cvox");
    let o = canvox(&["replay", p(&script), "-o", p(&out), "--from", p(&base)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("exhausted"));
    assert!(!out.exists());
    let o = canvox(&[
        "replay",
        p(&script),
        "-o",
        p(&out),
        "--from",
        p(&base),
        "--keep-partial",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(load_snapshot(&out).unwrap().cell_count() > 1);
    assert_eq!(fs::read(&base).unwrap(), before);
}

#[test]
fn replay_refuses_to_overwrite_its_input() {
    let dir = TempDir::new().unwrap();
    let base = dir.path().join("base.cvox");
    save_snapshot(&DeepCanvas::new(CanvasConfig::default()).unwrap(), &base).unwrap();
    let before = fs::read(&base).unwrap();
    let script = dir.path().join("s.jsonl");
    fs::write(
        &script,
        "{\"type\":\"room\",\"name\":\"r\",\"min\":[0,0,0],\"max\":[1,1,1],\"scale\":1}\n",
    )
    .unwrap();
    let o = canvox(&["replay", p(&script), "-o", p(&base), "--from", p(&base)]);
    assert!(!o.status.success());
    assert_eq!(fs::read(&base).unwrap(), before);
}

#[test]
fn analyze_zero_rays_gives_empty_report() {
    let dir = TempDir::new().unwrap();
    let snap = dir.path().join("e.cvox");
    save_snapshot(&DeepCanvas::new(CanvasConfig::default()).unwrap(), &snap).unwrap();
    let report = dir.path().join("r.json");
    let o = canvox(&["analyze", p(&snap), "--rays", "0", "-o", p(&report)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    for mode in ["local", "world"] {
        assert_eq!(v[mode]["requested"], 0);
        assert_eq!(v[mode]["analyzed"], 0);
        assert_eq!(v[mode]["by_cells"].as_array().unwrap().len(), 0);
    }
    assert_eq!(v["bound_violations"], 0);
}

#[test]
fn deep_scene_local_clean_world_violates() {
    let dir = TempDir::new().unwrap();
    let snap = dir.path().join("deep.cvox");
    let o = canvox(&["scene", "-o", p(&snap)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = dir.path().join("r.json");
    let csv = dir.path().join("local.csv");
    let o = canvox(&[
        "analyze",
        p(&snap),
        "--rays",
        "4000",
        "--world-rays",
        "500",
        "-o",
        p(&report),
        "--scatter",
        p(&csv),
    ]);
    // World-mode violations are reported, not an error exit.
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    assert_eq!(v["local"]["analyzed"], 4000);
    assert_eq!(v["local"]["angle_violations"], 0);
    assert_eq!(v["bound_violations"], 0);
    assert!(v["world"]["angle_violations"].as_u64().unwrap() > 0);
    assert!(v["local"]["max_angle_deg"].as_f64().unwrap() <= 1e-6);
    let rows = fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().count(), 4001);
}

#[test]
fn thread_cap_keeps_output_identical() {
    let dir = TempDir::new().unwrap();
    let snap = dir.path().join("s.cvox");
    let mut c = DeepCanvas::new(CanvasConfig::default()).unwrap();
    let mut painter = canvox_core::paint::Painter::new();
    let stamp = canvox_core::paint::Stamp::new(
        canvox_core::paint::StampGeom::sphere(DVec3::ZERO, 1.0),
        canvox_core::Rgba::new(0.1, 0.8, 0.3, 0.5),
        canvox_core::paint::BrushMode::Paint,
        &c,
    );
    painter.apply_stamp(&mut c, stamp);
    painter.drain(&mut c);
    save_snapshot(&c, &snap).unwrap();
    let args = |out: &Path| {
        vec![
            "render".to_string(),
            p(&snap).into(),
            "-o".into(),
            p(out).into(),
            "--eye".into(),
            "2,1,4".into(),
            "--look".into(),
            "0,0,0".into(),
            "--size".into(),
            "48x32".into(),
        ]
    };
    let a = dir.path().join("a.ppm");
    let b = dir.path().join("b.ppm");
    let o = Command::new(env!("CARGO_BIN_EXE_canvox"))
        .args(args(&a))
        .output()
        .unwrap();
    assert!(o.status.success());
    let o = Command::new(env!("CARGO_BIN_EXE_canvox"))
        .args(args(&b))
        .env("CANVOX_THREADS", "1")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let o = Command::new(env!("CARGO_BIN_EXE_canvox"))
        .args(args(&b))
        .env("CANVOX_THREADS", "zero")
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(stderr(&o).contains("CANVOX_THREADS"));
}
