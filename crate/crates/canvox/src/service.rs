//! Interactive paint service. One engine thread owns the canvas and ticks
//! the adjustment queue at a fixed rate; each client gets an I/O thread
//! that forwards parsed messages to the engine in arrival order and writes
//! whatever the engine queues for it.

use std::collections::BTreeMap;
use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use canvox_core::io::{encode_png, save_snapshot};
use canvox_core::paint::{Brush, Painter, StrokeSample};
use canvox_core::raycast::{render_image, Camera, TraceOptions};
use canvox_core::DeepCanvas;
use glam::DVec3;
use tungstenite::{Message, WebSocket};

use crate::protocol::{ClientMsg, ErrorCode, ServerMsg};

/// Largest frame a client may ask for, in pixels.
pub const MAX_FRAME_PIXELS: u32 = 2048 * 2048;
const POLL: Duration = Duration::from_millis(5);

#[derive(Clone, Debug)]
pub struct ServeOptions {
    /// Adjustment frames per second.
    pub tick_hz: f64,
    /// Relative `save` paths resolve under this directory.
    pub save_dir: PathBuf,
    pub trace: TraceOptions,
}

impl Default for ServeOptions {
    fn default() -> Self {
        ServeOptions {
            tick_hz: 30.0,
            save_dir: PathBuf::from("."),
            trace: TraceOptions::default(),
        }
    }
}

/// Camera a client sees before it sends `set_camera` or `teleport`.
pub fn default_camera(canvas: &DeepCanvas) -> Camera {
    if let Some(room) = canvas.rooms().first() {
        if let Ok(cam) = Camera::room_view(room, 50f64.to_radians(), 256, 256) {
            return cam;
        }
    }
    Camera::look_at(
        DVec3::new(0.0, 2.0, 8.0),
        DVec3::ZERO,
        DVec3::Y,
        50f64.to_radians(),
        256,
        256,
    )
    .expect("default camera is valid")
}

enum Inbound {
    Connect {
        id: u64,
        tx: Sender<Outbound>,
        in_flight: Arc<AtomicUsize>,
    },
    Message {
        id: u64,
        msg: ClientMsg,
    },
    Disconnect {
        id: u64,
    },
}

enum Outbound {
    Text(String),
    /// A frame image; clears the client's in-flight slot once written.
    Frame(Vec<u8>),
}

pub struct Server {
    listener: TcpListener,
    canvas: DeepCanvas,
    opts: ServeOptions,
}

pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept: JoinHandle<()>,
    engine: JoinHandle<DeepCanvas>,
}

impl Server {
    pub fn bind(
        addr: impl ToSocketAddrs,
        canvas: DeepCanvas,
        opts: ServeOptions,
    ) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        Ok(Server {
            listener,
            canvas,
            opts,
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Starts the engine and accept loop in background threads.
    pub fn spawn(self) -> io::Result<ServerHandle> {
        let addr = self.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let (tx, rx) = mpsc::channel();
        let engine = {
            let stop = stop.clone();
            let session = Session::new(self.canvas, self.opts);
            thread::Builder::new()
                .name("canvox-engine".into())
                .spawn(move || session.run(rx, &stop))?
        };
        let accept = {
            let stop = stop.clone();
            let listener = self.listener;
            thread::Builder::new()
                .name("canvox-accept".into())
                .spawn(move || accept_loop(listener, tx, &stop))?
        };
        Ok(ServerHandle {
            addr,
            stop,
            accept,
            engine,
        })
    }

    /// Serves until the process is killed.
    pub fn run(self) -> io::Result<()> {
        let h = self.spawn()?;
        let _ = h.accept.join();
        let _ = h.engine.join();
        Ok(())
    }
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting, disconnects clients and returns the canvas.
    pub fn shutdown(self) -> DeepCanvas {
        self.stop.store(true, Ordering::SeqCst);
        let _ = self.accept.join();
        self.engine.join().expect("engine thread panicked")
    }
}

fn accept_loop(listener: TcpListener, inbound: Sender<Inbound>, stop: &Arc<AtomicBool>) {
    let mut next_id = 0u64;
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, _)) => {
                next_id += 1;
                let id = next_id;
                let inbound = inbound.clone();
                let stop = stop.clone();
                let _ = thread::Builder::new()
                    .name(format!("canvox-client-{id}"))
                    .spawn(move || client_io(stream, id, inbound, &stop));
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(POLL),
            Err(_) => thread::sleep(POLL),
        }
    }
}

fn client_io(stream: TcpStream, id: u64, inbound: Sender<Inbound>, stop: &AtomicBool) {
    if stream.set_nonblocking(false).is_err() {
        return;
    }
    let Ok(mut ws) = tungstenite::accept(stream) else {
        return;
    };
    if ws.get_ref().set_read_timeout(Some(POLL)).is_err() {
        return;
    }
    let (tx, rx) = mpsc::channel();
    let in_flight = Arc::new(AtomicUsize::new(0));
    if inbound
        .send(Inbound::Connect {
            id,
            tx,
            in_flight: in_flight.clone(),
        })
        .is_err()
    {
        return;
    }
    serve_client(&mut ws, id, &inbound, &rx, &in_flight, stop);
    let _ = inbound.send(Inbound::Disconnect { id });
}

fn serve_client(
    ws: &mut WebSocket<TcpStream>,
    id: u64,
    inbound: &Sender<Inbound>,
    outbound: &Receiver<Outbound>,
    in_flight: &AtomicUsize,
    stop: &AtomicBool,
) {
    loop {
        if stop.load(Ordering::SeqCst) {
            let _ = ws.close(None);
            let _ = ws.flush();
            return;
        }
        while let Ok(out) = outbound.try_recv() {
            let sent = match out {
                Outbound::Text(t) => ws.send(Message::Text(t)),
                Outbound::Frame(png) => {
                    let r = ws.send(Message::Binary(png));
                    in_flight.fetch_sub(1, Ordering::SeqCst);
                    r
                }
            };
            if sent.is_err() {
                return;
            }
        }
        match ws.read() {
            Ok(Message::Text(text)) => match ClientMsg::parse(&text) {
                Ok(msg) => {
                    if inbound.send(Inbound::Message { id, msg }).is_err() {
                        return;
                    }
                }
                Err(e) => return protocol_violation(ws, &format!("bad message: {e}")),
            },
            Ok(Message::Binary(_)) => {
                return protocol_violation(ws, "binary messages are not accepted")
            }
            Ok(Message::Close(_)) => {
                let _ = ws.flush();
                return;
            }
            Ok(_) => {}
            Err(tungstenite::Error::Io(e))
                if matches!(
                    e.kind(),
                    io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut
                ) =>
            {
                if ws.flush().is_err() {
                    return;
                }
            }
            Err(_) => return,
        }
    }
}

fn protocol_violation(ws: &mut WebSocket<TcpStream>, msg: &str) {
    let _ = ws.send(Message::Text(
        ServerMsg::error(ErrorCode::Protocol, msg).to_json(),
    ));
    let _ = ws.close(None);
    // Let the close handshake go out before the socket drops.
    let deadline = Instant::now() + Duration::from_millis(200);
    while Instant::now() < deadline {
        match ws.read() {
            Err(tungstenite::Error::Io(e))
                if matches!(
                    e.kind(),
                    io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut
                ) => {}
            Err(_) => return,
            Ok(_) => {}
        }
    }
}

struct Client {
    tx: Sender<Outbound>,
    in_flight: Arc<AtomicUsize>,
    camera: Camera,
    brush: Brush,
    /// Canvas version of the last frame sent, `None` before the first.
    shown: Option<u64>,
    camera_changed: bool,
    samples: u64,
    last_seq: u64,
    reported_seq: Option<u64>,
}

impl Client {
    fn send(&self, msg: &ServerMsg) {
        let _ = self.tx.send(Outbound::Text(msg.to_json()));
    }
}

struct Session {
    canvas: DeepCanvas,
    painter: Painter,
    clients: BTreeMap<u64, Client>,
    stroke_owner: Option<u64>,
    /// Bumped on every change that can alter a rendered frame.
    version: u64,
    frame_seq: u64,
    started: Instant,
    exhausted_reported: bool,
    opts: ServeOptions,
}

impl Session {
    fn new(canvas: DeepCanvas, opts: ServeOptions) -> Self {
        Session {
            canvas,
            painter: Painter::new(),
            clients: BTreeMap::new(),
            stroke_owner: None,
            version: 0,
            frame_seq: 0,
            started: Instant::now(),
            exhausted_reported: false,
            opts,
        }
    }

    fn run(mut self, rx: Receiver<Inbound>, stop: &AtomicBool) -> DeepCanvas {
        let period = Duration::from_secs_f64(1.0 / self.opts.tick_hz.max(1e-3));
        let mut next_tick = Instant::now() + period;
        while !stop.load(Ordering::SeqCst) {
            let now = Instant::now();
            if now >= next_tick {
                self.tick();
                next_tick = (next_tick + period).max(Instant::now());
                continue;
            }
            match rx.recv_timeout((next_tick - now).min(Duration::from_millis(50))) {
                Ok(m) => self.handle(m),
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => break,
            }
        }
        if self.painter.in_stroke() {
            let _ = self.painter.end_stroke(&mut self.canvas);
        }
        self.canvas
    }

    fn hello(&self) -> ServerMsg {
        ServerMsg::Hello {
            config: self.canvas.config().clone(),
            rooms: self.canvas.rooms().to_vec(),
        }
    }

    fn reply(&self, id: u64, msg: ServerMsg) {
        if let Some(c) = self.clients.get(&id) {
            c.send(&msg);
        }
    }

    fn fail(&self, id: u64, code: ErrorCode, msg: impl Into<String>) {
        self.reply(id, ServerMsg::error(code, msg));
    }

    fn handle(&mut self, m: Inbound) {
        match m {
            Inbound::Connect { id, tx, in_flight } => {
                let client = Client {
                    tx,
                    in_flight,
                    camera: default_camera(&self.canvas),
                    brush: Brush::default(),
                    shown: None,
                    camera_changed: true,
                    samples: 0,
                    last_seq: 0,
                    reported_seq: None,
                };
                client.send(&self.hello());
                self.clients.insert(id, client);
            }
            Inbound::Disconnect { id } => {
                if self.stroke_owner == Some(id) {
                    self.end_stroke();
                }
                self.clients.remove(&id);
            }
            Inbound::Message { id, msg } => {
                if self.clients.contains_key(&id) {
                    self.apply(id, msg);
                }
            }
        }
    }

    fn end_stroke(&mut self) {
        self.stroke_owner = None;
        if let Ok(Some(_)) = self.painter.end_stroke(&mut self.canvas) {
            self.version += 1;
        }
    }

    fn apply(&mut self, id: u64, msg: ClientMsg) {
        match msg {
            ClientMsg::Hello { .. } => self.reply(id, self.hello()),
            ClientMsg::SetBrush { brush } => match brush.validate() {
                Ok(()) => self.clients.get_mut(&id).unwrap().brush = brush,
                Err(e) => self.fail(id, ErrorCode::InvalidBrush, e),
            },
            ClientMsg::StrokeBegin {} => {
                match self.stroke_owner {
                    Some(o) if o != id => {
                        return self.fail(id, ErrorCode::StrokeBusy, "another client is painting");
                    }
                    Some(_) => self.end_stroke(),
                    None => {}
                }
                let brush = self.clients[&id].brush.clone();
                if let Err(e) = self.painter.set_brush(brush) {
                    return self.fail(id, ErrorCode::InvalidBrush, e.to_string());
                }
                self.painter.begin_stroke();
                self.stroke_owner = Some(id);
            }
            ClientMsg::StrokeSample {
                pos,
                pressure,
                zoom,
                seq,
            } => {
                if self.stroke_owner != Some(id) {
                    return self.fail(id, ErrorCode::NoStroke, "stroke_sample outside a stroke");
                }
                let t = self.started.elapsed().as_secs_f64();
                let sample = StrokeSample::new(t, DVec3::from_array(pos), pressure, zoom);
                match self.painter.add_sample(&mut self.canvas, sample) {
                    Ok(painted) => {
                        if painted.is_some() {
                            self.version += 1;
                        }
                        let c = self.clients.get_mut(&id).unwrap();
                        c.samples += 1;
                        c.last_seq = seq.unwrap_or(c.samples);
                    }
                    Err(e) => self.fail(id, ErrorCode::InvalidSample, e.to_string()),
                }
            }
            ClientMsg::StrokeEnd {} => {
                if self.stroke_owner != Some(id) {
                    return self.fail(id, ErrorCode::NoStroke, "stroke_end outside a stroke");
                }
                self.end_stroke();
            }
            ClientMsg::SetCamera {
                eye,
                look,
                up,
                fov,
                size: [w, h],
            } => {
                if w as u64 * h as u64 > MAX_FRAME_PIXELS as u64 {
                    return self.fail(
                        id,
                        ErrorCode::InvalidCamera,
                        format!("frame {w}x{h} is too large"),
                    );
                }
                let cam = Camera::look_at(
                    DVec3::from_array(eye),
                    DVec3::from_array(look),
                    DVec3::from_array(up),
                    fov.to_radians(),
                    w,
                    h,
                );
                match cam {
                    Ok(cam) => self.set_camera(id, cam),
                    Err(e) => self.fail(id, ErrorCode::InvalidCamera, e.to_string()),
                }
            }
            ClientMsg::Teleport { room } => {
                let Some(r) = self.canvas.room(&room) else {
                    return self.fail(
                        id,
                        ErrorCode::UnknownRoom,
                        format!("no room named '{room}'"),
                    );
                };
                let cur = self.clients[&id].camera;
                match Camera::room_view(r, cur.fov_y, cur.width, cur.height) {
                    Ok(cam) => self.set_camera(id, cam),
                    Err(e) => self.fail(id, ErrorCode::InvalidCamera, e.to_string()),
                }
            }
            ClientMsg::DefineRoom { room } => match self.canvas.define_room(room) {
                Ok(()) => {
                    let hello = self.hello();
                    for c in self.clients.values() {
                        c.send(&hello);
                    }
                }
                Err(e) => self.fail(id, ErrorCode::InvalidRoom, e.to_string()),
            },
            ClientMsg::Save { path } => {
                let result = resolve_save_path(&self.opts.save_dir, &path)
                    .and_then(|p| save_snapshot(&self.canvas, &p).map_err(|e| e.to_string()));
                if let Err(e) = result {
                    self.fail(id, ErrorCode::SaveFailed, e);
                }
            }
        }
    }

    fn set_camera(&mut self, id: u64, cam: Camera) {
        let c = self.clients.get_mut(&id).unwrap();
        c.camera = cam;
        c.camera_changed = true;
    }

    fn tick(&mut self) {
        let adj = self.painter.process_adjustments(&mut self.canvas);
        if adj.work() > 0 {
            self.version += 1;
        }
        if adj.exhausted && !self.exhausted_reported {
            self.exhausted_reported = true;
            let msg = ServerMsg::error(
                ErrorCode::PoolExhausted,
                "cell pool is full; detail stops growing",
            );
            for c in self.clients.values() {
                c.send(&msg);
            }
        }
        let dirty_blocks = self.canvas.take_dirty_blocks().len();
        if dirty_blocks > 0 {
            self.version += 1;
        }
        let version = self.version;
        let cells = self.canvas.cell_count();
        let pool_pct = self.canvas.pool_occupancy_pct();
        let ids: Vec<u64> = self.clients.keys().copied().collect();
        for id in ids {
            let c = &self.clients[&id];
            let stale = c.shown != Some(version) || c.camera_changed;
            if stale && c.in_flight.load(Ordering::SeqCst) == 0 {
                let img = render_image(&self.canvas, &c.camera, &self.opts.trace);
                self.frame_seq += 1;
                let c = self.clients.get_mut(&id).unwrap();
                c.send(&ServerMsg::Frame {
                    seq: self.frame_seq,
                    width: img.width,
                    height: img.height,
                });
                c.in_flight.fetch_add(1, Ordering::SeqCst);
                let _ = c.tx.send(Outbound::Frame(encode_png(&img)));
                c.shown = Some(version);
                c.camera_changed = false;
            }
            let c = self.clients.get_mut(&id).unwrap();
            if dirty_blocks > 0 || c.reported_seq != Some(c.last_seq) {
                c.reported_seq = Some(c.last_seq);
                c.send(&ServerMsg::Stats {
                    cells,
                    pool_pct,
                    dirty_blocks,
                    last_seq: c.last_seq,
                });
            }
        }
    }
}

/// Resolves a client-supplied save path under `dir`, refusing absolute
/// paths and parent components.
pub fn resolve_save_path(dir: &Path, path: &str) -> Result<PathBuf, String> {
    let p = Path::new(path);
    if path.is_empty() || p.components().any(|c| !matches!(c, Component::Normal(_))) {
        return Err(format!(
            "save path '{path}' must be relative and stay inside the save directory"
        ));
    }
    Ok(dir.join(p))
}
