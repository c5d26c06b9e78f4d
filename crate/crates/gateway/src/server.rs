//! `/teleop` websocket server around a running [`Simulation`].
//!
//! The simulation loop, the acceptor and one thread per session talk only
//! through channels. Frames go out through a small per-session queue that
//! drops its oldest entry when a client falls behind; commands come in on
//! an unbounded channel and are never dropped. The first client to connect
//! while no operator is active becomes the operator, everyone else only
//! watches.

use std::collections::VecDeque;
use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::Arc;
use std::sync::atomic::{AtomicBool, Ordering};
use std::thread;
use std::time::{Duration, Instant};

use crossbeam_channel::{Receiver, RecvTimeoutError, Sender, TryRecvError, TrySendError, bounded, unbounded};
use log::{debug, info, warn};
use teleop_ass::mpc::OperatorReference;
use teleop_ass::scenario::{ScenarioConfig, Simulation, StepRecord};
use tungstenite::handshake::server::{ErrorResponse, Request, Response};
use tungstenite::http::StatusCode;
use tungstenite::{Message, WebSocket};

use crate::frames::{CommandFrame, StateFrame};

pub const ENDPOINT: &str = "/teleop";

/// After the operator disconnects `v_ref` falls linearly to zero over this
/// many seconds.
pub const STOP_RAMP: f64 = 1.0;

/// Frames buffered per session before the oldest is dropped.
const OUTBOX_CAPACITY: usize = 32;
const POLL: Duration = Duration::from_millis(2);
/// How long a closing session waits for the client's close reply.
const CLOSE_GRACE: Duration = Duration::from_secs(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pacing {
    /// One step per `t_s` of wall-clock time; the latest command applies.
    Realtime,
    /// Waits for an operator, then for exactly one command per step.
    Lockstep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ServeReport {
    pub sessions: usize,
    pub frames_sent: usize,
    pub frames_dropped: usize,
    pub commands: usize,
    /// Commands from spectators.
    pub ignored: usize,
    pub malformed: usize,
}

#[derive(Debug)]
pub struct ServeOutcome {
    pub records: Vec<StepRecord>,
    pub report: ServeReport,
}

type SessionId = usize;

enum Event {
    Connected(SessionId, Sender<Arc<str>>, Receiver<Arc<str>>),
    Command(SessionId, CommandFrame),
    Malformed(SessionId),
    Disconnected(SessionId),
}

struct Outbox {
    id: SessionId,
    tx: Sender<Arc<str>>,
    /// Receiving end kept to discard the oldest frame.
    rx: Receiver<Arc<str>>,
}

impl Outbox {
    /// Returns whether a frame had to be dropped.
    fn push(&self, frame: Arc<str>) -> Option<bool> {
        let mut frame = frame;
        let mut dropped = false;
        loop {
            match self.tx.try_send(frame) {
                Ok(()) => return Some(dropped),
                Err(TrySendError::Full(f)) => {
                    let _ = self.rx.try_recv();
                    dropped = true;
                    frame = f;
                }
                Err(TrySendError::Disconnected(_)) => return None,
            }
        }
    }
}

/// Binds `/teleop` on `addr`; port 0 picks a free port.
pub fn bind(addr: impl Into<SocketAddr>) -> std::io::Result<TcpListener> {
    let listener = TcpListener::bind(addr.into())?;
    listener.set_nonblocking(true)?;
    Ok(listener)
}

#[allow(clippy::result_large_err)]
fn check_path(req: &Request, resp: Response) -> Result<Response, ErrorResponse> {
    if req.uri().path() == ENDPOINT {
        Ok(resp)
    } else {
        let mut err = ErrorResponse::new(Some(format!("no endpoint {}", req.uri().path())));
        *err.status_mut() = StatusCode::NOT_FOUND;
        Err(err)
    }
}

fn session(id: SessionId, mut ws: WebSocket<TcpStream>, outbox: Receiver<Arc<str>>, events: Sender<Event>) {
    let mut closing: Option<Instant> = None;
    loop {
        if closing.is_some_and(|at| at.elapsed() > CLOSE_GRACE) {
            return;
        }
        loop {
            match outbox.try_recv() {
                Ok(frame) => {
                    if ws.send(Message::text(frame.as_ref())).is_err() {
                        let _ = events.send(Event::Disconnected(id));
                        return;
                    }
                }
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => {
                    if closing.is_none() {
                        let _ = ws.close(None);
                        closing = Some(Instant::now());
                    }
                    break;
                }
            }
        }
        match ws.read() {
            Ok(Message::Text(text)) => {
                let event = match CommandFrame::parse(text.as_str()) {
                    Ok(frame) => Event::Command(id, frame),
                    Err(e) => {
                        debug!("session {id}: {e}");
                        Event::Malformed(id)
                    }
                };
                let _ = events.send(event);
            }
            Ok(Message::Binary(_)) => {
                let _ = events.send(Event::Malformed(id));
            }
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                if closing.is_some() {
                    let _ = ws.flush();
                }
            }
            Err(e) => {
                debug!("session {id} ended: {e}");
                let _ = events.send(Event::Disconnected(id));
                return;
            }
        }
    }
}

fn acceptor(listener: TcpListener, events: Sender<Event>, stop: Arc<AtomicBool>) {
    let mut next_id = 0;
    let mut sessions = Vec::new();
    while !stop.load(Ordering::Relaxed) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let setup = stream
                    .set_nonblocking(false)
                    .and_then(|_| stream.set_nodelay(true))
                    .and_then(|_| stream.set_read_timeout(Some(POLL)));
                if let Err(e) = setup {
                    warn!("{peer}: {e}");
                    continue;
                }
                let ws = match tungstenite::accept_hdr(stream, check_path) {
                    Ok(ws) => ws,
                    Err(e) => {
                        warn!("{peer}: handshake failed: {e}");
                        continue;
                    }
                };
                let id = next_id;
                next_id += 1;
                info!("session {id} from {peer}");
                let (tx, rx) = bounded(OUTBOX_CAPACITY);
                if events.send(Event::Connected(id, tx, rx.clone())).is_err() {
                    break;
                }
                let ev = events.clone();
                sessions.push(thread::spawn(move || session(id, ws, rx, ev)));
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(POLL),
            Err(e) => {
                warn!("accept failed: {e}");
                thread::sleep(POLL);
            }
        }
    }
    for s in sessions {
        let _ = s.join();
    }
}

/// Command source state of the simulation loop.
struct Operator {
    session: Option<SessionId>,
    pending: VecDeque<OperatorReference>,
    latest: Option<OperatorReference>,
    /// Sim time at which the operator was lost while commanding.
    lost_at: Option<f64>,
}

impl Operator {
    fn command(&self, t: f64) -> Option<OperatorReference> {
        let latest = self.latest?;
        Some(match self.lost_at {
            Some(t0) => {
                let scale = (1.0 - (t - t0) / STOP_RAMP).clamp(0.0, 1.0);
                OperatorReference::new(latest.delta_ref, latest.v_ref * scale)
            }
            None => latest,
        })
    }
}

struct Loop {
    config: ScenarioConfig,
    outboxes: Vec<Outbox>,
    operator: Operator,
    report: ServeReport,
}

impl Loop {
    fn handle(&mut self, event: Event, t: f64) {
        match event {
            Event::Connected(id, tx, rx) => {
                self.report.sessions += 1;
                self.outboxes.push(Outbox { id, tx, rx });
                if self.operator.session.is_none() {
                    info!("session {id} is the operator");
                    self.operator.session = Some(id);
                }
            }
            Event::Command(id, frame) => {
                if self.operator.session == Some(id) {
                    self.report.commands += 1;
                    let r = frame.reference(&self.config.vehicle);
                    debug!("command at t={t:.2}: {r:?}");
                    self.operator.pending.push_back(r);
                    self.operator.lost_at = None;
                } else {
                    self.report.ignored += 1;
                }
            }
            Event::Malformed(id) => {
                debug!("dropped malformed frame from session {id}");
                self.report.malformed += 1;
            }
            Event::Disconnected(id) => {
                self.outboxes.retain(|o| o.id != id);
                if self.operator.session == Some(id) {
                    info!("operator session {id} lost at t={t:.2}");
                    self.operator.session = None;
                    if self.operator.latest.is_some() || !self.operator.pending.is_empty() {
                        self.operator.lost_at = Some(t);
                    }
                }
            }
        }
    }

    fn broadcast(&mut self, frame: &StateFrame) {
        let text: Arc<str> = match serde_json::to_string(frame) {
            Ok(t) => t.into(),
            Err(e) => {
                warn!("frame not serialisable: {e}");
                return;
            }
        };
        let report = &mut self.report;
        self.outboxes.retain(|o| match o.push(text.clone()) {
            Some(dropped) => {
                report.frames_sent += 1;
                report.frames_dropped += usize::from(dropped);
                true
            }
            None => false,
        });
    }

    fn take_latest(&mut self) {
        if let Some(r) = self.operator.pending.drain(..).next_back() {
            self.operator.latest = Some(r);
        }
    }
}

/// Runs the scenario while serving `/teleop` on `listener` (from [`bind`]).
/// Returns once the scenario has finished and all sessions are closed.
pub fn serve(config: ScenarioConfig, listener: TcpListener, pacing: Pacing) -> Result<ServeOutcome, teleop_ass::ConfigError> {
    let mut sim = Simulation::new(config.clone())?;
    let (events_tx, events) = unbounded();
    let stop = Arc::new(AtomicBool::new(false));
    let acceptor_handle = {
        let stop = stop.clone();
        thread::spawn(move || acceptor(listener, events_tx, stop))
    };
    let t_s = config.mpc.t_s;
    let horizon = config.mpc.horizon;
    let mut state = Loop {
        config,
        outboxes: Vec::new(),
        operator: Operator {
            session: None,
            pending: VecDeque::new(),
            latest: None,
            lost_at: None,
        },
        report: ServeReport::default(),
    };

    if pacing == Pacing::Lockstep {
        info!("waiting for an operator on {ENDPOINT}");
        while state.operator.session.is_none() {
            match events.recv() {
                Ok(e) => state.handle(e, 0.0),
                Err(_) => break,
            }
        }
    }

    let mut records = Vec::with_capacity(sim.total_steps());
    let started = Instant::now();
    while !sim.is_finished() {
        let t = sim.time();
        let (view, ghost) = sim.upcoming();
        let frame = StateFrame::new(sim.step_index(), t, &view, &ghost, records.last(), horizon);
        state.broadcast(&frame);

        match pacing {
            Pacing::Realtime => {
                let deadline = started + Duration::from_secs_f64((sim.step_index() + 1) as f64 * t_s);
                loop {
                    match events.recv_deadline(deadline) {
                        Ok(e) => state.handle(e, t),
                        Err(RecvTimeoutError::Timeout) => break,
                        Err(RecvTimeoutError::Disconnected) => {
                            thread::sleep(deadline.saturating_duration_since(Instant::now()));
                            break;
                        }
                    }
                }
                state.take_latest();
            }
            Pacing::Lockstep => {
                while state.operator.session.is_some() && state.operator.pending.is_empty() {
                    match events.recv() {
                        Ok(e) => state.handle(e, t),
                        Err(_) => break,
                    }
                }
                while let Ok(e) = events.try_recv() {
                    state.handle(e, t);
                }
                if let Some(r) = state.operator.pending.pop_front() {
                    state.operator.latest = Some(r);
                }
            }
        }
        let command = state.operator.command(t);
        records.push(sim.step(command).record);
    }

    state.outboxes.clear();
    stop.store(true, Ordering::Relaxed);
    let _ = acceptor_handle.join();
    while let Ok(e) = events.try_recv() {
        let t = sim.time();
        state.handle(e, t);
    }
    Ok(ServeOutcome {
        records,
        report: state.report,
    })
}
