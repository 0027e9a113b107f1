//! One client session: a sequence of trials driven by the client's inputs.
//!
//! The session is transport-agnostic. Inbound lines arrive on a channel fed by
//! a reader task; outbound lines go through a [`Outbound`] sink. The channel is
//! the latest-value mailbox between the two tasks: before each tick the loop
//! drains it and only the newest action counts.

use std::io::{self, BufRead, Write};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use depthnav::harness::{Action, TrialEngine, TrialRecord, TrialResult};
use depthnav::{Modality, PipelineConfig, Scene};

use crate::error::ServiceError;
use crate::log::TrialLog;
use crate::protocol::{ClientMessage, ResultMessage, ServerMessage, StateMessage};

/// How often blocking waits wake up to check for shutdown.
const POLL: Duration = Duration::from_millis(50);

/// How ticks are clocked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pacing {
    /// One tick every `trial.dt` seconds of wall time; missing input repeats
    /// the previous action.
    Realtime,
    /// The first tick runs on `start`; each later tick runs when one `input`
    /// arrives. Reproducible regardless of network timing.
    Lockstep,
}

/// Everything a session needs, shared across connections.
pub struct ServiceContext {
    pub scenes: Vec<Scene>,
    pub config: PipelineConfig,
    /// Withhold pose and goal from state messages.
    pub blindfold: bool,
    pub pacing: Pacing,
    pub log: Option<Arc<TrialLog>>,
    pub shutdown: Arc<AtomicBool>,
}

impl ServiceContext {
    pub fn new(scenes: Vec<Scene>, config: PipelineConfig) -> Self {
        ServiceContext {
            scenes,
            config,
            blindfold: false,
            pacing: Pacing::Realtime,
            log: None,
            shutdown: Arc::new(AtomicBool::new(false)),
        }
    }

    fn stopping(&self) -> bool {
        self.shutdown.load(Ordering::SeqCst)
    }
}

/// What the reader task delivers.
#[derive(Debug, Clone, PartialEq)]
pub enum Inbound {
    Line(String),
    Closed,
}

/// Where the session writes its messages, one line each.
pub trait Outbound {
    fn send_line(&mut self, line: &str) -> io::Result<()>;
}

/// Newline-terminated lines on any byte stream.
pub struct LineWriter<W: Write>(pub W);

impl<W: Write> Outbound for LineWriter<W> {
    fn send_line(&mut self, line: &str) -> io::Result<()> {
        self.0.write_all(line.as_bytes())?;
        self.0.write_all(b"\n")?;
        self.0.flush()
    }
}

impl Outbound for Sender<String> {
    fn send_line(&mut self, line: &str) -> io::Result<()> {
        self.send(line.to_string()).map_err(|_| io::Error::new(io::ErrorKind::BrokenPipe, "connection closed"))
    }
}

/// Spawns the reader task for a line-oriented byte stream.
pub fn spawn_line_reader<R: BufRead + Send + 'static>(reader: R) -> Receiver<Inbound> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for line in reader.lines() {
            match line {
                Ok(line) if line.trim().is_empty() => continue,
                Ok(line) => {
                    if tx.send(Inbound::Line(line)).is_err() {
                        return;
                    }
                }
                Err(_) => break,
            }
        }
        let _ = tx.send(Inbound::Closed);
    });
    rx
}

/// Trials finished (or cut short by disconnect/shutdown) in one session.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionLog {
    pub records: Vec<TrialRecord>,
}

/// Runs a session over a plain byte stream until the client disconnects.
pub fn serve_stream<R, W>(reader: R, writer: W, ctx: &ServiceContext) -> Result<SessionLog, ServiceError>
where
    R: BufRead + Send + 'static,
    W: Write,
{
    let inbound = spawn_line_reader(reader);
    run_session(&inbound, &mut LineWriter(writer), ctx)
}

enum Event {
    Message(ClientMessage),
    /// Client gone or server shutting down.
    End,
    Timeout,
}

struct Session<'a> {
    inbound: &'a Receiver<Inbound>,
    out: &'a mut dyn Outbound,
    ctx: &'a ServiceContext,
    log: SessionLog,
    trials_started: u64,
}

struct Trial {
    engine: TrialEngine,
    path_index: usize,
    modality: Modality,
    seed: u64,
}

enum TrialEnd {
    Finished,
    Reset,
    SessionOver,
}

/// Runs one session: `start` → ticks → `result`, repeated until the client
/// leaves. Malformed messages get an `error` reply and end the session.
pub fn run_session(
    inbound: &Receiver<Inbound>,
    out: &mut dyn Outbound,
    ctx: &ServiceContext,
) -> Result<SessionLog, ServiceError> {
    let mut session = Session { inbound, out, ctx, log: SessionLog::default(), trials_started: 0 };
    match session.run() {
        Ok(()) => Ok(session.log),
        Err(ServiceError::Protocol(message)) => {
            // Best effort: the client may already be gone.
            let _ = session.send(&ServerMessage::Error { message: message.clone() });
            Err(ServiceError::Protocol(message))
        }
        Err(e) => Err(e),
    }
}

impl Session<'_> {
    fn run(&mut self) -> Result<(), ServiceError> {
        loop {
            let (path_index, modality, seed) = match self.wait_for_start()? {
                Some(start) => start,
                None => return Ok(()),
            };
            let scene = self.ctx.scenes.get(path_index).ok_or_else(|| {
                ServiceError::Protocol(format!("path_index {path_index} out of range (0..{})", self.ctx.scenes.len()))
            })?;
            let seed = seed.unwrap_or_else(|| self.ctx.config.artifact.seed.wrapping_add(self.trials_started));
            self.trials_started += 1;
            let engine = TrialEngine::new(scene, &self.ctx.config, modality, seed, true)?;
            let mut trial = Trial { engine, path_index, modality, seed };
            match self.run_trial(&mut trial)? {
                TrialEnd::Finished => {
                    let result = trial.engine.result();
                    let record = self.record(&trial, &result)?;
                    self.send(&ServerMessage::Result(ResultMessage {
                        path_index: record.path,
                        modality: record.modality,
                        seed: record.seed,
                        trial_index: record.trial_index,
                        tt_s: record.tt_s,
                        noc: record.noc,
                        reached_goal: record.reached_goal,
                    }))?;
                }
                TrialEnd::Reset => {}
                TrialEnd::SessionOver => {
                    // The unfinished trial counts as a timeout.
                    let result = trial.engine.result();
                    self.record(&trial, &result)?;
                    return Ok(());
                }
            }
        }
    }

    fn record(&mut self, trial: &Trial, result: &TrialResult) -> Result<TrialRecord, ServiceError> {
        let record = TrialRecord::new(trial.modality, trial.path_index, trial.seed, trial.path_index + 1, result);
        if let Some(log) = &self.ctx.log {
            log.append(&record)?;
        }
        self.log.records.push(record.clone());
        Ok(record)
    }

    fn send(&mut self, msg: &ServerMessage) -> Result<(), ServiceError> {
        self.out.send_line(&msg.to_line())?;
        Ok(())
    }

    /// Next client message, or `Timeout` once `deadline` passes.
    fn next_event(&self, deadline: Option<Instant>) -> Result<Event, ServiceError> {
        loop {
            if self.ctx.stopping() {
                return Ok(Event::End);
            }
            let wait = match deadline {
                Some(d) => d.saturating_duration_since(Instant::now()).min(POLL),
                None => POLL,
            };
            match self.inbound.recv_timeout(wait) {
                Ok(Inbound::Line(line)) => {
                    let msg = ClientMessage::parse(&line)
                        .map_err(|e| ServiceError::Protocol(format!("malformed message: {e}")))?;
                    return Ok(Event::Message(msg));
                }
                Ok(Inbound::Closed) | Err(RecvTimeoutError::Disconnected) => return Ok(Event::End),
                Err(RecvTimeoutError::Timeout) => {
                    if deadline.is_some_and(|d| Instant::now() >= d) {
                        return Ok(Event::Timeout);
                    }
                }
            }
        }
    }

    fn wait_for_start(&mut self) -> Result<Option<(usize, Modality, Option<u64>)>, ServiceError> {
        loop {
            match self.next_event(None)? {
                Event::Message(ClientMessage::Start { path_index, modality, seed }) => {
                    return Ok(Some((path_index, modality, seed)))
                }
                // Nothing to reset between trials.
                Event::Message(ClientMessage::Reset {}) => {}
                Event::Message(ClientMessage::Input { .. }) => {
                    return Err(ServiceError::Protocol("input before start".into()))
                }
                Event::End => return Ok(None),
                Event::Timeout => unreachable!("no deadline"),
            }
        }
    }

    fn run_trial(&mut self, trial: &mut Trial) -> Result<TrialEnd, ServiceError> {
        let period = Duration::from_secs_f64(self.ctx.config.trial.dt);
        let started = Instant::now();
        let mut action = Action::Stop;
        loop {
            let tick = trial.engine.tick();
            match self.ctx.pacing {
                Pacing::Realtime => {
                    let deadline = started + period * (tick as u32 + 1);
                    loop {
                        match self.next_event(Some(deadline))? {
                            Event::Timeout => break,
                            Event::Message(ClientMessage::Input { action: a }) => action = a,
                            Event::Message(ClientMessage::Reset {}) => return Ok(TrialEnd::Reset),
                            Event::Message(ClientMessage::Start { .. }) => {
                                return Err(ServiceError::Protocol("start during a running trial".into()))
                            }
                            Event::End => return Ok(TrialEnd::SessionOver),
                        }
                    }
                }
                // The first tick answers `start` itself with the initial stop.
                Pacing::Lockstep if tick == 0 => {}
                Pacing::Lockstep => match self.next_event(None)? {
                    Event::Message(ClientMessage::Input { action: a }) => action = a,
                    Event::Message(ClientMessage::Reset {}) => return Ok(TrialEnd::Reset),
                    Event::Message(ClientMessage::Start { .. }) => {
                        return Err(ServiceError::Protocol("start during a running trial".into()))
                    }
                    Event::End => return Ok(TrialEnd::SessionOver),
                    Event::Timeout => unreachable!("no deadline"),
                },
            }
            let report = trial.engine.step(action)?;
            let (pose, goal) =
                if self.ctx.blindfold { (None, None) } else { (Some(report.pose), Some(trial.engine.scene().goal)) };
            let sent = self.send(&ServerMessage::State(StateMessage {
                tick: report.tick,
                elapsed_s: report.elapsed_s,
                feedback: report.feedback,
                collided_this_tick: report.collided,
                noc: report.noc,
                done: report.done,
                reached_goal: report.reached_goal,
                pose,
                goal,
            }));
            if sent.is_err() {
                return Ok(TrialEnd::SessionOver);
            }
            if report.done {
                return Ok(TrialEnd::Finished);
            }
        }
    }
}
