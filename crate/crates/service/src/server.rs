//! TCP listener serving sessions as NDJSON or, after an HTTP upgrade, as
//! WebSocket text frames carrying the same messages.

use std::io::{self, BufReader, ErrorKind};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::Ordering;
use std::sync::mpsc::{self, Sender, TryRecvError};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use tungstenite::{Message, WebSocket};

use crate::error::ServiceError;
use crate::session::{run_session, spawn_line_reader, Inbound, LineWriter, ServiceContext, SessionLog};

const ACCEPT_POLL: Duration = Duration::from_millis(20);
const PEEK_POLL: Duration = Duration::from_millis(50);
/// Read timeout of the WebSocket pump; bounds outbound latency.
const WS_POLL: Duration = Duration::from_millis(5);

pub struct Server {
    listener: TcpListener,
    ctx: Arc<ServiceContext>,
}

impl Server {
    pub fn bind(addr: &str, ctx: ServiceContext) -> Result<Self, ServiceError> {
        let listener =
            TcpListener::bind(addr).map_err(|source| ServiceError::Bind { addr: addr.to_string(), source })?;
        Ok(Server { listener, ctx: Arc::new(ctx) })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn context(&self) -> &ServiceContext {
        &self.ctx
    }

    /// Accepts connections until the context's shutdown flag is raised, then
    /// waits for every session to wind down (logging unfinished trials).
    pub fn run(&self) -> Result<(), ServiceError> {
        self.listener.set_nonblocking(true)?;
        let mut sessions: Vec<JoinHandle<()>> = Vec::new();
        while !self.ctx.shutdown.load(Ordering::SeqCst) {
            match self.listener.accept() {
                Ok((stream, peer)) => {
                    let ctx = Arc::clone(&self.ctx);
                    sessions.push(thread::spawn(move || match handle_connection(stream, &ctx) {
                        Ok(log) => {
                            eprintln!("session {peer}: {} trial(s) logged", log.records.len())
                        }
                        Err(e) => eprintln!("session {peer}: {e}"),
                    }));
                }
                Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(ACCEPT_POLL),
                Err(e) if e.kind() == ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
            sessions.retain(|h| !h.is_finished());
        }
        for h in sessions {
            let _ = h.join();
        }
        Ok(())
    }
}

/// Serves one connection, picking the transport from its first byte: an HTTP
/// request line (`GET ...`) means WebSocket, anything else NDJSON.
pub fn handle_connection(stream: TcpStream, ctx: &ServiceContext) -> Result<SessionLog, ServiceError> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    stream.set_read_timeout(Some(PEEK_POLL))?;
    let mut first = [0u8; 1];
    loop {
        if ctx.shutdown.load(Ordering::SeqCst) {
            return Ok(SessionLog::default());
        }
        match stream.peek(&mut first) {
            Ok(0) => return Ok(SessionLog::default()),
            Ok(_) => break,
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut | ErrorKind::Interrupted) => {}
            Err(e) => return Err(e.into()),
        }
    }
    stream.set_read_timeout(None)?;
    if first[0] == b'G' {
        serve_websocket(stream, ctx)
    } else {
        serve_ndjson(stream, ctx)
    }
}

fn serve_ndjson(stream: TcpStream, ctx: &ServiceContext) -> Result<SessionLog, ServiceError> {
    let inbound = spawn_line_reader(BufReader::new(stream.try_clone()?));
    let result = run_session(&inbound, &mut LineWriter(&stream), ctx);
    // Unblocks the reader task.
    let _ = stream.shutdown(Shutdown::Both);
    result
}

fn serve_websocket(stream: TcpStream, ctx: &ServiceContext) -> Result<SessionLog, ServiceError> {
    let ws = tungstenite::accept(stream).map_err(|e| ServiceError::WebSocket(e.to_string()))?;
    ws.get_ref().set_read_timeout(Some(WS_POLL))?;
    let (in_tx, inbound) = mpsc::channel();
    let (mut out_tx, out_rx) = mpsc::channel::<String>();
    let pump = thread::spawn(move || pump_websocket(ws, in_tx, out_rx));
    let result = run_session(&inbound, &mut out_tx, ctx);
    drop(out_tx);
    let _ = pump.join();
    result
}

/// Owns the socket: forwards outbound lines as text frames and inbound text
/// frames (split on newlines) as lines, until either side goes away.
fn pump_websocket(mut ws: WebSocket<TcpStream>, inbound: Sender<Inbound>, outbound: mpsc::Receiver<String>) {
    loop {
        loop {
            match outbound.try_recv() {
                Ok(line) => {
                    if ws.send(Message::Text(line)).is_err() {
                        let _ = inbound.send(Inbound::Closed);
                        return;
                    }
                }
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => {
                    let _ = ws.close(None);
                    let _ = ws.flush();
                    return;
                }
            }
        }
        match ws.read() {
            Ok(Message::Text(text)) => {
                for line in text.lines().filter(|l| !l.trim().is_empty()) {
                    let _ = inbound.send(Inbound::Line(line.to_string()));
                }
            }
            Ok(Message::Close(_)) => {
                let _ = inbound.send(Inbound::Closed);
            }
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(_) => {
                let _ = inbound.send(Inbound::Closed);
                // Keep draining until the session drops its sender.
                while outbound.recv().is_ok() {}
                return;
            }
        }
    }
}
