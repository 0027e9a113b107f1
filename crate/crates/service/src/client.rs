//! Minimal NDJSON client, used to drive sessions from tests and scripts.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};

use depthnav::harness::{Action, Observation, Pilot};
use depthnav::Modality;

use crate::error::ServiceError;
use crate::protocol::{ClientMessage, ResultMessage, ServerMessage, StateMessage};

pub struct Client {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

/// Everything the server sent during one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub states: Vec<StateMessage>,
    pub result: ResultMessage,
}

impl Client {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self, ServiceError> {
        let writer = TcpStream::connect(addr)?;
        writer.set_nodelay(true)?;
        Ok(Client { reader: BufReader::new(writer.try_clone()?), writer })
    }

    pub fn send(&mut self, msg: &ClientMessage) -> Result<(), ServiceError> {
        self.send_raw(&msg.to_line())
    }

    /// Sends one line verbatim (for probing malformed input).
    pub fn send_raw(&mut self, line: &str) -> Result<(), ServiceError> {
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        Ok(())
    }

    /// Next server message; `None` once the server has closed the connection.
    pub fn recv(&mut self) -> Result<Option<ServerMessage>, ServiceError> {
        let mut line = String::new();
        if self.reader.read_line(&mut line)? == 0 {
            return Ok(None);
        }
        ServerMessage::parse(line.trim_end())
            .map(Some)
            .map_err(|e| ServiceError::Protocol(format!("bad server message {line:?}: {e}")))
    }

    /// Plays one trial with `pilot` choosing every action, as `run_trial`
    /// would. Needs pose and goal in the state messages unless the pilot
    /// ignores them.
    pub fn play(
        &mut self,
        path_index: usize,
        modality: Modality,
        seed: Option<u64>,
        pilot: &mut dyn Pilot,
    ) -> Result<Transcript, ServiceError> {
        self.send(&ClientMessage::Start { path_index, modality, seed })?;
        let mut states = Vec::new();
        loop {
            match self.recv()? {
                Some(ServerMessage::State(state)) => {
                    if !state.done {
                        let action = match (state.pose, state.goal) {
                            (Some(pose), Some(goal)) => pilot.decide(&Observation::new(
                                state.feedback.clone(),
                                pose,
                                &goal,
                                state.collided_this_tick,
                            )),
                            // Blindfolded: goal bearing and distance are unknown.
                            _ => pilot.decide(&Observation {
                                feedback: state.feedback.clone(),
                                goal_bearing: 0.0,
                                goal_distance: f64::INFINITY,
                                bumped: state.collided_this_tick,
                            }),
                        };
                        self.send(&ClientMessage::Input { action })?;
                    }
                    states.push(state);
                }
                Some(ServerMessage::Result(result)) => return Ok(Transcript { states, result }),
                Some(ServerMessage::Error { message }) => return Err(ServiceError::Protocol(message)),
                None => return Err(ServiceError::Protocol("server closed the connection mid-trial".into())),
            }
        }
    }

    /// Sends a single action as input.
    pub fn input(&mut self, action: Action) -> Result<(), ServiceError> {
        self.send(&ClientMessage::Input { action })
    }
}
