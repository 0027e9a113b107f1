//! Wire messages: one JSON object per line, discriminated by `type`.

use depthnav::harness::Action;
use depthnav::scene::Goal;
use depthnav::{FeedbackCode, Modality, Pose};
use serde::{Deserialize, Serialize};

/// Client → server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    /// Begins a trial on one of the session's paths.
    Start {
        path_index: usize,
        modality: Modality,
        /// Artifact seed; defaults to the configured seed plus the number of
        /// trials already started in this session.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// The action for the next tick (and every later one until replaced).
    Input { action: Action },
    /// Abandons the running trial without logging it.
    Reset {},
}

/// Server → client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ServerMessage {
    /// Sent exactly once per tick.
    State(StateMessage),
    /// Sent once when a trial finishes, after its final state.
    Result(ResultMessage),
    /// Sent before the server closes the connection over a bad message.
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateMessage {
    pub tick: u64,
    pub elapsed_s: f64,
    pub feedback: Option<FeedbackCode>,
    pub collided_this_tick: bool,
    pub noc: u32,
    pub done: bool,
    pub reached_goal: bool,
    /// Omitted in blindfold mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<Pose>,
    /// Omitted in blindfold mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<Goal>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultMessage {
    pub path_index: usize,
    pub modality: Modality,
    pub seed: u64,
    pub trial_index: usize,
    pub tt_s: f64,
    pub noc: u32,
    pub reached_goal: bool,
}

impl ClientMessage {
    pub fn parse(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("client messages serialize")
    }
}

impl ServerMessage {
    pub fn parse(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }
}
