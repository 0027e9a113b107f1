//! Interactive session endpoint.
//!
//! The server runs the simulate → chain loop and exchanges newline-delimited
//! JSON messages with a client over TCP, or over a WebSocket on the same port.
//! See the crate README for the message schema.

pub mod client;
pub mod error;
pub mod log;
pub mod protocol;
pub mod server;
pub mod session;

pub use error::ServiceError;
pub use log::TrialLog;
pub use protocol::{ClientMessage, ResultMessage, ServerMessage, StateMessage};
pub use server::Server;
pub use session::{run_session, serve_stream, Inbound, LineWriter, Outbound, Pacing, ServiceContext, SessionLog};
