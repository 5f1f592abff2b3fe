//! Command implementations and the environment service for `splatnav`.

pub mod commands;
pub mod protocol;
pub mod server;

pub use protocol::{Session, PROTOCOL_VERSION};
