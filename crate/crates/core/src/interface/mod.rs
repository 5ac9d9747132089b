//! Wire protocol, TCP server and the self-check suites behind the CLI.

pub mod checks;
pub mod protocol;
pub mod server;

pub use protocol::{ErrorCode, Flow, ProtocolError, Session};
pub use server::{run_session, serve, Server};
