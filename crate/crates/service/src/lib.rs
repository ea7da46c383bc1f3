//! Measurement service: sessions over open studies, live line edits, voice
//! commands and snapshots, served as JSON over HTTP. Also hosts the `ccd`
//! command-line tool.

pub mod cli;
pub mod clock;
pub mod error;
pub mod folder;
mod font;
pub mod http;
pub mod session;
pub mod snapshot;

pub use clock::{Clock, ManualClock, SystemClock};
pub use error::{Result, ServiceError};
pub use http::{router, AppState};
pub use session::{DisplaySlot, LineKind, Session, SessionConfig, ViewState};
