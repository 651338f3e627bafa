//! Service layer: configuration, reader sources, the HTTP API and the
//! server-push event stream.

pub mod api;
pub mod config;
pub mod events;
pub mod reader;
pub mod service;
pub mod state;

pub use api::{router, AppState, Tokens};
pub use config::{GatewayConfig, Layer, ReaderSource};
pub use events::{ApiEvent, EventBody, EventHub, ReaderStatus, StudentSummary};
pub use service::{start, Running};
pub use state::{Clock, Core, ManualClock, SharedCore, SystemClock};
