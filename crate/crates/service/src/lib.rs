//! HTTP/JSON service over the PECS engine.
//!
//! - [`api`]: routing, authentication and the JSON wire format.
//! - [`store`]: the versioned snapshot file and attempt log.
//! - [`messaging`]: messages between linked accounts.
//! - [`server`]: the axum adapter used by `pecs serve`.

pub mod api;
pub mod clock;
pub mod messaging;
pub mod server;
pub mod store;

pub use api::{Body, Request, Response, Service, ServiceConfig};
pub use clock::{Clock, ManualClock, SystemClock};
pub use messaging::{list_messages, send_message, Message, MessageError};
pub use store::{load_store, save_store, FileStore, State, StoreError, StoreSnapshot};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/service.md")]
mod book {}
