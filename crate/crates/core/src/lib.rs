pub mod channel;
pub mod e2e;
pub mod error;
pub mod gan;
pub mod nn;
pub mod report;
pub mod transceiver;

pub use error::{Error, Result};
