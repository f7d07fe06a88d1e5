//! Deterministic discrete-event simulator for QUIC-like flows over dual
//! connectivity with a shared PDCP split/reorder layer.

pub mod catalog;
pub mod config;
pub mod error;
pub mod experiments;
pub mod netem;
pub mod pdcp;
pub mod pipeline;
pub mod report;
pub mod sim;
pub mod trace_io;
pub mod transport;

pub use error::{Error, Result};
