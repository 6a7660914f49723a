//! File formats, experiment runner and teaching-session service around
//! `wac-core`.

pub mod cli;
pub mod format;
pub mod service;
pub mod session;
pub mod simulate;

pub use format::FormatError;
pub use session::{Phase, Session, SessionError};
pub use simulate::{simulate, MetricsReport, Simulation, SimulationConfig};
