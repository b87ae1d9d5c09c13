//! Quantum trajectories of a continuously monitored qubit and the statistical
//! arrow of time along them.

pub mod commands;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod io;
pub mod numerics;
pub mod oracle;
pub mod rng;
pub mod state;
pub mod stats;
pub mod trajectory;
pub mod unravel;
pub mod verify;

pub use error::{Error, Result};
pub use state::{QubitState, SimParams};
pub use trajectory::{MeasurementRecord, Trajectory};
