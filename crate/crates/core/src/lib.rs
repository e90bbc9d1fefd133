//! Simulation and analysis of inter-fiber crosstalk in quantum-network fiber
//! plants, observed with photon-counting OTDR, plus crosstalk modeling and
//! port planning for N×N optical switches.

pub mod error;
pub mod photonics;
pub mod plant;
pub mod schema;
pub mod sim;
pub mod switch;
pub mod tags;
pub mod tcspc;

pub use error::{Error, Result};
