//! Risk-aware recharging rendezvous planning for UAV teams supported by
//! ground vehicles.
//!
//! The core problem picks, for every UAV, one recharging detour (or none)
//! so that the summed detour time is small while the joint probability of
//! finishing without a depletion stays above a threshold. Probabilities are
//! handled additively as weights `ln(1/p)`.

pub mod bicriteria;
pub mod energy;
pub mod error;
pub mod flow;
pub mod generate;
pub mod geometry;
pub mod io;
pub mod lagrangian;
pub mod local_search;
pub mod model;
pub mod oracle;
pub mod sim;

pub use error::{Error, Result};
pub use model::{Edge, EdgeId, FeasibilityReport, RendezvousInstance, Schedule, UgvVertex};
