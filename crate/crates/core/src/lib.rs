//! Probabilistic real-time state machines: delay distributions, PTA
//! generation, digital-clocks model checking, a kinematic simulator of the
//! moving-robot scenario and spatiotemporal collision checks.

pub mod checker;
pub mod distributions;
pub mod model;
pub mod prob;
pub mod sim;
pub mod spatial;
pub mod textio;

pub use prob::{Prob, Weight};
