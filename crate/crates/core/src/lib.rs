//! Minimum weighted-sum-power (WSP) resource allocation for three-phase
//! cooperative spectrum sharing with a decode-and-forward secondary relay.
//!
//! The solver decomposes the joint power and time-split problem into a
//! per-θ two-variable LP ([`lp2`]) and a one-dimensional search for the
//! optimal time split ([`newton`]). [`baselines`] holds the comparison
//! schemes, [`matching`] pairs many primary and secondary links, and
//! [`sim`] runs the Monte Carlo, warm-start and timing experiments.

pub mod baselines;
pub mod error;
pub mod lp2;
pub mod matching;
pub mod model;
pub mod newton;
pub mod sim;

pub use error::{Error, Result};
