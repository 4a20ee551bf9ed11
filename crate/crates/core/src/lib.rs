//! Analysis of growth-rate laws and drifting heavy-tailed distributions in
//! two-period panel data: logarithmic binning, Pareto and log-normal fits,
//! tent-shaped growth kernels and their slope law, the detailed
//! (quasi-)balance symmetry, closed-form reference densities and a seeded
//! synthetic-panel generator that serves as the verification oracle.

pub mod balance;
pub mod error;
pub mod fit;
pub mod histogram;
pub mod numeric;
pub mod panel;
pub mod pipeline;
pub mod stats;
pub mod synth;
pub mod theory;

pub use error::{Error, Result};
