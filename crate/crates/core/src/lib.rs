//! Simulation laboratory for static hand-gesture classification on FMCW
//! mmWave radar.
//!
//! The pipeline runs from parametric hand-shaped scatterer clouds
//! ([`scene`]) through closed-form beat-signal synthesis ([`radar`]) and
//! range / range-angle preprocessing ([`dsp`]) to a convolutional classifier
//! ([`nn`]). [`sar`] reconstructs back-projection images over a full scan,
//! and [`experiment`] wires everything into the human-only versus
//! sterile-supplemented training comparison driven by the `gesture-lab` CLI.

pub mod data;
pub mod dsp;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod nn;
pub mod radar;
pub mod sar;
pub mod scene;

pub use error::{Error, Result};
pub use exec::Execution;
