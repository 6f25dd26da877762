//! Simulation and optimization library for directional pinching-antenna
//! systems: dielectric waveguides feeding repositionable radiating elements
//! whose Gaussian beams are steered at users on the floor of an indoor
//! region.
//!
//! The crate is organized as a pipeline:
//! - [`config`]: validated system parameters with JSON loading;
//! - [`geometry`]: positions, orientations and the beam-local frame;
//! - [`channel`]: in-guide coupling, Gaussian beam radiation and the
//!   composite waveguide-to-user channel;
//! - [`single_pa`]: closed-form placement and orientation of one antenna
//!   for one user;
//! - [`assignment`]: Hungarian plus greedy antenna-user matching,
//!   feasibility projection and phase fine-tuning;
//! - [`beamforming`]: zero-forcing and WMMSE precoding with rate evaluation;
//! - [`harness`]: deterministic Monte-Carlo experiments with CSV output.

pub mod assignment;
pub mod beamforming;
pub mod channel;
pub mod config;
pub mod geometry;
pub mod harness;
pub mod single_pa;

pub use config::{RawConfig, SystemConfig};
pub use geometry::{Orientation, Vec3};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum DipassError {
    #[error("config error: {0}")]
    Config(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    /// The in-guide gain derivative is negative everywhere, so the best
    /// position is the waveguide entrance and no interior offset exists.
    #[error("no interior optimum: gain is maximized at the waveguide entrance")]
    NoInteriorOptimum,
    #[error("assignment error: {0}")]
    Assignment(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}
