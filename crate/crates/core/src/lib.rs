//! Holographic meta-surface simulator for multi-pair vortex-beam links.
//!
//! The crate is organised bottom-up: [`scenario`] holds geometry and the
//! file format, [`beams`] evaluates source patterns, [`channel`] builds the
//! cascade Tx -> surface -> Rx responses, [`hologram`] synthesises surface
//! profiles, [`farfield`] checks the reflected beams, and [`capacity`] and
//! [`link`] evaluate what the resulting channel can carry.

pub mod beams;
pub mod capacity;
pub mod channel;
pub mod cli;
pub mod error;
pub mod farfield;
pub mod hologram;
pub mod link;
pub mod output;
pub mod scenario;

pub use error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Characteristic impedance of air, ohms.
pub const FREE_SPACE_IMPEDANCE: f64 = 376.730;
