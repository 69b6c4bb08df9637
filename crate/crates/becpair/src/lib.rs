//! Simulator and analysis toolkit for two-particle interference of
//! momentum-correlated atom pairs emitted by a colliding condensate
//! source: double double-slit and ghost configurations, exact-path-length
//! amplitudes integrated over an extended source, design-condition
//! checks, and Monte Carlo coincidence timing.

pub mod analysis;
pub mod config;
pub mod engine;
pub mod error;
pub mod feasibility;
pub mod geometry;
pub mod kinematics;
pub mod output;
pub mod timing;

pub use error::{Error, Result};
