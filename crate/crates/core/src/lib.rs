//! Hybrid active/passive radio SLAM built on virtual reference points.
//!
//! The agent maps reflective surfaces by their mirror images of its own start
//! position (virtual reference points). Active sensing yields Gaussian priors
//! on those points; passive TOA measurements from fixed anchors then drive a
//! particle-based belief-propagation filter that localizes the agent and
//! refines the map.

// Parameter checks are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod active;
pub mod config;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod pa_init;
pub mod refinement;
pub mod scenario;
pub mod seeding;
pub mod slam;

pub use error::{Error, Result};
pub use geometry::{Point2, SurfaceFrame};

/// Propagation speed (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
