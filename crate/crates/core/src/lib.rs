//! Joint angle-of-arrival / angle-of-departure estimation from beam-sweep
//! received signal strength.
//!
//! The crate covers the whole desk-scale pipeline:
//!
//! - [`sequences`]: Zadoff-Chu payload generation
//! - [`codebook`]: beampattern codebooks and array poses
//! - [`raytrace`]: 2D image-method multipath in a rectangular room
//! - [`channel`]: per-beam-pair I/Q synthesis and RSS grids
//! - [`estimators`]: OR, RSS-LS1D and RSS-LS2D angle estimators
//! - [`scenario`]: experiment configuration
//! - [`evaluation`]: batch evaluation, error tables and CDFs

// `!(a < b)` comparisons are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod codebook;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod geometry;
pub mod raytrace;
pub mod scenario;
pub mod seeds;
pub mod sequences;

pub use codebook::{AngleGrid, ArrayPose, BeamCodebook, SynthConfig};
pub use error::{Error, Result};
pub use geometry::Point2;
pub use sequences::{zadoff_chu, ComplexSequence, PayloadConfig};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Carrier frequency of the 60 GHz testbed.
pub const CARRIER_HZ: f64 = 60e9;

/// Baseband sample rate (channel bandwidth).
pub const SAMPLE_RATE_HZ: f64 = 1.76e9;
