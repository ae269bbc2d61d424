//! Spatio-temporal geostatistics for mobile air-quality sensing.
//!
//! The pipeline runs from raw sensor files to predictions:
//!
//! * [`ingest`] parses sensor and station files, converts units and projects
//!   coordinates to planar meters;
//! * [`calibrate`] fits a per-sensor linear correction against the station;
//! * [`variogram`] computes empirical space-time variograms and fits metric
//!   models to them;
//! * [`krige`] and [`idw`] predict at arbitrary space-time points;
//! * [`evaluate`] cross-validates all methods under several sampling scenarios;
//! * [`synth`] simulates Gaussian fields used as ground truth in tests.

// NaN-rejecting checks are written as negated comparisons throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod error;
pub mod evaluate;
pub mod geometry;
pub mod idw;
pub mod ingest;
pub mod krige;
pub mod linalg;
pub mod synth;
pub mod variogram;

pub use error::{Error, ErrorClass, Result};
pub use geometry::{lag, metric_distance, Lag, Observation, SpaceTimePoint};
pub use ingest::ReferenceSeries;
pub use krige::{KrigingMethod, NeighborhoodConfig, Prediction, TargetMode};
pub use variogram::{Family, VariogramModel};
