//! Three-dimensional trajectory estimation for radio-tagged animals from
//! non-simultaneous signal-strength readings logged by towers of directional
//! Yagi antennas.
//!
//! The crate is organised the way the estimate is built up:
//!
//! * [`movement`]: correlated OU/CIR movement model with exact discretisation.
//! * [`antenna`]: analytical Yagi pattern.
//! * [`observation`]: two-ray received power, receiver display map,
//!   calibration and the linearised measurement row.
//! * [`ekf`]: extended Kalman filter and observability diagnostics.
//! * [`tracker`]: static inversion, initialisation search, gap handling and
//!   the end-to-end tracking loop.
//! * [`io`]: file formats, configuration and synthetic detection logs.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod antenna;
pub mod ekf;
pub mod error;
pub mod movement;
pub mod io;
pub mod observation;
pub mod tracker;

pub use antenna::YagiPattern;
pub use ekf::{FilterState, Measurement};
pub use error::{Error, Result};
pub use movement::{MovementParams, ProcessNoiseCov, StateVector};
pub use observation::receiver::ReceiverModel;
pub use observation::TowerSite;
pub use tracker::{track, Track, TrackerConfig};
