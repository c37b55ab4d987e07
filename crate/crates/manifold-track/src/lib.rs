#![cfg_attr(not(feature = "std"), no_std)]
//! 6-DoF indoor tracking on the SO(3) manifold.
//!
//! This crate implements position and attitude tracking of a rigid target
//! carrying an IMU and three range transmitters arranged as an isosceles
//! triangle. Four estimators are provided: a conventional EKF and UKF, and
//! manifold-aware variants (`EkfRie`, `UkfRie`) that keep the orientation
//! estimate on SO(3) through a QR-factor retraction and move the orientation
//! covariance between tangent spaces by vector transport.
//!
//! The crate is organized along the processing pipeline:
//!
//! - [`so3`]: manifold primitives (skew maps, retraction, vector transport,
//!   covariance transport, nearest-SPD repair).
//! - [`kinematics`]: the 15-state model (flattened rotation, position,
//!   velocity), its zero-order-hold discretization, and the transmitter
//!   measurement map.
//! - [`sensors`]: synthetic IMU and range generation, IMU lever-arm transfer
//!   with variance propagation, Gauss-Newton multilateration.
//! - [`filters`]: the four estimators with rate-gated measurement updates.
//! - [`scenarios`]: ground-truth trajectory generation and sensor-stream
//!   synthesis.
//! - [`metrics`]: RMSE, CDF, and Monte-Carlo aggregation.
//!
//! The library is `no_std`-compatible (with `alloc`); disable the default
//! `std` feature for embedded targets. File IO, scenario files, and the CLI
//! live in the companion `manifold-track-cli` crate.

extern crate alloc;

pub mod filters;
pub mod kinematics;
mod math;
pub mod metrics;
pub mod scenarios;
pub mod sensors;
pub mod so3;

use core::fmt;

/// Errors produced by the tracking library.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// An argument violated a documented precondition.
    InvalidArgument(&'static str),
    /// The retraction input was rank deficient or orientation-reversing.
    SingularRetraction,
    /// A numerical routine (eigendecomposition, Cholesky, gain solve) failed.
    Numerical(&'static str),
    /// Sensor streams handed to a filter run were inconsistent.
    StreamMisaligned(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(what) => write!(f, "invalid argument: {what}"),
            Error::SingularRetraction => {
                write!(f, "retraction input is rank deficient or orientation-reversing")
            }
            Error::Numerical(what) => write!(f, "numerical failure: {what}"),
            Error::StreamMisaligned(what) => write!(f, "stream misaligned: {what}"),
        }
    }
}

impl core::error::Error for Error {}

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;
