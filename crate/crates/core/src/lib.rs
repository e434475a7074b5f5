//! Indoor localisation from a phone's IMU and WiFi round-trip-time ranging.
//!
//! The pipeline dead-reckons a walk from inertial data, finds revisits by
//! clustering RTT range vectors (no access-point positions needed), and
//! corrects drift with a pose-graph optimiser whose loop-closure weights are
//! scaled down when a closure disagrees with the odometry.

// `!(a > b)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod graph;
pub mod logs;
pub mod metrics;
pub mod pdr;
pub mod pipeline;
pub mod pose;
pub mod records;
pub mod rtt;
pub mod sim;
pub mod solver;

pub use error::{Error, ErrorCategory, Result};
pub use pose::{compose, inverse, normalize_angle, Pose2};
pub use records::{ImuSample, RangeMeasurement, RttObservation, StepEvent, TimedPose, Trajectory};
