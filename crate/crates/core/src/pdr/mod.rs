//! Pedestrian dead reckoning: IMU log → steps → dead-reckoned trajectory.

mod filter;
mod heading;
mod steps;

use serde::{Deserialize, Serialize};

pub use filter::lowpass;
pub use heading::{estimate_heading, tilt_compensated_yaw, HeadingTrack};
pub use steps::{detect_steps, step_length};

use crate::error::{Error, Result};
use crate::pose::Pose2;
use crate::records::{validate_steps, ImuSample, StepEvent, TimedPose, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdrConfig {
    /// Rolling-stddev window, in samples.
    pub window_w: usize,
    /// Moving/steady threshold on the rolling stddev, m/s².
    pub stddev_threshold: f64,
    /// Weinberg constant.
    pub weinberg_h: f64,
    pub lowpass_cutoff: f64,
    /// Shortest moving burst accepted as a step, seconds.
    pub min_step_duration: f64,
}

impl Default for PdrConfig {
    fn default() -> Self {
        PdrConfig {
            window_w: 25,
            stddev_threshold: 0.8,
            weinberg_h: 0.48,
            lowpass_cutoff: 3.0,
            min_step_duration: 0.2,
        }
    }
}

impl PdrConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_w < 2 {
            return Err(Error::Config("pdr.window_w must be at least 2".into()));
        }
        if !(self.stddev_threshold > 0.0) {
            return Err(Error::Config("pdr.stddev_threshold must be positive".into()));
        }
        if !(self.weinberg_h > 0.0) {
            return Err(Error::Config("pdr.weinberg_h must be positive".into()));
        }
        if !(self.lowpass_cutoff > 0.0) {
            return Err(Error::Config("pdr.lowpass_cutoff must be positive".into()));
        }
        if !(self.min_step_duration >= 0.0) {
            return Err(Error::Config("pdr.min_step_duration must be non-negative".into()));
        }
        Ok(())
    }
}

/// Euclidean norm of the accelerometer reading.
pub fn accel_magnitude(sample: &ImuSample) -> f64 {
    sample.accel.norm()
}

/// Full front end: detects steps in an IMU log and estimates length and
/// heading for each.
pub fn run_pdr(imu: &[ImuSample], config: &PdrConfig) -> Result<Vec<StepEvent>> {
    config.validate()?;
    if imu.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("IMU log contains non-finite values"));
    }
    let raw: Vec<(f64, f64)> = imu.iter().map(|s| (s.t, accel_magnitude(s))).collect();
    let filtered = lowpass(&raw, config.lowpass_cutoff)?;
    let intervals = detect_steps(&filtered, config);
    if intervals.is_empty() {
        return Ok(Vec::new());
    }
    let track = HeadingTrack::new(imu)?;
    intervals
        .iter()
        .enumerate()
        .map(|(index, &(t_start, t_end))| {
            let lo = filtered.partition_point(|s| s.0 < t_start);
            let hi = filtered.partition_point(|s| s.0 <= t_end);
            let segment: Vec<f64> = filtered[lo..hi].iter().map(|s| s.1).collect();
            Ok(StepEvent {
                index,
                t_start,
                t_end,
                length: step_length(&segment, config.weinberg_h)?,
                heading: track.step_heading((t_start, t_end))?,
            })
        })
        .collect()
}

/// Dead-reckons positions from `origin`, advancing each step by its length
/// along its heading.
///
/// Node 0 sits at the first step's start time (or `t = 0` for an empty step
/// list); node `j + 1` sits at the end time of step `j` and carries that
/// step's heading.
pub fn pdr_trajectory(steps: &[StepEvent], origin: Pose2) -> Result<Trajectory> {
    validate_steps(steps)?;
    let t0 = steps.first().map_or(0.0, |s| s.t_start);
    let mut points = Vec::with_capacity(steps.len() + 1);
    points.push(TimedPose { t: t0, pose: origin });
    let (mut x, mut y) = (origin.x, origin.y);
    for s in steps {
        let (sn, cs) = s.heading.sin_cos();
        x += s.length * cs;
        y += s.length * sn;
        points.push(TimedPose {
            t: s.t_end,
            pose: Pose2::new(x, y, s.heading),
        });
    }
    Trajectory::new(points)
}
