//! Sensor records and trajectories shared across the pipeline.

use std::collections::BTreeMap;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::pose::Pose2;

/// One raw inertial sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    /// Seconds from log start.
    pub t: f64,
    /// Specific force, m/s².
    pub accel: Vector3<f64>,
    /// Angular velocity, rad/s.
    pub gyro: Vector3<f64>,
    /// Magnetic field, µT.
    pub mag: Vector3<f64>,
}

impl ImuSample {
    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.accel.iter().all(|v| v.is_finite())
            && self.gyro.iter().all(|v| v.is_finite())
            && self.mag.iter().all(|v| v.is_finite())
    }
}

/// One detected (or simulated) step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEvent {
    pub index: usize,
    pub t_start: f64,
    pub t_end: f64,
    /// Step length in meters.
    pub length: f64,
    /// Walking direction in the global frame, radians in `(-π, π]`.
    pub heading: f64,
}

/// Checks ordering and value constraints on a step sequence.
pub fn validate_steps(steps: &[StepEvent]) -> Result<()> {
    for (n, s) in steps.iter().enumerate() {
        if !(s.t_start.is_finite() && s.t_end.is_finite() && s.length.is_finite())
            || !s.heading.is_finite()
        {
            return Err(Error::invalid(format!("step {n}: non-finite field")));
        }
        if s.t_start >= s.t_end {
            return Err(Error::invalid(format!("step {n}: t_start >= t_end")));
        }
        if s.length < 0.0 {
            return Err(Error::invalid(format!("step {n}: negative length")));
        }
        if n > 0 {
            let prev = &steps[n - 1];
            if s.index <= prev.index {
                return Err(Error::invalid(format!("step {n}: index not increasing")));
            }
            if s.t_end <= prev.t_end {
                return Err(Error::invalid(format!("step {n}: steps not time-ordered")));
            }
        }
    }
    Ok(())
}

/// A single access-point range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeMeasurement {
    pub range: f64,
    pub stddev: Option<f64>,
}

/// All ranges collected at one instant, keyed by access-point identifier.
#[derive(Debug, Clone, PartialEq)]
pub struct RttObservation {
    pub t: f64,
    pub ranges: BTreeMap<String, RangeMeasurement>,
}

impl RttObservation {
    pub fn new(t: f64, ranges: BTreeMap<String, RangeMeasurement>) -> Result<Self> {
        if !t.is_finite() {
            return Err(Error::invalid("observation time is not finite"));
        }
        if ranges.is_empty() {
            return Err(Error::invalid(format!("observation at t={t} has no ranges")));
        }
        for (ap, m) in &ranges {
            if !m.range.is_finite() || m.range < 0.0 {
                return Err(Error::invalid(format!(
                    "observation at t={t}: bad range {} for {ap}",
                    m.range
                )));
            }
        }
        Ok(RttObservation { t, ranges })
    }

    /// Convenience constructor from `(ap_id, range)` pairs without stddev.
    pub fn from_ranges<'a>(t: f64, ranges: impl IntoIterator<Item = (&'a str, f64)>) -> Result<Self> {
        let map = ranges
            .into_iter()
            .map(|(ap, r)| (ap.to_string(), RangeMeasurement { range: r, stddev: None }))
            .collect();
        RttObservation::new(t, map)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedPose {
    pub t: f64,
    pub pose: Pose2,
}

/// Time-ordered sequence of poses with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    points: Vec<TimedPose>,
}

impl Trajectory {
    pub fn new(points: Vec<TimedPose>) -> Result<Self> {
        for (n, w) in points.windows(2).enumerate() {
            if !(w[1].t > w[0].t) {
                return Err(Error::invalid(format!(
                    "trajectory timestamps not strictly increasing at point {}",
                    n + 1
                )));
            }
        }
        Ok(Trajectory { points })
    }

    pub fn points(&self) -> &[TimedPose] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn poses(&self) -> Vec<Pose2> {
        self.points.iter().map(|p| p.pose).collect()
    }

    pub fn first(&self) -> Option<&TimedPose> {
        self.points.first()
    }

    pub fn last(&self) -> Option<&TimedPose> {
        self.points.last()
    }

    /// Same timestamps, new poses.
    pub fn with_poses(&self, poses: &[Pose2]) -> Result<Self> {
        if poses.len() != self.points.len() {
            return Err(Error::invalid("pose count does not match trajectory length"));
        }
        Ok(Trajectory {
            points: self
                .points
                .iter()
                .zip(poses)
                .map(|(p, &pose)| TimedPose { t: p.t, pose })
                .collect(),
        })
    }

    /// Linearly interpolated position at `t`; `None` outside the covered span.
    pub fn position_at(&self, t: f64) -> Option<(f64, f64)> {
        let first = self.points.first()?;
        let last = self.points.last()?;
        if t < first.t || t > last.t {
            return None;
        }
        let hi = self.points.partition_point(|p| p.t < t);
        if self.points[hi].t == t {
            let p = &self.points[hi].pose;
            return Some((p.x, p.y));
        }
        let (a, b) = (&self.points[hi - 1], &self.points[hi]);
        let u = (t - a.t) / (b.t - a.t);
        Some((
            a.pose.x + u * (b.pose.x - a.pose.x),
            a.pose.y + u * (b.pose.y - a.pose.y),
        ))
    }
}
