//! Step heading from a magnetometer anchor plus integrated yaw rate.
//!
//! This is a deliberately reduced attitude estimator. The first sample fixes
//! the gravity direction (from the accelerometer) and the absolute yaw (from
//! the tilt-compensated magnetometer). After that, yaw is the running
//! trapezoidal integral of the gyro rate projected onto that gravity axis.
//! Heading is measured counter-clockwise from the horizontal projection of
//! the magnetic field.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::pose::wrap;
use crate::records::ImuSample;

/// Absolute yaw of the device x-axis, levelled using `accel` as "up".
pub fn tilt_compensated_yaw(accel: &Vector3<f64>, mag: &Vector3<f64>) -> Result<f64> {
    let a_norm = accel.norm();
    if !(a_norm > 0.0) {
        return Err(Error::invalid("zero acceleration at heading anchor"));
    }
    if !(mag.norm() > 0.0) {
        return Err(Error::invalid("zero-magnitude magnetic field at heading anchor"));
    }
    let up = accel / a_norm;
    let m_h = mag - up * mag.dot(&up);
    let x = Vector3::x();
    let x_h = x - up * x.dot(&up);
    if !(m_h.norm() > 1e-9 * mag.norm()) || !(x_h.norm() > 1e-9) {
        return Err(Error::invalid("magnetic field has no horizontal component"));
    }
    Ok(up.dot(&m_h.cross(&x_h)).atan2(m_h.dot(&x_h)))
}

/// Continuous yaw estimate over an IMU log.
#[derive(Debug, Clone)]
pub struct HeadingTrack {
    times: Vec<f64>,
    yaw: Vec<f64>,
}

impl HeadingTrack {
    pub fn new(imu: &[ImuSample]) -> Result<Self> {
        let first = imu
            .first()
            .ok_or_else(|| Error::invalid("no IMU samples for heading estimation"))?;
        let anchor = tilt_compensated_yaw(&first.accel, &first.mag)?;
        let up = first.accel.normalize();

        let mut times = Vec::with_capacity(imu.len());
        let mut yaw = Vec::with_capacity(imu.len());
        times.push(first.t);
        yaw.push(anchor);
        let mut prev_rate = first.gyro.dot(&up);
        for pair in imu.windows(2) {
            let dt = pair[1].t - pair[0].t;
            if !(dt > 0.0) {
                return Err(Error::invalid("IMU timestamps not strictly increasing"));
            }
            let rate = pair[1].gyro.dot(&up);
            let next = yaw[yaw.len() - 1] + 0.5 * (prev_rate + rate) * dt;
            times.push(pair[1].t);
            yaw.push(next);
            prev_rate = rate;
        }
        Ok(HeadingTrack { times, yaw })
    }

    /// Unwrapped yaw at `t`, linearly interpolated; `None` outside the log.
    pub fn yaw_at(&self, t: f64) -> Option<f64> {
        let (&t0, &t1) = (self.times.first()?, self.times.last()?);
        if t < t0 || t > t1 {
            return None;
        }
        let hi = self.times.partition_point(|&s| s < t);
        if self.times[hi] == t {
            return Some(self.yaw[hi]);
        }
        let u = (t - self.times[hi - 1]) / (self.times[hi] - self.times[hi - 1]);
        Some(self.yaw[hi - 1] + u * (self.yaw[hi] - self.yaw[hi - 1]))
    }

    /// Heading for a step: yaw sampled at the interval midpoint, wrapped.
    pub fn step_heading(&self, step: (f64, f64)) -> Result<f64> {
        let (a, b) = step;
        let has_sample = {
            let lo = self.times.partition_point(|&s| s < a);
            lo < self.times.len() && self.times[lo] <= b
        };
        if !has_sample {
            return Err(Error::invalid(format!("no IMU samples within step [{a}, {b}]")));
        }
        let mid = 0.5 * (a + b);
        self.yaw_at(mid)
            .map(wrap)
            .ok_or_else(|| Error::invalid(format!("step midpoint {mid} outside IMU log")))
    }
}

/// Heading of one step interval. Builds a fresh [`HeadingTrack`]; reuse a
/// track directly when estimating many steps from the same log.
pub fn estimate_heading(imu: &[ImuSample], step: (f64, f64)) -> Result<f64> {
    HeadingTrack::new(imu)?.step_heading(step)
}
