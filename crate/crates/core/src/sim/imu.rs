//! Raw 100 Hz IMU synthesis from a step sequence.
//!
//! The device is held level. Each step slot of `step_duration` seconds opens
//! with a turn phase (constant yaw rate carrying the heading change), then a
//! one-period sinusoidal burst on the vertical accelerometer, then rest. The
//! burst amplitude is chosen so the low-pass-filtered peak-to-peak range gives
//! back the step length through the Weinberg model.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pdr::{lowpass, PdrConfig};
use crate::pose::wrap;
use crate::records::{ImuSample, StepEvent};

pub const GRAVITY: f64 = 9.81;
const MAG_HORIZONTAL: f64 = 20.0;
const MAG_VERTICAL: f64 = -40.0;

const TURN_END: f64 = 0.2;
const BURST_START: f64 = 0.2;
const BURST_END: f64 = 0.8;
const BURST_CYCLES: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImuSynthConfig {
    pub rate: f64,
    pub step_duration: f64,
}

impl Default for ImuSynthConfig {
    fn default() -> Self {
        ImuSynthConfig {
            rate: 100.0,
            step_duration: 1.0,
        }
    }
}

fn burst_shape(u: f64) -> f64 {
    if (BURST_START..BURST_END).contains(&u) {
        let v = (u - BURST_START) / (BURST_END - BURST_START);
        (std::f64::consts::TAU * BURST_CYCLES * v).sin() * (std::f64::consts::PI * v).sin().sqrt()
    } else {
        0.0
    }
}

/// Filtered peak-to-peak range of a unit-amplitude burst followed by rest.
fn unit_burst_range(cfg: &ImuSynthConfig, pdr: &PdrConfig) -> Result<f64> {
    let n = (cfg.step_duration * cfg.rate).round() as usize;
    let series: Vec<(f64, f64)> = (0..3 * n)
        .map(|k| {
            let t = k as f64 / cfg.rate;
            let u = t / cfg.step_duration;
            (t, if u < 1.0 { burst_shape(u) } else { 0.0 })
        })
        .collect();
    let filtered = lowpass(&series, pdr.lowpass_cutoff)?;
    let (lo, hi) = filtered
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, v)| (lo.min(v), hi.max(v)));
    Ok(hi - lo)
}

/// Synthesizes an IMU log whose steps are `steps` (slot j spans
/// `[j·T, (j+1)·T]`). Slots hold `round(step_duration·rate)` samples. One extra rest slot is appended so the final burst is
/// bracketed by steady samples.
pub fn synth_imu(steps: &[StepEvent], cfg: &ImuSynthConfig, pdr: &PdrConfig) -> Result<Vec<ImuSample>> {
    if !(cfg.rate > 0.0) || !(cfg.step_duration > 0.0) {
        return Err(Error::Config("imu rate and step_duration must be positive".into()));
    }
    pdr.validate()?;
    if steps.is_empty() {
        return Ok(Vec::new());
    }
    let per_slot = (cfg.step_duration * cfg.rate).round() as usize;
    let turn_samples = (TURN_END * per_slot as f64).round() as usize;
    if turn_samples == 0 {
        return Err(Error::Config("imu rate too low for the step duration".into()));
    }
    let unit = unit_burst_range(cfg, pdr)?;
    let amplitudes: Vec<f64> = steps
        .iter()
        .map(|s| (s.length / pdr.weinberg_h).powi(4) / unit)
        .collect();
    // Trapezoidal integration of this piecewise-constant rate over the turn
    // samples recovers the heading change exactly.
    let mut turn_rates = Vec::with_capacity(steps.len());
    let mut prev = steps[0].heading;
    for s in steps {
        turn_rates.push(wrap(s.heading - prev) * cfg.rate / turn_samples as f64);
        prev = s.heading;
    }

    let count = (steps.len() + 1) * per_slot + 1;
    let mut yaw = steps[0].heading;
    let mut last_rate = 0.0;
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let (slot, i) = (k / per_slot, k % per_slot);
        let (rate, vertical) = if slot < steps.len() {
            let u = i as f64 / per_slot as f64;
            (
                if i < turn_samples { turn_rates[slot] } else { 0.0 },
                amplitudes[slot] * burst_shape(u),
            )
        } else {
            (0.0, 0.0)
        };
        if k > 0 {
            yaw += 0.5 * (last_rate + rate) / cfg.rate;
        }
        last_rate = rate;
        out.push(ImuSample {
            t: k as f64 / cfg.rate,
            accel: Vector3::new(0.0, 0.0, GRAVITY + vertical),
            gyro: Vector3::new(0.0, 0.0, rate),
            mag: Vector3::new(MAG_HORIZONTAL * yaw.cos(), -MAG_HORIZONTAL * yaw.sin(), MAG_VERTICAL),
        });
    }
    Ok(out)
}
