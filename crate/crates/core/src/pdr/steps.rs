//! Step detection on acceleration magnitude and step-length estimation.

use crate::error::{Error, Result};
use crate::pdr::PdrConfig;

/// Rolling standard deviation over a centered window of `w` samples.
///
/// Windows are clamped at the series ends so every output uses exactly `w`
/// samples. Requires `values.len() >= w >= 2`.
pub(crate) fn rolling_stddev(values: &[f64], w: usize) -> Vec<f64> {
    let n = values.len();
    debug_assert!(w >= 2 && n >= w);
    let half = w / 2;
    (0..n)
        .map(|i| {
            let start = i.saturating_sub(half).min(n - w);
            let win = &values[start..start + w];
            let mean = win.iter().sum::<f64>() / w as f64;
            let var = win.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w as f64;
            var.sqrt()
        })
        .collect()
}

/// Detects steps as moving bursts bracketed by steady spans.
///
/// A sample is "moving" when the rolling standard deviation exceeds the
/// configured threshold. Each maximal run of moving samples that has a steady
/// sample on both sides and lasts at least `min_step_duration` yields one
/// interval running from the last steady sample before the burst to the first
/// steady sample after it. Consecutive intervals may share an endpoint but
/// never overlap.
pub fn detect_steps(magnitudes: &[(f64, f64)], config: &PdrConfig) -> Vec<(f64, f64)> {
    let w = config.window_w;
    if w < 2 || magnitudes.len() < w {
        return Vec::new();
    }
    let values: Vec<f64> = magnitudes.iter().map(|m| m.1).collect();
    let moving: Vec<bool> = rolling_stddev(&values, w)
        .into_iter()
        .map(|s| s > config.stddev_threshold)
        .collect();

    let mut out = Vec::new();
    let mut i = 0;
    let n = moving.len();
    while i < n {
        if !moving[i] {
            i += 1;
            continue;
        }
        let first = i;
        while i < n && moving[i] {
            i += 1;
        }
        let last = i - 1;
        // bursts touching either end of the log are not bracketed
        if first == 0 || i == n {
            continue;
        }
        if magnitudes[last].0 - magnitudes[first].0 >= config.min_step_duration {
            out.push((magnitudes[first - 1].0, magnitudes[i].0));
        }
    }
    out
}

/// Weinberg step length: `h · (max − min)^(1/4)` over the filtered magnitudes
/// of one step.
pub fn step_length(segment: &[f64], h: f64) -> Result<f64> {
    if segment.is_empty() {
        return Err(Error::invalid("step segment is empty"));
    }
    let (lo, hi) = segment
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    Ok(h * (hi - lo).sqrt().sqrt())
}
