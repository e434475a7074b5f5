//! Second-order Butterworth low-pass filter.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

/// Biquad coefficients (normalized so `a0 = 1`).
#[derive(Debug, Clone, Copy)]
pub(crate) struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    /// Butterworth low-pass via the bilinear transform with pre-warping.
    pub(crate) fn butterworth_lowpass(cutoff_hz: f64, sample_rate_hz: f64) -> Result<Self> {
        let nyquist = 0.5 * sample_rate_hz;
        if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
            return Err(Error::invalid(format!(
                "low-pass cutoff {cutoff_hz} Hz must lie in (0, {nyquist}) Hz"
            )));
        }
        let k = (PI * cutoff_hz / sample_rate_hz).tan();
        let k2 = k * k;
        let norm = 1.0 / (1.0 + SQRT_2 * k + k2);
        let b0 = k2 * norm;
        Ok(Biquad {
            b: [b0, 2.0 * b0, b0],
            a: [2.0 * (k2 - 1.0) * norm, (1.0 - SQRT_2 * k + k2) * norm],
        })
    }

    /// Runs the filter over `x` from a zero state.
    fn run(&self, x: &[f64]) -> Vec<f64> {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        x.iter()
            .map(|&x0| {
                let y0 = self.b[0] * x0 + self.b[1] * x1 + self.b[2] * x2
                    - self.a[0] * y1
                    - self.a[1] * y2;
                x2 = x1;
                x1 = x0;
                y2 = y1;
                y1 = y0;
                y0
            })
            .collect()
    }
}

/// Mean sample rate of a strictly increasing time series.
pub(crate) fn sample_rate(times: &[f64]) -> Option<f64> {
    if times.len() < 2 {
        return None;
    }
    let span = times[times.len() - 1] - times[0];
    (span > 0.0).then(|| (times.len() - 1) as f64 / span)
}

/// Causal low-pass over `(t, value)` samples.
///
/// The filter starts in steady state at the first sample, so a constant
/// series passes through bit-for-bit. Series shorter than two samples are
/// returned unchanged.
pub fn lowpass(series: &[(f64, f64)], cutoff_hz: f64) -> Result<Vec<(f64, f64)>> {
    if series.len() < 2 {
        return Ok(series.to_vec());
    }
    for w in series.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(Error::invalid("low-pass input timestamps not strictly increasing"));
        }
    }
    let times: Vec<f64> = series.iter().map(|s| s.0).collect();
    let fs = sample_rate(&times).expect("at least two increasing samples");
    let filter = Biquad::butterworth_lowpass(cutoff_hz, fs)?;
    let base = series[0].1;
    let dev: Vec<f64> = series.iter().map(|s| s.1 - base).collect();
    Ok(filter
        .run(&dev)
        .into_iter()
        .zip(&times)
        .map(|(y, &t)| (t, base + y))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, fs: f64, n: usize, amp: f64, offset: f64) -> Vec<(f64, f64)> {
        (0..n)
            .map(|i| {
                let t = i as f64 / fs;
                (t, offset + amp * (2.0 * PI * freq * t).sin())
            })
            .collect()
    }

    /// Magnitude response of a bilinear-transformed 2nd-order Butterworth,
    /// derived from the analog prototype |H(jΩ)|² = 1 / (1 + (Ω/Ωc)⁴).
    fn analytic_gain(f: f64, fc: f64, fs: f64) -> f64 {
        let w = (PI * f / fs).tan() / (PI * fc / fs).tan();
        1.0 / (1.0 + w.powi(4)).sqrt()
    }

    #[test]
    fn constant_series_is_preserved_exactly() {
        let s: Vec<_> = (0..500).map(|i| (i as f64 * 0.01, 9.81)).collect();
        let out = lowpass(&s, 3.0).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn short_series_unchanged() {
        assert!(lowpass(&[], 3.0).unwrap().is_empty());
        assert_eq!(lowpass(&[(0.0, 4.0)], 3.0).unwrap(), vec![(0.0, 4.0)]);
    }

    #[test]
    fn rejects_cutoff_above_nyquist() {
        let s = sine(1.0, 100.0, 100, 1.0, 0.0);
        assert!(lowpass(&s, 50.0).is_err());
        assert!(lowpass(&s, 0.0).is_err());
        assert!(lowpass(&s, 49.0).is_ok());
    }

    #[test]
    fn attenuates_ten_times_cutoff() {
        let (fs, fc) = (100.0, 3.0);
        let f = 10.0 * fc;
        let s = sine(f, fs, 2000, 1.0, 9.81);
        let out = lowpass(&s, fc).unwrap();
        // skip the start-up transient
        let tail = &out[1000..];
        let amp = tail
            .iter()
            .map(|p| (p.1 - 9.81).abs())
            .fold(0.0f64, f64::max);
        let expected = analytic_gain(f, fc, fs);
        assert!(amp < 0.2, "amplitude {amp}");
        assert!((amp - expected).abs() < 0.1 * expected + 1e-3, "{amp} vs {expected}");
    }

    #[test]
    fn passband_gain_matches_analytic_response() {
        let (fs, fc) = (100.0, 3.0);
        for f in [0.5, 1.0, 3.0, 6.0] {
            let out = lowpass(&sine(f, fs, 4000, 1.0, 0.0), fc).unwrap();
            let amp = out[2000..].iter().map(|p| p.1.abs()).fold(0.0f64, f64::max);
            let expected = analytic_gain(f, fc, fs);
            assert!((amp - expected).abs() < 0.01, "f={f}: {amp} vs {expected}");
        }
    }
}
