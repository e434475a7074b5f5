//! Trajectory accuracy metrics against ground truth.
//!
//! Errors are planar distances in a shared anchored frame; no alignment is
//! applied, so heading drift shows up in full.

use std::fmt;

use crate::error::{Error, Result};
use crate::records::Trajectory;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub rmse: f64,
    pub endpoint_error: f64,
    /// `(error, cumulative fraction)`, sorted by error.
    pub cdf: Vec<(f64, f64)>,
    pub percentile_90: f64,
}

/// Distance from each estimate point to ground truth interpolated at the
/// same timestamp.
pub fn per_point_errors(estimate: &Trajectory, ground_truth: &Trajectory) -> Result<Vec<f64>> {
    if estimate.is_empty() || ground_truth.is_empty() {
        return Err(Error::invalid("trajectories must be non-empty"));
    }
    estimate
        .points()
        .iter()
        .map(|p| {
            let (gx, gy) = ground_truth.position_at(p.t).ok_or_else(|| {
                Error::invalid(format!("estimate time {} outside ground-truth span", p.t))
            })?;
            Ok((p.pose.x - gx).hypot(p.pose.y - gy))
        })
        .collect()
}

/// Root mean square over the number of errors.
pub fn rmse(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::invalid("rmse of an empty error sequence"));
    }
    Ok((errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt())
}

pub fn endpoint_error(estimate: &Trajectory, ground_truth: &Trajectory) -> Result<f64> {
    let last = estimate
        .last()
        .ok_or_else(|| Error::invalid("estimate trajectory is empty"))?;
    if ground_truth.is_empty() {
        return Err(Error::invalid("ground-truth trajectory is empty"));
    }
    let (gx, gy) = ground_truth
        .position_at(last.t)
        .ok_or_else(|| Error::invalid(format!("estimate time {} outside ground-truth span", last.t)))?;
    Ok((last.pose.x - gx).hypot(last.pose.y - gy))
}

/// Empirical CDF and the 90th percentile (smallest error whose cumulative
/// fraction reaches 0.9, no interpolation).
pub fn error_cdf(errors: &[f64]) -> Result<(Vec<(f64, f64)>, f64)> {
    if errors.is_empty() {
        return Err(Error::invalid("CDF of an empty error sequence"));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let cdf = sorted
        .iter()
        .enumerate()
        .map(|(i, &e)| (e, (i + 1) as f64 / n as f64))
        .collect();
    // ceil(0.9 n) in integers
    let rank = (9 * n).div_ceil(10);
    Ok((cdf, sorted[rank - 1]))
}

pub fn evaluate(estimate: &Trajectory, ground_truth: &Trajectory) -> Result<MetricsReport> {
    let errors = per_point_errors(estimate, ground_truth)?;
    let (cdf, percentile_90) = error_cdf(&errors)?;
    Ok(MetricsReport {
        rmse: rmse(&errors)?,
        endpoint_error: endpoint_error(estimate, ground_truth)?,
        cdf,
        percentile_90,
    })
}

impl MetricsReport {
    /// Two-column `error_m,fraction` CSV for plotting.
    pub fn cdf_csv(&self) -> String {
        let mut s = String::from("error_m,fraction\n");
        for (e, f) in &self.cdf {
            s.push_str(&format!("{e},{f}\n"));
        }
        s
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "rmse_m: {}", self.rmse)?;
        writeln!(f, "endpoint_error_m: {}", self.endpoint_error)?;
        writeln!(f, "percentile_90_m: {}", self.percentile_90)?;
        writeln!(f, "points: {}", self.cdf.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::Pose2;
    use crate::records::TimedPose;
    use proptest::prelude::*;

    fn traj(pts: &[(f64, f64, f64)]) -> Trajectory {
        Trajectory::new(
            pts.iter()
                .map(|&(t, x, y)| TimedPose { t, pose: Pose2::new(x, y, 0.0) })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn per_point_examples() {
        let g = traj(&[(0.0, 0.0, 0.0), (1.0, 1.0, 2.0), (2.0, 3.0, 2.0)]);
        assert_eq!(per_point_errors(&g, &g).unwrap(), vec![0.0; 3]);
        let shifted = traj(&[(0.0, 1.0, 0.0), (1.0, 2.0, 2.0), (2.0, 4.0, 2.0)]);
        assert_eq!(per_point_errors(&shifted, &g).unwrap(), vec![1.0; 3]);
        let g = traj(&[(0.0, 0.0, 0.0), (2.0, 2.0, 0.0)]);
        let e = traj(&[(1.0, 1.0, 0.5)]);
        assert_eq!(per_point_errors(&e, &g).unwrap(), vec![0.5]);
        let outside = traj(&[(3.0, 0.0, 0.0)]);
        assert!(per_point_errors(&outside, &g).is_err());
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[0.0, 0.0]).unwrap(), 0.0);
        assert!((rmse(&[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert!(rmse(&[]).is_err());
    }

    #[test]
    fn endpoint_examples() {
        let g = traj(&[(0.0, 0.0, 0.0), (1.0, 10.0, 1.0)]);
        assert_eq!(endpoint_error(&g, &g).unwrap(), 0.0);
        let e = traj(&[(0.0, 0.0, 0.0), (1.0, 10.0, 0.0)]);
        assert_eq!(endpoint_error(&e, &g).unwrap(), 1.0);
    }

    #[test]
    fn cdf_examples() {
        let (_, p) = error_cdf(&[0.0; 5]).unwrap();
        assert_eq!(p, 0.0);
        let errs: Vec<f64> = (1..=10).map(f64::from).collect();
        let (cdf, p) = error_cdf(&errs).unwrap();
        assert_eq!(p, 9.0);
        assert_eq!(*cdf.last().unwrap(), (10.0, 1.0));
        assert!(error_cdf(&[]).is_err());
        // 100 samples: rank 90 exactly
        let errs: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(error_cdf(&errs).unwrap().1, 90.0);
    }

    proptest! {
        #[test]
        fn rmse_dominates_mean_abs(errs in proptest::collection::vec(0.0..100.0f64, 1..200)) {
            let mae = errs.iter().sum::<f64>() / errs.len() as f64;
            prop_assert!(rmse(&errs).unwrap() + 1e-12 >= mae);
            prop_assert!(mae >= 0.0);
        }

        #[test]
        fn cdf_is_permutation_invariant_and_monotone(mut errs in proptest::collection::vec(0.0..100.0f64, 1..100)) {
            let a = error_cdf(&errs).unwrap();
            errs.reverse();
            let b = error_cdf(&errs).unwrap();
            prop_assert_eq!(&a, &b);
            for w in a.0.windows(2) {
                prop_assert!(w[0].0 <= w[1].0 && w[0].1 < w[1].1);
            }
            prop_assert_eq!(a.0.last().unwrap().1, 1.0);
        }
    }
}
