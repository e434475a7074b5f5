//! Seeded walk simulator: ground truth, noisy steps, RTT observations.
//!
//! Everything is a pure function of the configuration (including its seed).
//! Independent random streams are used for step noise, RTT noise and false
//! loop injection so changing one never perturbs the others.

mod imu;

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use imu::{synth_imu, ImuSynthConfig};

use crate::error::{Error, Result};
use crate::graph::LoopPair;
use crate::pose::{wrap, Pose2};
use crate::records::{RangeMeasurement, RttObservation, StepEvent, TimedPose, Trajectory};

const STEP_STREAM: u64 = 1;
const RTT_STREAM: u64 = 2;
const LOOP_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccessPoint {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Closed polyline walked `laps` times, starting at the first waypoint.
    /// Each leg is covered in whole steps close to `nominal_step_length`.
    pub waypoints: Vec<[f64; 2]>,
    pub laps: usize,
    pub nominal_step_length: f64,
    /// Seconds per step.
    pub step_duration: f64,
    pub step_length_noise_sigma: f64,
    pub heading_noise_sigma: f64,
    /// Systematic heading bias added per step (cumulative).
    pub heading_drift_rate: f64,
    pub ap_positions: Vec<AccessPoint>,
    pub rtt_noise_sigma: f64,
    pub rtt_outlier_prob: f64,
    /// Upper bound of the positive outlier bias, meters.
    pub rtt_outlier_bias: f64,
    pub rtt_rate: f64,
    /// Distant loop pairs to inject as false positives.
    pub false_loops: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    /// A 10 m × 5 m area with an 8 m × 3 m walking loop (22 m per lap,
    /// 14 laps ≈ 308 m) and an access point at each corner.
    fn default() -> Self {
        let ap = |id: &str, x: f64, y: f64| AccessPoint {
            id: id.to_string(),
            x,
            y,
        };
        SimConfig {
            waypoints: vec![[0.0, 0.0], [8.0, 0.0], [8.0, 3.0], [0.0, 3.0]],
            laps: 14,
            nominal_step_length: 0.7,
            step_duration: 1.0,
            step_length_noise_sigma: 0.03,
            heading_noise_sigma: 0.02,
            heading_drift_rate: 0.002,
            ap_positions: vec![
                ap("ap0", -1.0, -1.0),
                ap("ap1", 9.0, -1.0),
                ap("ap2", 9.0, 4.0),
                ap("ap3", -1.0, 4.0),
            ],
            rtt_noise_sigma: 0.5,
            rtt_outlier_prob: 0.2,
            rtt_outlier_bias: 3.0,
            rtt_rate: 5.0,
            false_loops: 5,
            seed: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("sim.{m}")));
        if self.waypoints.len() < 2 {
            return bad("waypoints needs at least 2 points");
        }
        if self.waypoints.iter().flatten().any(|v| !v.is_finite()) {
            return bad("waypoints must be finite");
        }
        if self.laps == 0 {
            return bad("laps must be at least 1");
        }
        if !(self.nominal_step_length > 0.0) || !(self.step_duration > 0.0) {
            return bad("nominal_step_length and step_duration must be positive");
        }
        let sigmas = [
            self.step_length_noise_sigma,
            self.heading_noise_sigma,
            self.rtt_noise_sigma,
            self.rtt_outlier_bias,
        ];
        if sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) || !self.heading_drift_rate.is_finite() {
            return bad("noise parameters must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.rtt_outlier_prob) {
            return bad("rtt_outlier_prob must lie in [0, 1]");
        }
        if !(self.rtt_rate > 0.0) {
            return bad("rtt_rate must be positive");
        }
        if self.ap_positions.len() < 3 {
            return bad("ap_positions needs at least 3 entries");
        }
        let ids: BTreeSet<&str> = self.ap_positions.iter().map(|a| a.id.as_str()).collect();
        if ids.len() != self.ap_positions.len() || ids.iter().any(|id| id.is_empty() || id.contains(',')) {
            return bad("access point ids must be unique, non-empty and comma-free");
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub ground_truth: Trajectory,
    pub ground_truth_steps: Vec<StepEvent>,
    pub noisy_steps: Vec<StepEvent>,
    pub rtt_observations: Vec<RttObservation>,
    /// Node pairs that revisit the same place (within 1 m) on different legs.
    pub true_loop_pairs: Vec<LoopPair>,
}

const REVISIT_RADIUS: f64 = 1.0;
const FALSE_LOOP_MIN_SEPARATION: f64 = 5.0;

/// Node positions along the closed polyline. Each leg is split into
/// `round(len / step)` equal steps (at least one), so every waypoint is a node
/// and the walked length equals the polyline length exactly. Also returns the
/// largest per-leg step count.
fn walk_positions(waypoints: &[[f64; 2]], laps: usize, step: f64) -> (Vec<[f64; 2]>, usize) {
    let mut legs = Vec::new();
    for (i, &a) in waypoints.iter().enumerate() {
        let b = waypoints[(i + 1) % waypoints.len()];
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        if len > 0.0 {
            legs.push((a, b, ((len / step).round() as usize).max(1)));
        }
    }
    let mut positions = vec![waypoints[0]];
    for _ in 0..laps {
        for &(a, b, n) in &legs {
            for i in 1..=n {
                let u = i as f64 / n as f64;
                positions.push([a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])]);
            }
        }
    }
    (positions, legs.iter().map(|l| l.2).max().unwrap_or(0))
}

fn normal(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma).expect("sigma validated finite and non-negative")
}

/// Simulates a multi-lap walk with its sensor streams.
pub fn generate_walk(config: &SimConfig) -> Result<SimOutput> {
    config.validate()?;
    let (positions, max_leg_steps) = walk_positions(&config.waypoints, config.laps, config.nominal_step_length);
    let n_steps = positions.len() - 1;
    if n_steps == 0 {
        return Err(Error::invalid("waypoint polyline has zero length"));
    }
    let mut gt_steps = Vec::with_capacity(n_steps);
    for j in 0..n_steps {
        let (a, b) = (positions[j], positions[j + 1]);
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        gt_steps.push(StepEvent {
            index: j,
            t_start: j as f64 * config.step_duration,
            t_end: (j + 1) as f64 * config.step_duration,
            length: dx.hypot(dy),
            heading: dy.atan2(dx),
        });
    }

    let first_heading = gt_steps[0].heading;
    let ground_truth = Trajectory::new(
        positions
            .iter()
            .enumerate()
            .map(|(j, p)| TimedPose {
                t: j as f64 * config.step_duration,
                pose: Pose2::new(p[0], p[1], if j == 0 { first_heading } else { gt_steps[j - 1].heading }),
            })
            .collect(),
    )?;

    let mut rng = config.rng(STEP_STREAM);
    let len_noise = normal(config.step_length_noise_sigma);
    let head_noise = normal(config.heading_noise_sigma);
    let noisy_steps = gt_steps
        .iter()
        .map(|s| {
            let dl = len_noise.sample(&mut rng);
            let dh = head_noise.sample(&mut rng);
            StepEvent {
                length: (s.length + dl).max(0.0),
                heading: wrap(s.heading + dh + config.heading_drift_rate * s.index as f64),
                ..*s
            }
        })
        .collect();

    let rtt_observations = synth_rtt(&ground_truth, config)?;
    let true_loop_pairs = revisit_pairs(&positions, max_leg_steps);

    Ok(SimOutput {
        ground_truth,
        ground_truth_steps: gt_steps,
        noisy_steps,
        rtt_observations,
        true_loop_pairs,
    })
}

fn revisit_pairs(positions: &[[f64; 2]], min_gap: usize) -> Vec<LoopPair> {
    let mut out = Vec::new();
    for i in 0..positions.len() {
        for k in 0..i.saturating_sub(min_gap) {
            let d = (positions[i][0] - positions[k][0]).hypot(positions[i][1] - positions[k][1]);
            if d <= REVISIT_RADIUS {
                out.push(LoopPair::new(i, k));
            }
        }
    }
    out
}

/// Samples RTT observations at `rtt_rate` along the ground truth.
///
/// Each range is the true distance plus Gaussian noise and, with probability
/// `rtt_outlier_prob`, a positive bias uniform in `(0, rtt_outlier_bias]`,
/// clamped at zero.
pub fn synth_rtt(ground_truth: &Trajectory, config: &SimConfig) -> Result<Vec<RttObservation>> {
    let (Some(first), Some(last)) = (ground_truth.first(), ground_truth.last()) else {
        return Err(Error::invalid("ground truth is empty"));
    };
    if config.ap_positions.is_empty() {
        return Err(Error::invalid("no access points configured"));
    }
    let duration = last.t - first.t;
    let count = if duration > 0.0 {
        (duration * config.rtt_rate).ceil() as usize
    } else {
        1
    };
    let mut rng = config.rng(RTT_STREAM);
    let noise = normal(config.rtt_noise_sigma);
    let stddev = (config.rtt_noise_sigma > 0.0).then_some(config.rtt_noise_sigma);
    (0..count)
        .map(|k| {
            let t = first.t + k as f64 / config.rtt_rate;
            let (x, y) = ground_truth.position_at(t).expect("sample time inside walk");
            let mut ranges = BTreeMap::new();
            for ap in &config.ap_positions {
                let mut r = (x - ap.x).hypot(y - ap.y) + noise.sample(&mut rng);
                let u: f64 = rng.gen();
                if u < config.rtt_outlier_prob {
                    let v: f64 = rng.gen();
                    r += config.rtt_outlier_bias * (1.0 - v);
                }
                ranges.insert(
                    ap.id.clone(),
                    RangeMeasurement {
                        range: r.max(0.0),
                        stddev,
                    },
                );
            }
            RttObservation::new(t, ranges)
        })
        .collect()
}

/// Appends `k` random node pairs more than 5 m apart in ground truth.
///
/// Sampled pairs are non-adjacent and not already present. Fails when fewer
/// than `k` such pairs exist.
pub fn inject_false_loops(
    pairs: &[LoopPair],
    ground_truth: &Trajectory,
    k: usize,
    seed: u64,
) -> Result<Vec<LoopPair>> {
    let mut out = pairs.to_vec();
    if k == 0 {
        return Ok(out);
    }
    let pos = ground_truth.poses();
    let n = pos.len();
    let mut taken: BTreeSet<(usize, usize)> = pairs
        .iter()
        .map(|p| (p.node_i.max(p.node_k), p.node_i.min(p.node_k)))
        .collect();
    let eligible = |i: usize, j: usize, taken: &BTreeSet<(usize, usize)>| {
        i >= j + 2 && pos[i].distance(&pos[j]) > FALSE_LOOP_MIN_SEPARATION && !taken.contains(&(i, j))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(LOOP_STREAM);
    let mut added = 0;
    let mut attempts = 0usize;
    let budget = 1000 * k + 10 * n;
    while added < k && attempts < budget && n >= 3 {
        attempts += 1;
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        let (i, j) = (a.max(b), a.min(b));
        if eligible(i, j, &taken) {
            taken.insert((i, j));
            out.push(LoopPair::new(i, j));
            added += 1;
        }
    }
    if added < k {
        // sparse eligibility: fall back to exhaustive enumeration
        let rest: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .filter(|&(i, j)| eligible(i, j, &taken))
            .collect();
        let need = k - added;
        if rest.len() < need {
            return Err(Error::invalid(format!(
                "cannot inject {k} false loops: only {} node pairs are more than {FALSE_LOOP_MIN_SEPARATION} m apart",
                added + rest.len()
            )));
        }
        for idx in rand::seq::index::sample(&mut rng, rest.len(), need).into_vec() {
            let (i, j) = rest[idx];
            out.push(LoopPair::new(i, j));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdr::pdr_trajectory;

    fn noiseless() -> SimConfig {
        SimConfig {
            step_length_noise_sigma: 0.0,
            heading_noise_sigma: 0.0,
            heading_drift_rate: 0.0,
            rtt_noise_sigma: 0.0,
            rtt_outlier_prob: 0.0,
            ..SimConfig::default()
        }
    }

    #[test]
    fn noiseless_walk_reproduces_ground_truth() {
        let out = generate_walk(&noiseless()).unwrap();
        assert_eq!(out.noisy_steps, out.ground_truth_steps);
        let origin = out.ground_truth.first().unwrap().pose;
        let pdr = pdr_trajectory(&out.noisy_steps, origin).unwrap();
        assert_eq!(pdr.len(), out.ground_truth.len());
        for (a, b) in pdr.points().iter().zip(out.ground_truth.points()) {
            assert_eq!(a.t, b.t);
            assert!(a.pose.distance(&b.pose) < 1e-9);
        }
    }

    #[test]
    fn same_seed_same_output() {
        let a = generate_walk(&SimConfig::default()).unwrap();
        let b = generate_walk(&SimConfig::default()).unwrap();
        assert_eq!(a, b);
        let c = generate_walk(&SimConfig { seed: 2, ..SimConfig::default() }).unwrap();
        assert_ne!(a.noisy_steps, c.noisy_steps);
    }

    #[test]
    fn rectangle_path_length() {
        let cfg = SimConfig {
            waypoints: vec![[0.0, 0.0], [10.0, 0.0], [10.0, 5.0], [0.0, 5.0]],
            laps: 8,
            ..noiseless()
        };
        let out = generate_walk(&cfg).unwrap();
        let walked: f64 = out.ground_truth_steps.iter().map(|s| s.length).sum();
        assert!((walked - 240.0).abs() <= cfg.nominal_step_length, "{walked}");
        assert_eq!(out.ground_truth.len(), 8 * (14 + 7 + 14 + 7) + 1);
    }

    #[test]
    fn degenerate_inputs_rejected() {
        let zero = SimConfig {
            waypoints: vec![[1.0, 1.0], [1.0, 1.0]],
            ..SimConfig::default()
        };
        assert!(generate_walk(&zero).is_err());
        assert!(generate_walk(&SimConfig { laps: 0, ..SimConfig::default() }).is_err());
        assert!(generate_walk(&SimConfig { rtt_outlier_prob: 1.5, ..SimConfig::default() }).is_err());
    }

    #[test]
    fn true_pairs_are_real_revisits() {
        let out = generate_walk(&noiseless()).unwrap();
        assert!(!out.true_loop_pairs.is_empty());
        let pos = out.ground_truth.poses();
        for p in &out.true_loop_pairs {
            assert!(pos[p.node_i].distance(&pos[p.node_k]) <= 1.0);
            assert!(p.node_i - p.node_k > 11);
        }
    }

    #[test]
    fn rtt_ranges_are_exact_without_noise() {
        let cfg = noiseless();
        let out = generate_walk(&cfg).unwrap();
        for o in &out.rtt_observations {
            let (x, y) = out.ground_truth.position_at(o.t).unwrap();
            for ap in &cfg.ap_positions {
                assert_eq!(o.ranges[&ap.id].range, (x - ap.x).hypot(y - ap.y));
            }
        }
    }

    #[test]
    fn device_at_access_point_reads_zero() {
        let cfg = SimConfig {
            ap_positions: vec![
                AccessPoint { id: "a".into(), x: 0.0, y: 0.0 },
                AccessPoint { id: "b".into(), x: 5.0, y: 5.0 },
                AccessPoint { id: "c".into(), x: -5.0, y: 5.0 },
            ],
            ..noiseless()
        };
        let out = generate_walk(&cfg).unwrap();
        assert_eq!(out.rtt_observations[0].ranges["a"].range, 0.0);
    }

    #[test]
    fn rtt_count_and_span() {
        let out = generate_walk(&SimConfig::default()).unwrap();
        let duration = out.ground_truth.last().unwrap().t;
        assert_eq!(out.rtt_observations.len(), (duration * 5.0).ceil() as usize);
        assert!(out.rtt_observations.iter().all(|o| o.t >= 0.0 && o.t <= duration));
    }

    #[test]
    fn outlier_rate_is_plausible() {
        // zero Gaussian noise isolates the outliers: any range above truth
        let cfg = SimConfig {
            rtt_noise_sigma: 0.0,
            rtt_outlier_prob: 0.2,
            waypoints: vec![[0.0, 0.0], [10.0, 0.0]],
            laps: 3,
            nominal_step_length: 0.5,
            ..noiseless()
        };
        let gt = generate_walk(&cfg).unwrap().ground_truth;
        let obs = synth_rtt(&gt, &cfg).unwrap();
        let mut pairs = 0;
        let mut outliers = 0;
        for o in obs.iter().take(250) {
            let (x, y) = gt.position_at(o.t).unwrap();
            for ap in &cfg.ap_positions {
                pairs += 1;
                if o.ranges[&ap.id].range > (x - ap.x).hypot(y - ap.y) {
                    outliers += 1;
                }
            }
        }
        assert_eq!(pairs, 1000);
        assert!((150..=250).contains(&outliers), "{outliers}");
    }

    #[test]
    fn false_loops() {
        let out = generate_walk(&SimConfig::default()).unwrap();
        let base = out.true_loop_pairs.clone();
        assert_eq!(inject_false_loops(&base, &out.ground_truth, 0, 9).unwrap(), base);
        let a = inject_false_loops(&base, &out.ground_truth, 5, 9).unwrap();
        let b = inject_false_loops(&base, &out.ground_truth, 5, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), base.len() + 5);
        let pos = out.ground_truth.poses();
        for p in &a[base.len()..] {
            assert!(pos[p.node_i].distance(&pos[p.node_k]) > 5.0);
        }
        // a 4 m walk has no pair 5 m apart
        let tiny = generate_walk(&SimConfig {
            waypoints: vec![[0.0, 0.0], [2.0, 0.0]],
            laps: 1,
            ..noiseless()
        })
        .unwrap();
        assert!(inject_false_loops(&[], &tiny.ground_truth, 1, 0).is_err());
    }
}
