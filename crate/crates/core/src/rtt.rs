//! Loop-closure candidates from WiFi RTT observation similarity.
//!
//! Two observations whose range vectors are close are taken as evidence that
//! the walker was at nearby places. No access-point positions are used.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LoopPair;
use crate::records::RttObservation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    /// Range-space distance below which two observations match, meters.
    pub distance_threshold: f64,
    pub min_common_aps: usize,
    /// Minimum time between matched observations, seconds.
    pub min_separation: f64,
    pub max_candidates_per_obs: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            distance_threshold: 1.5,
            min_common_aps: 3,
            min_separation: 20.0,
            max_candidates_per_obs: 3,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.distance_threshold > 0.0) {
            return Err(Error::Config("cluster.distance_threshold must be positive".into()));
        }
        if self.min_common_aps < 2 {
            return Err(Error::Config("cluster.min_common_aps must be at least 2".into()));
        }
        if !(self.min_separation > 0.0) {
            return Err(Error::Config("cluster.min_separation must be positive".into()));
        }
        Ok(())
    }
}

/// A pair of observations `(obs_i, obs_k)`, `obs_k < obs_i`, whose range
/// vectors are within the clustering threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopClosureCandidate {
    pub obs_i: usize,
    pub obs_k: usize,
    pub distance: f64,
    pub common_ap_count: usize,
}

/// Number of distinct access points seen anywhere in the session.
pub fn session_ap_count(observations: &[RttObservation]) -> usize {
    observations
        .iter()
        .flat_map(|o| o.ranges.keys())
        .collect::<BTreeSet<_>>()
        .len()
}

/// Euclidean distance between two range vectors over their shared access
/// points, rescaled by `sqrt(n_ref / n_common)` so that distances over
/// partial intersections are comparable to full-vector distances.
///
/// Returns `(f64::INFINITY, 0)` when no access point is shared.
pub fn rtt_distance(w_i: &RttObservation, w_k: &RttObservation, n_ref: usize) -> (f64, usize) {
    let mut sum = 0.0;
    let mut common = 0usize;
    let mut a = w_i.ranges.iter().peekable();
    let mut b = w_k.ranges.iter().peekable();
    while let (Some((ka, ma)), Some((kb, mb))) = (a.peek(), b.peek()) {
        match ka.cmp(kb) {
            std::cmp::Ordering::Less => {
                a.next();
            }
            std::cmp::Ordering::Greater => {
                b.next();
            }
            std::cmp::Ordering::Equal => {
                let d = ma.range - mb.range;
                sum += d * d;
                common += 1;
                a.next();
                b.next();
            }
        }
    }
    if common == 0 {
        return (f64::INFINITY, 0);
    }
    let scale = n_ref.max(common) as f64 / common as f64;
    ((sum * scale).sqrt(), common)
}

/// Finds loop-closure candidates among time-ordered observations.
///
/// For each observation `i`, every earlier observation at least
/// `min_separation` seconds older is compared; matches below the distance
/// threshold with enough shared access points are kept, at most
/// `max_candidates_per_obs` per `i` (smallest distance first, ties broken by
/// the older index). Output is sorted by `(obs_i, obs_k)`.
pub fn detect_loop_closures(
    observations: &[RttObservation],
    config: &ClusterConfig,
) -> Result<Vec<LoopClosureCandidate>> {
    config.validate()?;
    if observations.windows(2).any(|w| w[1].t < w[0].t) {
        return Err(Error::invalid("RTT observations are not time-ordered"));
    }
    let n_ref = session_ap_count(observations);
    let mut out = Vec::new();
    let mut per_obs = Vec::new();
    for (i, w_i) in observations.iter().enumerate() {
        let cutoff = w_i.t - config.min_separation;
        // observations are time-ordered, so eligible k form a prefix
        let eligible = observations[..i].partition_point(|o| o.t <= cutoff);
        per_obs.clear();
        for (k, w_k) in observations[..eligible].iter().enumerate() {
            if w_i.t - w_k.t < config.min_separation {
                continue;
            }
            let (distance, common) = rtt_distance(w_i, w_k, n_ref);
            if distance < config.distance_threshold && common >= config.min_common_aps {
                per_obs.push(LoopClosureCandidate {
                    obs_i: i,
                    obs_k: k,
                    distance,
                    common_ap_count: common,
                });
            }
        }
        per_obs.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.obs_k.cmp(&b.obs_k)));
        per_obs.truncate(config.max_candidates_per_obs);
        per_obs.sort_by_key(|c| c.obs_k);
        out.extend_from_slice(&per_obs);
    }
    Ok(out)
}

fn nearest_node(node_times: &[f64], t: f64) -> usize {
    let hi = node_times.partition_point(|&s| s < t);
    if hi == 0 {
        0
    } else if hi == node_times.len() {
        node_times.len() - 1
    } else if t - node_times[hi - 1] <= node_times[hi] - t {
        hi - 1
    } else {
        hi
    }
}

/// Maps observation-level candidates onto trajectory nodes.
///
/// Each observation goes to the node nearest in time (earlier node on ties).
/// Pairs landing on the same or adjacent nodes are dropped, and duplicate
/// node pairs keep the smallest RTT distance. Output is sorted by
/// `(node_i, node_k)` with `node_i > node_k`.
pub fn attach_to_nodes(
    candidates: &[LoopClosureCandidate],
    obs_times: &[f64],
    node_times: &[f64],
) -> Result<Vec<LoopPair>> {
    if node_times.is_empty() {
        return Err(Error::invalid("no trajectory nodes to attach loop closures to"));
    }
    if node_times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("node timestamps not strictly increasing"));
    }
    let mut best: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for c in candidates {
        let (Some(&ti), Some(&tk)) = (obs_times.get(c.obs_i), obs_times.get(c.obs_k)) else {
            return Err(Error::invalid(format!(
                "candidate ({}, {}) references a missing observation",
                c.obs_i, c.obs_k
            )));
        };
        let a = nearest_node(node_times, ti);
        let b = nearest_node(node_times, tk);
        let (node_i, node_k) = if a >= b { (a, b) } else { (b, a) };
        if node_i - node_k <= 1 {
            continue;
        }
        best.entry((node_i, node_k))
            .and_modify(|d| *d = d.min(c.distance))
            .or_insert(c.distance);
    }
    Ok(best
        .into_iter()
        .map(|((node_i, node_k), d)| LoopPair {
            node_i,
            node_k,
            rtt_distance: Some(d),
        })
        .collect())
}
