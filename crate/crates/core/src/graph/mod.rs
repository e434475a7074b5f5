//! Pose graph: nodes, odometry and loop-closure edges, residuals and costs.

mod format;

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

pub use format::{read_graph, write_graph};

use crate::error::{Error, Result};
use crate::pdr::pdr_trajectory;
use crate::pose::{wrap, Pose2};
use crate::records::StepEvent;

/// A loop-closure request between two trajectory nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopPair {
    pub node_i: usize,
    pub node_k: usize,
    /// RTT similarity distance that produced the pair, if it came from
    /// clustering.
    pub rtt_distance: Option<f64>,
}

impl LoopPair {
    pub fn new(node_i: usize, node_k: usize) -> Self {
        LoopPair {
            node_i,
            node_k,
            rtt_distance: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometryEdge {
    pub from: usize,
    pub to: usize,
    /// Relative motion from `from` to `to`, in the frame of `from`.
    pub measurement: Pose2,
    pub information: Matrix3<f64>,
}

/// Position-only "these two nodes are at the same place" constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopEdge {
    pub node_i: usize,
    pub node_k: usize,
    pub information: Matrix2<f64>,
    pub rtt_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PoseGraph {
    pub nodes: Vec<Pose2>,
    pub odometry: Vec<OdometryEdge>,
    pub loops: Vec<LoopEdge>,
}

/// Symmetric within 1e-12 and positive-definite.
pub(crate) fn is_spd<const N: usize>(m: &nalgebra::SMatrix<f64, N, N>) -> bool {
    if !m.iter().all(|v| v.is_finite()) {
        return false;
    }
    if (m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
        return false;
    }
    m.cholesky().is_some()
}

impl PoseGraph {
    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::invalid("pose graph has no nodes"));
        }
        if self.odometry.len() + 1 != self.nodes.len() {
            return Err(Error::invalid(format!(
                "{} nodes but {} odometry edges",
                self.nodes.len(),
                self.odometry.len()
            )));
        }
        if let Some(n) = self.nodes.iter().position(|p| !p.is_finite()) {
            return Err(Error::invalid(format!("node {n} is not finite")));
        }
        for (n, e) in self.odometry.iter().enumerate() {
            if e.from != n || e.to != n + 1 {
                return Err(Error::invalid(format!(
                    "odometry edge {n} connects {} -> {}, expected {n} -> {}",
                    e.from,
                    e.to,
                    n + 1
                )));
            }
            if !e.measurement.is_finite() || !is_spd(&e.information) {
                return Err(Error::invalid(format!("odometry edge {n} is malformed")));
            }
        }
        for (n, e) in self.loops.iter().enumerate() {
            check_loop_indices(e.node_i, e.node_k, self.nodes.len())?;
            if !is_spd(&e.information) {
                return Err(Error::invalid(format!("loop edge {n} information not SPD")));
            }
        }
        Ok(())
    }
}

fn check_loop_indices(i: usize, k: usize, node_count: usize) -> Result<()> {
    if i >= node_count || k >= node_count {
        return Err(Error::invalid(format!(
            "loop pair ({i}, {k}) out of range for {node_count} nodes"
        )));
    }
    if i.abs_diff(k) < 2 {
        return Err(Error::invalid(format!(
            "loop pair ({i}, {k}) joins the same or adjacent nodes"
        )));
    }
    Ok(())
}

/// Odometry information as a function of the measured step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OdometryInformation {
    /// `diag(1/σxy², 1/σxy², 1/σθ²)` with `σxy = xy_per_meter·L + xy_floor`.
    StepScaled {
        xy_per_meter: f64,
        xy_floor: f64,
        theta_sigma: f64,
    },
    Fixed(Matrix3<f64>),
}

impl OdometryInformation {
    pub fn for_step(&self, length: f64) -> Matrix3<f64> {
        match *self {
            OdometryInformation::StepScaled {
                xy_per_meter,
                xy_floor,
                theta_sigma,
            } => {
                let sxy = xy_per_meter * length + xy_floor;
                Matrix3::from_diagonal(&Vector3::new(
                    1.0 / (sxy * sxy),
                    1.0 / (sxy * sxy),
                    1.0 / (theta_sigma * theta_sigma),
                ))
            }
            OdometryInformation::Fixed(m) => m,
        }
    }
}

/// Information matrices used when assembling a graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InformationModel {
    pub odometry: OdometryInformation,
    pub loop_closure: Matrix2<f64>,
}

impl Default for InformationModel {
    fn default() -> Self {
        GraphConfig::default().information_model()
    }
}

/// Serializable noise settings behind [`InformationModel`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    pub odometry_xy_per_meter: f64,
    pub odometry_xy_floor: f64,
    pub odometry_theta_sigma: f64,
    /// Position slack of a loop closure, meters.
    pub loop_sigma: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            odometry_xy_per_meter: 0.05,
            odometry_xy_floor: 0.01,
            odometry_theta_sigma: 0.05,
            loop_sigma: 1.0,
        }
    }
}

impl GraphConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.odometry_xy_per_meter >= 0.0
            && self.odometry_xy_floor > 0.0
            && self.odometry_theta_sigma > 0.0
            && self.loop_sigma > 0.0;
        if !ok {
            return Err(Error::Config(
                "graph sigmas must be positive (odometry_xy_per_meter may be zero)".into(),
            ));
        }
        Ok(())
    }

    pub fn information_model(&self) -> InformationModel {
        let l = 1.0 / (self.loop_sigma * self.loop_sigma);
        InformationModel {
            odometry: OdometryInformation::StepScaled {
                xy_per_meter: self.odometry_xy_per_meter,
                xy_floor: self.odometry_xy_floor,
                theta_sigma: self.odometry_theta_sigma,
            },
            loop_closure: Matrix2::new(l, 0.0, 0.0, l),
        }
    }
}

/// Assembles a pose graph from dead-reckoned steps and loop pairs.
///
/// Nodes start at the dead-reckoned poses from `origin`; each odometry edge
/// measures the relative pose between consecutive nodes, so the initial
/// assignment has zero odometry error.
pub fn build_graph(
    steps: &[StepEvent],
    origin: Pose2,
    loop_pairs: &[LoopPair],
    info: &InformationModel,
) -> Result<PoseGraph> {
    let nodes = pdr_trajectory(steps, origin)?.poses();
    for p in loop_pairs {
        check_loop_indices(p.node_i, p.node_k, nodes.len())?;
    }
    if !is_spd(&info.loop_closure) {
        return Err(Error::invalid("loop information is not symmetric positive-definite"));
    }
    let odometry = steps
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let information = info.odometry.for_step(s.length);
            if !is_spd(&information) {
                return Err(Error::invalid(format!(
                    "odometry information for step {j} is not symmetric positive-definite"
                )));
            }
            Ok(OdometryEdge {
                from: j,
                to: j + 1,
                measurement: nodes[j].between(&nodes[j + 1]),
                information,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let loops = loop_pairs
        .iter()
        .map(|p| LoopEdge {
            node_i: p.node_i,
            node_k: p.node_k,
            information: info.loop_closure,
            rtt_distance: p.rtt_distance,
        })
        .collect();
    Ok(PoseGraph {
        nodes,
        odometry,
        loops,
    })
}

/// Error of the realized relative pose against the measurement:
/// `to_vector(Z⁻¹ ⊕ (X_from⁻¹ ⊕ X_to))`, heading wrapped.
pub fn odometry_residual(edge: &OdometryEdge, nodes: &[Pose2]) -> Vector3<f64> {
    let a = &nodes[edge.from];
    let b = &nodes[edge.to];
    let z = &edge.measurement;
    let (sa, ca) = a.theta.sin_cos();
    let (sz, cz) = z.theta.sin_cos();
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    // relative translation in frame a, then minus z, rotated into frame z
    let rx = ca * dx + sa * dy - z.x;
    let ry = -sa * dx + ca * dy - z.y;
    Vector3::new(
        cz * rx + sz * ry,
        -sz * rx + cz * ry,
        wrap(b.theta - a.theta - z.theta),
    )
}

/// Jacobians of [`odometry_residual`] with respect to `(x, y, θ)` of the
/// `from` and `to` nodes.
pub fn odometry_jacobians(edge: &OdometryEdge, nodes: &[Pose2]) -> (Matrix3<f64>, Matrix3<f64>) {
    let a = &nodes[edge.from];
    let b = &nodes[edge.to];
    let (sa, ca) = a.theta.sin_cos();
    let (sz, cz) = edge.measurement.theta.sin_cos();
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    // R_zᵀ R_aᵀ, and the derivative of R_aᵀ (dx, dy) with respect to θa
    let rza = Matrix2::new(cz, sz, -sz, cz) * Matrix2::new(ca, sa, -sa, ca);
    let d_rot = Matrix2::new(cz, sz, -sz, cz) * Vector2::new(-sa * dx + ca * dy, -ca * dx - sa * dy);
    let mut ja = Matrix3::zeros();
    ja.fixed_view_mut::<2, 2>(0, 0).copy_from(&(-rza));
    ja[(0, 2)] = d_rot[0];
    ja[(1, 2)] = d_rot[1];
    ja[(2, 2)] = -1.0;
    let mut jb = Matrix3::zeros();
    jb.fixed_view_mut::<2, 2>(0, 0).copy_from(&rza);
    jb[(2, 2)] = 1.0;
    (ja, jb)
}

/// `position(X_i) − position(X_k)`; headings are unconstrained.
pub fn loop_residual(edge: &LoopEdge, nodes: &[Pose2]) -> Vector2<f64> {
    nodes[edge.node_i].position() - nodes[edge.node_k].position()
}

/// Jacobians of [`loop_residual`] with respect to nodes `i` and `k`.
pub fn loop_jacobians() -> (Matrix2x3<f64>, Matrix2x3<f64>) {
    let ji = Matrix2x3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
    (ji, -ji)
}

/// Squared Mahalanobis error `rᵀ M r` of one loop edge.
pub fn loop_chi2(edge: &LoopEdge, nodes: &[Pose2]) -> f64 {
    let r = loop_residual(edge, nodes);
    (r.transpose() * edge.information * r)[0]
}

pub fn odometry_chi2(edge: &OdometryEdge, nodes: &[Pose2]) -> f64 {
    let r = odometry_residual(edge, nodes);
    (r.transpose() * edge.information * r)[0]
}

/// Unweighted quadratic costs `(Σ odometry rᵀMr, Σ loop rᵀMr)`.
pub fn chi2(graph: &PoseGraph) -> (f64, f64) {
    let odo = graph.odometry.iter().map(|e| odometry_chi2(e, &graph.nodes)).sum();
    let lp = graph.loops.iter().map(|e| loop_chi2(e, &graph.nodes)).sum();
    (odo, lp)
}
