//! Robust pose-graph optimisation with per-loop-edge scaling.
//!
//! Loop closures are weighted by `s = min(1, 2C / (C + χ²))`, where `χ²` is
//! the edge's current Mahalanobis error. Within an outer iteration the
//! weights are frozen and a damped Gauss-Newton step is taken on the
//! weighted least-squares problem (iteratively reweighted least squares).
//!
//! Step acceptance uses the cost whose gradient these weights reproduce:
//! `ρ(χ²) = χ²` for `χ² ≤ C` and `C(3χ² − C)/(C + χ²)` beyond, which is
//! continuous, increasing and concave. Concavity makes every frozen-weight
//! decrease a decrease of this cost, so accepted iterations are monotone.

mod sparse;

use std::fmt;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{loop_chi2, loop_residual, odometry_chi2, odometry_jacobians, odometry_residual, PoseGraph};
use crate::pose::{wrap, Pose2};
use sparse::{BlockSystem, EliminationOrder};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Scaling breakpoint `C` (> 0).
    pub free_parameter_c: f64,
    pub max_iterations: usize,
    pub rel_cost_tolerance: f64,
    pub step_tolerance: f64,
    pub initial_damping: f64,
    /// `false` weights every loop closure equally (plain least squares).
    pub robust_enabled: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            free_parameter_c: 1.0,
            max_iterations: 100,
            rel_cost_tolerance: 1e-9,
            step_tolerance: 1e-10,
            initial_damping: 1e-6,
            robust_enabled: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.free_parameter_c > 0.0 && self.free_parameter_c.is_finite()) {
            return Err(Error::Config("solver.free_parameter_c must be positive".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::Config("solver.max_iterations must be at least 1".into()));
        }
        if !(self.rel_cost_tolerance >= 0.0 && self.step_tolerance >= 0.0) {
            return Err(Error::Config("solver tolerances must be non-negative".into()));
        }
        if !(self.initial_damping >= 0.0 && self.initial_damping.is_finite()) {
            return Err(Error::Config("solver.initial_damping must be non-negative".into()));
        }
        Ok(())
    }
}

/// `min(1, 2C / (C + Θ²))`.
pub fn scaling_factor(theta_sq: f64, c: f64) -> Result<f64> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::invalid(format!("scaling parameter C must be positive, got {c}")));
    }
    if !(theta_sq >= 0.0) {
        return Err(Error::invalid(format!("Θ² must be non-negative, got {theta_sq}")));
    }
    Ok(weight(theta_sq, c))
}

#[inline]
fn weight(theta_sq: f64, c: f64) -> f64 {
    if theta_sq <= c {
        1.0
    } else {
        2.0 * c / (c + theta_sq)
    }
}

/// Robust cost of one loop edge with error `chi2`; its derivative in `chi2`
/// is `scaling_factor(chi2, c)²`.
pub fn robust_loop_cost(chi2: f64, c: f64) -> f64 {
    if chi2 <= c {
        chi2
    } else {
        c * (3.0 * chi2 - c) / (c + chi2)
    }
}

/// Current scaling factor of every loop edge (diagnostic; the graph is not
/// modified).
pub fn loop_edge_weights(graph: &PoseGraph, c: f64) -> Result<Vec<f64>> {
    graph
        .loops
        .iter()
        .map(|e| scaling_factor(loop_chi2(e, &graph.nodes), c))
        .collect()
}

/// Objective minimised by [`optimize`] under `config`.
pub fn objective(graph: &PoseGraph, config: &SolverConfig) -> f64 {
    cost(&graph.nodes, graph, config)
}

fn cost(nodes: &[Pose2], graph: &PoseGraph, config: &SolverConfig) -> f64 {
    let odo: f64 = graph.odometry.iter().map(|e| odometry_chi2(e, nodes)).sum();
    let lp: f64 = graph
        .loops
        .iter()
        .map(|e| {
            let chi2 = loop_chi2(e, nodes);
            if config.robust_enabled {
                robust_loop_cost(chi2, config.free_parameter_c)
            } else {
                chi2
            }
        })
        .sum();
    odo + lp
}

fn weights(nodes: &[Pose2], graph: &PoseGraph, config: &SolverConfig) -> Vec<f64> {
    graph
        .loops
        .iter()
        .map(|e| {
            if config.robust_enabled {
                weight(loop_chi2(e, nodes), config.free_parameter_c)
            } else {
                1.0
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations_used: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    /// Scaling factor of each loop edge at the returned poses.
    pub scaling_factors: Vec<f64>,
    pub converged: bool,
    /// Objective after each accepted iteration, starting with the initial cost.
    pub cost_history: Vec<f64>,
}

impl SolveReport {
    /// Counts of scaling factors in ten equal bins over `[0, 1]`; the last
    /// bin is closed.
    pub fn weight_histogram(&self) -> [usize; 10] {
        let mut bins = [0usize; 10];
        for &s in &self.scaling_factors {
            let b = ((s * 10.0).floor() as usize).min(9);
            bins[b] += 1;
        }
        bins
    }
}

impl fmt::Display for SolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "iterations: {}", self.iterations_used)?;
        writeln!(f, "converged: {}", self.converged)?;
        writeln!(f, "initial_cost: {}", self.initial_cost)?;
        writeln!(f, "final_cost: {}", self.final_cost)?;
        writeln!(f, "loop_edges: {}", self.scaling_factors.len())?;
        for (b, count) in self.weight_histogram().iter().enumerate() {
            let close = if b == 9 { ']' } else { ')' };
            writeln!(f, "s_in_[{:.1},{:.1}{close}: {count}", b as f64 / 10.0, (b + 1) as f64 / 10.0)?;
        }
        Ok(())
    }
}

/// Builds the damped-free normal equations `H δ = -g` over nodes `1..n`.
fn normal_equations(nodes: &[Pose2], graph: &PoseGraph, loop_weights: &[f64]) -> BlockSystem {
    let mut sys = BlockSystem::new(nodes.len() - 1);
    for e in &graph.odometry {
        let r = odometry_residual(e, nodes);
        let (ja, jb) = odometry_jacobians(e, nodes);
        let om = &e.information;
        let terms = [(e.from, ja), (e.to, jb)];
        for &(u, ju) in &terms {
            if u == 0 {
                continue;
            }
            let jt_om = ju.transpose() * om;
            sys.rhs[u - 1] -= jt_om * r;
            for &(v, jv) in &terms {
                // add_block mirrors off-diagonal blocks, so visit each pair once
                if v != 0 && u <= v {
                    sys.add_block(u - 1, v - 1, &(jt_om * jv));
                }
            }
        }
    }
    for (e, &s) in graph.loops.iter().zip(loop_weights) {
        let om = e.information * (s * s);
        let r = loop_residual(e, nodes);
        let g = om * r;
        let mut block = Matrix3::zeros();
        block.fixed_view_mut::<2, 2>(0, 0).copy_from(&om);
        // J_i = [I 0], J_k = -[I 0]
        for &(u, sign) in &[(e.node_i, 1.0), (e.node_k, -1.0)] {
            if u == 0 {
                continue;
            }
            sys.rhs[u - 1] -= Vector3::new(g[0], g[1], 0.0) * sign;
            for &(v, sv) in &[(e.node_i, 1.0), (e.node_k, -1.0)] {
                if v != 0 && u <= v {
                    sys.add_block(u - 1, v - 1, &(block * (sign * sv)));
                }
            }
        }
    }
    sys
}

fn apply_increment(nodes: &[Pose2], delta: &[Vector3<f64>]) -> Vec<Pose2> {
    let mut out = nodes.to_vec();
    for (p, d) in out[1..].iter_mut().zip(delta) {
        p.x += d[0];
        p.y += d[1];
        p.theta = wrap(p.theta + d[2]);
    }
    out
}

const MAX_DAMPING: f64 = 1e16;

/// Minimises the (robust or plain) pose-graph objective with node 0 held
/// fixed. Returns the optimised graph and a report.
///
/// Fails with [`Error::Solver`] when the normal equations stay singular under
/// maximal damping or the cost becomes non-finite.
pub fn optimize(graph: &PoseGraph, config: &SolverConfig) -> Result<(PoseGraph, SolveReport)> {
    graph.validate()?;
    config.validate()?;
    let mut nodes = graph.nodes.clone();
    let mut current = cost(&nodes, graph, config);
    if !current.is_finite() {
        return Err(Error::Solver("initial cost is not finite".into()));
    }
    let initial_cost = current;
    let mut history = vec![current];
    let mut iterations = 0;
    let mut converged = false;

    let n_var = nodes.len() - 1;
    if n_var == 0 || current == 0.0 {
        converged = true;
    }
    let order = EliminationOrder::minimum_degree(
        n_var,
        graph
            .odometry
            .iter()
            .map(|e| (e.from, e.to))
            .chain(graph.loops.iter().map(|e| (e.node_i, e.node_k)))
            .filter(|&(a, b)| a != 0 && b != 0)
            .map(|(a, b)| (a - 1, b - 1)),
    );
    let mut damping = config.initial_damping;

    while !converged && iterations < config.max_iterations {
        iterations += 1;
        let w = weights(&nodes, graph, config);
        let system = normal_equations(&nodes, graph, &w);
        loop {
            let mut damped = system.clone();
            for d in damped.diag.iter_mut() {
                for k in 0..3 {
                    d[(k, k)] *= 1.0 + damping;
                }
            }
            let Some(delta) = sparse::solve(&damped, &order) else {
                if damping >= MAX_DAMPING {
                    return Err(Error::Solver(
                        "normal equations singular under maximal damping (under-constrained graph?)".into(),
                    ));
                }
                damping = (damping * 10.0).max(1e-9);
                continue;
            };
            let step_norm = delta.iter().map(|d| d.norm_squared()).sum::<f64>().sqrt();
            if step_norm < config.step_tolerance {
                converged = true;
                break;
            }
            let candidate = apply_increment(&nodes, &delta);
            let new_cost = cost(&candidate, graph, config);
            if !new_cost.is_finite() {
                return Err(Error::Solver("cost became non-finite".into()));
            }
            if new_cost < current {
                let rel = (current - new_cost) / current;
                nodes = candidate;
                current = new_cost;
                history.push(current);
                damping = (damping / 10.0).max(config.initial_damping);
                if rel < config.rel_cost_tolerance || current == 0.0 {
                    converged = true;
                }
                break;
            }
            if damping >= MAX_DAMPING {
                // no descent possible from here: stationary point
                converged = true;
                break;
            }
            damping = (damping * 10.0).max(1e-9);
        }
    }

    let optimized = PoseGraph {
        nodes,
        odometry: graph.odometry.clone(),
        loops: graph.loops.clone(),
    };
    let scaling_factors = if config.robust_enabled {
        loop_edge_weights(&optimized, config.free_parameter_c)?
    } else {
        vec![1.0; optimized.loops.len()]
    };
    let report = SolveReport {
        iterations_used: iterations,
        initial_cost,
        final_cost: current,
        scaling_factors,
        converged,
        cost_history: history,
    };
    Ok((optimized, report))
}
