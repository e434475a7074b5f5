//! End-to-end estimation: steps → loop closures → pose graph → trajectory.

use std::collections::BTreeSet;

use crate::config::{Mode, PipelineConfig};
use crate::error::{Error, Result};
use crate::graph::{build_graph, LoopPair};
use crate::logs::LoopReportRow;
use crate::pdr::{pdr_trajectory, run_pdr};
use crate::records::{ImuSample, RttObservation, StepEvent, Trajectory};
use crate::rtt::{attach_to_nodes, detect_loop_closures};
use crate::solver::{optimize, SolveReport};

/// Where the steps come from.
#[derive(Debug, Clone, PartialEq)]
pub enum StepSource {
    Imu(Vec<ImuSample>),
    Steps(Vec<StepEvent>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineInput {
    pub steps: StepSource,
    /// Required for the SLAM modes.
    pub rtt: Option<Vec<RttObservation>>,
    pub extra_loops: Vec<LoopPair>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub mode: Mode,
    pub steps: Vec<StepEvent>,
    pub dead_reckoned: Trajectory,
    pub estimate: Trajectory,
    /// Observation-level candidates before node attachment.
    pub candidate_count: usize,
    pub loops: Vec<LoopReportRow>,
    pub solve: Option<SolveReport>,
}

/// Detected loop pairs plus `extra`, without duplicates (detected first).
pub fn collect_loops(
    steps: &[StepEvent],
    dead_reckoned: &Trajectory,
    rtt: &[RttObservation],
    extra: &[LoopPair],
    config: &PipelineConfig,
) -> Result<(usize, Vec<LoopPair>)> {
    let candidates = detect_loop_closures(rtt, &config.cluster)?;
    let obs_times: Vec<f64> = rtt.iter().map(|o| o.t).collect();
    let mut pairs = attach_to_nodes(&candidates, &obs_times, &dead_reckoned.times())?;
    let mut seen: BTreeSet<(usize, usize)> = pairs.iter().map(key).collect();
    for p in extra {
        if p.node_i.max(p.node_k) > steps.len() {
            return Err(Error::invalid(format!(
                "extra loop ({}, {}) references a node beyond the {} nodes of the walk",
                p.node_i,
                p.node_k,
                steps.len() + 1
            )));
        }
        let (node_i, node_k) = key(p);
        if seen.insert((node_i, node_k)) {
            pairs.push(LoopPair { node_i, node_k, ..*p });
        }
    }
    Ok((candidates.len(), pairs))
}

fn key(p: &LoopPair) -> (usize, usize) {
    (p.node_i.max(p.node_k), p.node_i.min(p.node_k))
}

/// Runs the configured mode on `input`.
pub fn run(input: &PipelineInput, config: &PipelineConfig) -> Result<PipelineOutput> {
    run_mode(input, config, config.mode)
}

pub fn run_mode(input: &PipelineInput, config: &PipelineConfig, mode: Mode) -> Result<PipelineOutput> {
    config.validate()?;
    let steps = match &input.steps {
        StepSource::Imu(imu) => run_pdr(imu, &config.pdr)?,
        StepSource::Steps(steps) => steps.clone(),
    };
    if steps.is_empty() {
        return Err(Error::invalid("no steps to process"));
    }
    let origin = config.origin_pose();
    let dead_reckoned = pdr_trajectory(&steps, origin)?;
    if mode == Mode::ImuOnly {
        return Ok(PipelineOutput {
            mode,
            steps,
            estimate: dead_reckoned.clone(),
            dead_reckoned,
            candidate_count: 0,
            loops: Vec::new(),
            solve: None,
        });
    }
    let rtt = input
        .rtt
        .as_deref()
        .ok_or_else(|| Error::invalid(format!("mode {} needs an RTT log", mode.name())))?;
    let (candidate_count, pairs) = collect_loops(&steps, &dead_reckoned, rtt, &input.extra_loops, config)?;
    let graph = build_graph(&steps, origin, &pairs, &config.graph.information_model())?;
    let (optimized, report) = optimize(&graph, &config.solver_for(mode))?;
    let loops = optimized
        .loops
        .iter()
        .zip(&report.scaling_factors)
        .map(|(e, &s)| LoopReportRow {
            node_i: e.node_i,
            node_k: e.node_k,
            rtt_distance: e.rtt_distance,
            scaling_factor: s,
        })
        .collect();
    Ok(PipelineOutput {
        mode,
        steps,
        estimate: dead_reckoned.with_poses(&optimized.nodes)?,
        dead_reckoned,
        candidate_count,
        loops,
        solve: Some(report),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::generate_walk;

    fn scenario(laps: usize) -> (PipelineConfig, PipelineInput) {
        let mut cfg = PipelineConfig::default();
        cfg.sim.laps = laps;
        let out = generate_walk(&cfg.sim).unwrap();
        let input = PipelineInput {
            steps: StepSource::Steps(out.noisy_steps),
            rtt: Some(out.rtt_observations),
            extra_loops: Vec::new(),
        };
        (cfg, input)
    }

    #[test]
    fn imu_only_is_dead_reckoning() {
        let (cfg, input) = scenario(2);
        let out = run_mode(&input, &cfg, Mode::ImuOnly).unwrap();
        let StepSource::Steps(steps) = &input.steps else { unreachable!() };
        assert_eq!(out.estimate, pdr_trajectory(steps, cfg.origin_pose()).unwrap());
        assert!(out.solve.is_none());
    }

    #[test]
    fn slam_without_rtt_fails() {
        let (cfg, mut input) = scenario(1);
        input.rtt = None;
        assert!(run_mode(&input, &cfg, Mode::RobustSlam).is_err());
    }

    #[test]
    fn no_loop_candidates_reproduces_dead_reckoning() {
        let (mut cfg, input) = scenario(2);
        cfg.cluster.distance_threshold = 1e-9;
        let out = run_mode(&input, &cfg, Mode::RobustSlam).unwrap();
        assert!(out.loops.is_empty());
        assert_eq!(out.estimate, out.dead_reckoned);
    }

    #[test]
    fn extra_loops_are_checked_and_deduplicated() {
        let (cfg, mut input) = scenario(2);
        input.extra_loops = vec![LoopPair::new(20, 3), LoopPair::new(3, 20)];
        let out = run_mode(&input, &cfg, Mode::TraditionalSlam).unwrap();
        assert_eq!(out.loops.iter().filter(|l| (l.node_i, l.node_k) == (20, 3)).count(), 1);
        input.extra_loops = vec![LoopPair::new(100_000, 3)];
        assert!(run_mode(&input, &cfg, Mode::TraditionalSlam).is_err());
    }
}
