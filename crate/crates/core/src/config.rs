//! Pipeline configuration: one TOML file plus `section.key=value` overrides.
//!
//! Every field has a default, so an empty file is a valid configuration.
//! Relative paths are taken relative to the working directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::graph::GraphConfig;
use crate::pdr::PdrConfig;
use crate::pose::Pose2;
use crate::rtt::ClusterConfig;
use crate::sim::{ImuSynthConfig, SimConfig};
use crate::solver::SolverConfig;

/// Which estimator produces the output trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Dead reckoning only; no graph is built.
    ImuOnly,
    /// Pose graph with every loop edge at full weight.
    TraditionalSlam,
    /// Pose graph with per-edge scaling of loop constraints.
    #[default]
    RobustSlam,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::ImuOnly, Mode::TraditionalSlam, Mode::RobustSlam];

    pub fn name(self) -> &'static str {
        match self {
            Mode::ImuOnly => "imu_only",
            Mode::TraditionalSlam => "traditional_slam",
            Mode::RobustSlam => "robust_slam",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub imu_log: Option<PathBuf>,
    /// When set, steps are read from here and the IMU log is ignored.
    pub step_log: Option<PathBuf>,
    pub rtt_log: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    /// Additional loop pairs (`node_i,node_k`) appended to the detected ones.
    pub extra_loops: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            imu_log: None,
            step_log: None,
            rtt_log: None,
            ground_truth: None,
            extra_loops: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub mode: Mode,
    /// Pose of node 0 as `[x, y, theta]`.
    pub origin: [f64; 3],
    /// Also write an SVG rendering of the estimated path.
    pub svg: bool,
    pub pdr: PdrConfig,
    pub cluster: ClusterConfig,
    pub graph: GraphConfig,
    /// `robust_enabled` is ignored by the pipeline; `mode` decides.
    pub solver: SolverConfig,
    pub sim: SimConfig,
    pub imu: ImuSynthConfig,
    pub paths: Paths,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mode: Mode::default(),
            origin: [0.0; 3],
            svg: false,
            pdr: PdrConfig::default(),
            cluster: ClusterConfig::default(),
            graph: GraphConfig::default(),
            solver: SolverConfig::default(),
            sim: SimConfig::default(),
            imu: ImuSynthConfig::default(),
            paths: Paths::default(),
        }
    }
}

impl PipelineConfig {
    /// Parses TOML text, applies `key=value` overrides (dotted keys), and
    /// validates every section.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: PipelineConfig = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads the file at `path` (or starts from defaults) and applies overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        Self::from_toml_str(&text, overrides).map_err(|e| match (e, path) {
            (Error::Config(m), Some(p)) => Error::Config(format!("{}: {m}", p.display())),
            (e, _) => e,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.origin.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("origin must be finite".into()));
        }
        self.pdr.validate()?;
        self.cluster.validate()?;
        self.graph.validate()?;
        self.solver.validate()?;
        self.sim.validate()?;
        if !(self.imu.rate > 0.0 && self.imu.step_duration > 0.0) {
            return Err(Error::Config("imu.rate and imu.step_duration must be positive".into()));
        }
        Ok(())
    }

    pub fn origin_pose(&self) -> Pose2 {
        Pose2::new(self.origin[0], self.origin[1], self.origin[2])
    }

    /// Solver settings for `mode`.
    pub fn solver_for(&self, mode: Mode) -> SolverConfig {
        SolverConfig {
            robust_enabled: mode == Mode::RobustSlam,
            ..self.solver
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

fn apply_override(root: &mut Table, text: &str) -> Result<()> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{text}` is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override `{text}` has an empty key")));
    }
    let raw = raw.trim();
    // TOML literal if it parses as one, else a bare string
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    let (last, sections) = parts.split_last().expect("non-empty key");
    let mut table = root;
    for s in sections {
        let entry = table
            .entry(s.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{text}`: `{s}` is not a section")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(PipelineConfig::from_toml_str("", &[]).unwrap(), PipelineConfig::default());
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = PipelineConfig::default();
        assert_eq!(PipelineConfig::from_toml_str(&cfg.to_toml(), &[]).unwrap(), cfg);
    }

    #[test]
    fn overrides_apply() {
        let cfg = PipelineConfig::from_toml_str(
            "mode = \"imu_only\"\n[sim]\nlaps = 3\n",
            &[
                "sim.seed=42".into(),
                "mode=traditional_slam".into(),
                "paths.rtt_log=/tmp/r.csv".into(),
                "solver.free_parameter_c = 2.5".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.sim.laps, 3);
        assert_eq!(cfg.sim.seed, 42);
        assert_eq!(cfg.mode, Mode::TraditionalSlam);
        assert_eq!(cfg.paths.rtt_log.as_deref(), Some(Path::new("/tmp/r.csv")));
        assert_eq!(cfg.solver.free_parameter_c, 2.5);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for bad in ["sim.laps=0", "solver.free_parameter_c=-1", "mode=fast", "pdr.nonsense=1", "x"] {
            let e = PipelineConfig::from_toml_str("", &[bad.to_string()]).unwrap_err();
            assert!(matches!(e, Error::Config(_)), "{bad}: {e}");
        }
        assert!(matches!(PipelineConfig::from_toml_str("[sim", &[]), Err(Error::Config(_))));
    }

    #[test]
    fn mode_drives_robustness() {
        let cfg = PipelineConfig::default();
        assert!(cfg.solver_for(Mode::RobustSlam).robust_enabled);
        assert!(!cfg.solver_for(Mode::TraditionalSlam).robust_enabled);
    }
}
