use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use indoor_slam::config::{Mode, PipelineConfig};
use indoor_slam::logs;
use indoor_slam::metrics::{evaluate, MetricsReport};
use indoor_slam::pdr::{pdr_trajectory, run_pdr};
use indoor_slam::pipeline::{self, PipelineInput, PipelineOutput, StepSource};
use indoor_slam::sim::{generate_walk, inject_false_loops, synth_imu};
use indoor_slam::{Error, ErrorCategory, Result, Trajectory};

mod svg;

/// Indoor walk localisation from IMU steps and WiFi RTT ranges.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a setting, e.g. `--set sim.seed=7` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (overrides `paths.output_dir`).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self, extra: Vec<String>) -> Result<PipelineConfig> {
        let mut overrides = self.overrides.clone();
        overrides.extend(extra);
        let mut cfg = PipelineConfig::load(self.config.as_deref(), &overrides)?;
        if let Some(out) = &self.out {
            cfg.paths.output_dir = out.clone();
        }
        Ok(cfg)
    }
}

fn path_override(key: &str, value: &Option<PathBuf>) -> Option<String> {
    value.as_ref().map(|p| format!("paths.{key}={:?}", p.display().to_string()))
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a walk: ground truth, steps, IMU and RTT logs.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Detect steps in an IMU log and dead-reckon them.
    Pdr {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        imu: Option<PathBuf>,
    },
    /// Estimate a trajectory from steps (or IMU) and RTT.
    Slam {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        imu: Option<PathBuf>,
        #[arg(long)]
        steps: Option<PathBuf>,
        #[arg(long)]
        rtt: Option<PathBuf>,
        #[arg(long)]
        extra_loops: Option<PathBuf>,
        /// imu_only, traditional_slam or robust_slam.
        #[arg(long)]
        mode: Option<String>,
    },
    /// Score an estimated trajectory against ground truth.
    Eval {
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
    },
    /// Full run driven by the configuration file; evaluates when
    /// `paths.ground_truth` is set.
    Pipeline {
        #[command(flatten)]
        common: Common,
    },
    /// Print the default configuration.
    Config,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = match e.category() {
                ErrorCategory::Config => 2,
                ErrorCategory::Input => 3,
                ErrorCategory::Solver => 4,
            };
            eprintln!("error: {e}");
            ExitCode::from(code)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate { common } => simulate(&common.load(Vec::new())?),
        Command::Pdr { common, imu } => {
            let cfg = common.load(path_override("imu_log", &imu).into_iter().collect())?;
            pdr(&cfg)
        }
        Command::Slam {
            common,
            imu,
            steps,
            rtt,
            extra_loops,
            mode,
        } => {
            let mut extra: Vec<String> = [
                path_override("imu_log", &imu),
                path_override("step_log", &steps),
                path_override("rtt_log", &rtt),
                path_override("extra_loops", &extra_loops),
            ]
            .into_iter()
            .flatten()
            .collect();
            if let Some(m) = mode {
                extra.push(format!("mode={m:?}"));
            }
            let cfg = common.load(extra)?;
            estimate(&cfg, false)
        }
        Command::Eval {
            estimate,
            ground_truth,
            out,
        } => {
            let est = logs::parse_trajectory(&estimate)?;
            let gt = logs::parse_trajectory(&ground_truth)?;
            let report = evaluate(&est, &gt)?;
            fs::create_dir_all(&out).map_err(|e| Error::Io { path: out.clone(), source: e })?;
            write_metrics(&out, &report)?;
            print!("{report}");
            Ok(())
        }
        Command::Pipeline { common } => estimate(&common.load(Vec::new())?, true),
        Command::Config => {
            print!("{}", PipelineConfig::default().to_toml());
            Ok(())
        }
    }
}

fn output_dir(cfg: &PipelineConfig) -> Result<&Path> {
    let dir = cfg.paths.output_dir.as_path();
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    Ok(dir)
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let io = |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    f(&mut w).map_err(io)?;
    w.flush().map_err(io)
}

fn simulate(cfg: &PipelineConfig) -> Result<()> {
    let out = generate_walk(&cfg.sim)?;
    let imu = synth_imu(&out.noisy_steps, &cfg.imu, &cfg.pdr)?;
    let injected = inject_false_loops(&[], &out.ground_truth, cfg.sim.false_loops, cfg.sim.seed)?;
    let dir = output_dir(cfg)?;
    write_file(&dir.join("ground_truth.csv"), |w| logs::write_trajectory(w, &out.ground_truth))?;
    write_file(&dir.join("steps.csv"), |w| logs::write_step_log(w, &out.noisy_steps))?;
    write_file(&dir.join("imu.csv"), |w| logs::write_imu_log(w, &imu))?;
    write_file(&dir.join("rtt.csv"), |w| logs::write_rtt_log(w, &out.rtt_observations))?;
    write_file(&dir.join("true_loops.csv"), |w| logs::write_loop_pairs(w, &out.true_loop_pairs))?;
    write_file(&dir.join("injected_loops.csv"), |w| logs::write_loop_pairs(w, &injected))?;

    let length: f64 = out.ground_truth_steps.iter().map(|s| s.length).sum();
    let duration = out.ground_truth.last().map_or(0.0, |p| p.t) - out.ground_truth.first().map_or(0.0, |p| p.t);
    println!("path_length_m: {length}");
    println!("duration_s: {duration}");
    println!("steps: {}", out.noisy_steps.len());
    println!("imu_samples: {}", imu.len());
    println!("rtt_observations: {}", out.rtt_observations.len());
    println!("true_loop_pairs: {}", out.true_loop_pairs.len());
    println!("injected_loop_pairs: {}", injected.len());
    println!("output: {}", dir.display());
    Ok(())
}

fn pdr(cfg: &PipelineConfig) -> Result<()> {
    let path = cfg
        .paths
        .imu_log
        .as_deref()
        .ok_or_else(|| Error::Config("an IMU log is required (--imu or paths.imu_log)".into()))?;
    let imu = logs::parse_imu_log(path)?;
    let steps = run_pdr(&imu, &cfg.pdr)?;
    let trajectory = pdr_trajectory(&steps, cfg.origin_pose())?;
    let dir = output_dir(cfg)?;
    write_file(&dir.join("steps.csv"), |w| logs::write_step_log(w, &steps))?;
    write_file(&dir.join("trajectory.csv"), |w| logs::write_trajectory(w, &trajectory))?;
    println!("steps: {}", steps.len());
    println!("path_length_m: {}", steps.iter().map(|s| s.length).sum::<f64>());
    Ok(())
}

fn load_input(cfg: &PipelineConfig) -> Result<PipelineInput> {
    let paths = &cfg.paths;
    let steps = match (&paths.step_log, &paths.imu_log) {
        (Some(p), _) => StepSource::Steps(logs::parse_step_log(p)?),
        (None, Some(p)) => StepSource::Imu(logs::parse_imu_log(p)?),
        (None, None) => {
            return Err(Error::Config(
                "a step log or IMU log is required (paths.step_log / paths.imu_log)".into(),
            ))
        }
    };
    let rtt = match (&paths.rtt_log, cfg.mode) {
        (Some(p), _) => Some(logs::parse_rtt_log(p)?),
        (None, Mode::ImuOnly) => None,
        (None, mode) => {
            return Err(Error::Config(format!(
                "mode {} requires an RTT log (--rtt or paths.rtt_log)",
                mode.name()
            )))
        }
    };
    let extra_loops = match &paths.extra_loops {
        Some(p) => logs::parse_loop_pairs(p)?,
        None => Vec::new(),
    };
    Ok(PipelineInput {
        steps,
        rtt,
        extra_loops,
    })
}

fn estimate(cfg: &PipelineConfig, with_eval: bool) -> Result<()> {
    let input = load_input(cfg)?;
    let ground_truth = match (&cfg.paths.ground_truth, with_eval) {
        (Some(p), true) => Some(logs::parse_trajectory(p)?),
        _ => None,
    };
    let result = pipeline::run(&input, cfg)?;
    let dir = output_dir(cfg)?;
    write_outputs(dir, cfg, &result, ground_truth.as_ref())
}

fn write_outputs(
    dir: &Path,
    cfg: &PipelineConfig,
    result: &PipelineOutput,
    ground_truth: Option<&Trajectory>,
) -> Result<()> {
    write_file(&dir.join("trajectory.csv"), |w| logs::write_trajectory(w, &result.estimate))?;
    write_file(&dir.join("dead_reckoned.csv"), |w| logs::write_trajectory(w, &result.dead_reckoned))?;
    println!("mode: {}", result.mode.name());
    println!("steps: {}", result.steps.len());
    if let Some(report) = &result.solve {
        write_file(&dir.join("loops.csv"), |w| logs::write_loop_report(w, &result.loops))?;
        write_file(&dir.join("solver.txt"), |w| write!(w, "{report}"))?;
        println!("loop_candidates: {}", result.candidate_count);
        println!("loop_edges: {}", result.loops.len());
        println!("iterations: {}", report.iterations_used);
        println!("converged: {}", report.converged);
    }
    if let Some(gt) = ground_truth {
        let report = evaluate(&result.estimate, gt)?;
        write_metrics(dir, &report)?;
        print!("{report}");
    }
    if cfg.svg {
        let doc = svg::render(&result.estimate, ground_truth);
        write_file(&dir.join("path.svg"), |w| w.write_all(doc.as_bytes()))?;
    }
    Ok(())
}

fn write_metrics(dir: &Path, report: &MetricsReport) -> Result<()> {
    write_file(&dir.join("metrics.txt"), |w| write!(w, "{report}"))?;
    write_file(&dir.join("cdf.csv"), |w| w.write_all(report.cdf_csv().as_bytes()))
}
