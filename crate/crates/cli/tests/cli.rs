use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_indoor-slam"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = bin(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn simulate(dir: &Path, laps: &str) {
    ok(&["simulate", "--set", &format!("sim.laps={laps}"), "--out", "sim"], dir);
}

#[test]
fn simulate_reports_rtt_count_at_five_hertz() {
    let tmp = tempfile::tempdir().unwrap();
    let text = ok(&["simulate", "--set", "sim.laps=2", "--out", "sim"], tmp.path());
    // 2 laps of 30 steps at 1 s per step: 60 s of walking
    assert!(text.contains("duration_s: 60\n"), "{text}");
    assert!(text.contains("rtt_observations: 300\n"), "{text}");
    let rtt = fs::read_to_string(tmp.path().join("sim/rtt.csv")).unwrap();
    assert_eq!(rtt.lines().count(), 1 + 300 * 4);
    for f in ["ground_truth.csv", "steps.csv", "imu.csv", "true_loops.csv", "injected_loops.csv"] {
        assert!(tmp.path().join("sim").join(f).exists(), "{f}");
    }
}

#[test]
fn zero_laps_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin(&["simulate", "--set", "sim.laps=0"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("laps"));
}

#[test]
fn missing_rtt_log_names_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    simulate(tmp.path(), "1");
    let out = bin(
        &["slam", "--steps", "sim/steps.csv", "--rtt", "sim/absent_rtt.csv", "--out", "o"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent_rtt.csv"));

    let out = bin(&["slam", "--steps", "sim/steps.csv", "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_log_is_an_input_error_with_line() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("steps.csv"),
        "j,t_start,t_end,length_m,heading_rad\n0,0,1,0.7,0\n1,1,2,oops,0\n",
    )
    .unwrap();
    let out = bin(&["slam", "--mode", "imu_only", "--steps", "steps.csv", "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("steps.csv:3"));
}

#[test]
fn imu_only_skips_the_graph() {
    let tmp = tempfile::tempdir().unwrap();
    simulate(tmp.path(), "1");
    let text = ok(
        &["slam", "--mode", "imu_only", "--steps", "sim/steps.csv", "--out", "o"],
        tmp.path(),
    );
    assert!(text.contains("mode: imu_only"));
    let o = tmp.path().join("o");
    assert!(!o.join("loops.csv").exists());
    assert!(!o.join("solver.txt").exists());
    assert_eq!(
        fs::read(o.join("trajectory.csv")).unwrap(),
        fs::read(o.join("dead_reckoned.csv")).unwrap()
    );
}

#[test]
fn pdr_on_simulated_imu() {
    let tmp = tempfile::tempdir().unwrap();
    simulate(tmp.path(), "1");
    let text = ok(&["pdr", "--imu", "sim/imu.csv", "--out", "p"], tmp.path());
    let steps: usize = text
        .lines()
        .find_map(|l| l.strip_prefix("steps: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((28..=30).contains(&steps), "{steps}");
}

const PIPELINE_TOML: &str = r#"
svg = true

[sim]
laps = 3

[paths]
step_log = "sim/steps.csv"
rtt_log = "sim/rtt.csv"
ground_truth = "sim/ground_truth.csv"
extra_loops = "sim/injected_loops.csv"
"#;

#[test]
fn pipeline_outputs_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("run.toml"), PIPELINE_TOML).unwrap();
    ok(&["simulate", "--config", "run.toml", "--out", "sim"], dir);
    ok(&["pipeline", "--config", "run.toml", "--out", "a"], dir);
    ok(&["pipeline", "--config", "run.toml", "--out", "b"], dir);
    let names = [
        "trajectory.csv",
        "dead_reckoned.csv",
        "loops.csv",
        "solver.txt",
        "metrics.txt",
        "cdf.csv",
        "path.svg",
    ];
    for name in names {
        let a = fs::read(dir.join("a").join(name)).unwrap();
        let b = fs::read(dir.join("b").join(name)).unwrap();
        assert!(!a.is_empty(), "{name}");
        assert_eq!(a, b, "{name}");
    }

    let text = ok(
        &["eval", "--estimate", "a/trajectory.csv", "--ground-truth", "sim/ground_truth.csv", "--out", "e"],
        dir,
    );
    assert_eq!(text, fs::read_to_string(dir.join("a/metrics.txt")).unwrap());
}

#[test]
fn config_prints_loadable_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let text = ok(&["config"], tmp.path());
    fs::write(tmp.path().join("d.toml"), &text).unwrap();
    ok(&["simulate", "--config", "d.toml", "--set", "sim.laps=1", "--out", "s"], tmp.path());
}

#[test]
fn shipped_comparison_config_loads() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/comparison.toml");
    let tmp = tempfile::tempdir().unwrap();
    let text = ok(
        &["simulate", "--config", path.to_str().unwrap(), "--set", "sim.laps=1", "--out", "s"],
        tmp.path(),
    );
    assert!(text.contains("steps: 30\n"), "{text}");
}
