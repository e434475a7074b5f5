//! CSV log formats.
//!
//! Every file is comma-separated UTF-8 with a mandatory header row. Floats
//! are written in shortest round-trip form, so write-then-parse returns
//! identical values.
//!
//! | file | header |
//! |------|--------|
//! | IMU | `t,ax,ay,az,gx,gy,gz,mx,my,mz` |
//! | RTT | `t,ap_id,range_m,stddev_m` (rows sharing `t` form one observation) |
//! | steps | `j,t_start,t_end,length_m,heading_rad` |
//! | trajectory | `t,x,y,theta` |
//! | loop report | `node_i,node_k,d_rtt_m,s_final` |
//! | loop pairs | `node_i,node_k` |

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::graph::LoopPair;
use crate::pose::Pose2;
use crate::records::{
    ImuSample, RangeMeasurement, RttObservation, StepEvent, TimedPose, Trajectory,
};

pub const IMU_HEADER: &[&str] = &["t", "ax", "ay", "az", "gx", "gy", "gz", "mx", "my", "mz"];
pub const RTT_HEADER: &[&str] = &["t", "ap_id", "range_m", "stddev_m"];
pub const STEP_HEADER: &[&str] = &["j", "t_start", "t_end", "length_m", "heading_rad"];
pub const TRAJECTORY_HEADER: &[&str] = &["t", "x", "y", "theta"];
pub const LOOP_REPORT_HEADER: &[&str] = &["node_i", "node_k", "d_rtt_m", "s_final"];
pub const LOOP_PAIR_HEADER: &[&str] = &["node_i", "node_k"];

/// One row of the loop-edge report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopReportRow {
    pub node_i: usize,
    pub node_k: usize,
    pub rtt_distance: Option<f64>,
    pub scaling_factor: f64,
}

fn writer<W: Write>(w: W, header: &[&str]) -> io::Result<csv::Writer<W>> {
    let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    wtr.write_record(header).map_err(into_io)?;
    Ok(wtr)
}

fn into_io(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::other(format!("{other:?}")),
    }
}

fn put<W: Write>(wtr: &mut csv::Writer<W>, fields: &[String]) -> io::Result<()> {
    wtr.write_record(fields).map_err(into_io)
}

pub fn write_imu_log<W: Write>(w: W, samples: &[ImuSample]) -> io::Result<()> {
    let mut wtr = writer(w, IMU_HEADER)?;
    for s in samples {
        let mut row = vec![s.t.to_string()];
        for v in [&s.accel, &s.gyro, &s.mag] {
            row.extend(v.iter().map(f64::to_string));
        }
        put(&mut wtr, &row)?;
    }
    wtr.flush()
}

pub fn write_rtt_log<W: Write>(w: W, observations: &[RttObservation]) -> io::Result<()> {
    let mut wtr = writer(w, RTT_HEADER)?;
    for o in observations {
        for (ap, m) in &o.ranges {
            let sd = m.stddev.map(|s| s.to_string()).unwrap_or_default();
            put(&mut wtr, &[o.t.to_string(), ap.clone(), m.range.to_string(), sd])?;
        }
    }
    wtr.flush()
}

pub fn write_step_log<W: Write>(w: W, steps: &[StepEvent]) -> io::Result<()> {
    let mut wtr = writer(w, STEP_HEADER)?;
    for s in steps {
        put(
            &mut wtr,
            &[
                s.index.to_string(),
                s.t_start.to_string(),
                s.t_end.to_string(),
                s.length.to_string(),
                s.heading.to_string(),
            ],
        )?;
    }
    wtr.flush()
}

pub fn write_trajectory<W: Write>(w: W, trajectory: &Trajectory) -> io::Result<()> {
    let mut wtr = writer(w, TRAJECTORY_HEADER)?;
    for p in trajectory.points() {
        put(
            &mut wtr,
            &[p.t.to_string(), p.pose.x.to_string(), p.pose.y.to_string(), p.pose.theta.to_string()],
        )?;
    }
    wtr.flush()
}

pub fn write_loop_report<W: Write>(w: W, rows: &[LoopReportRow]) -> io::Result<()> {
    let mut wtr = writer(w, LOOP_REPORT_HEADER)?;
    for r in rows {
        put(
            &mut wtr,
            &[
                r.node_i.to_string(),
                r.node_k.to_string(),
                r.rtt_distance.map(|d| d.to_string()).unwrap_or_default(),
                r.scaling_factor.to_string(),
            ],
        )?;
    }
    wtr.flush()
}

pub fn write_loop_pairs<W: Write>(w: W, pairs: &[LoopPair]) -> io::Result<()> {
    let mut wtr = writer(w, LOOP_PAIR_HEADER)?;
    for p in pairs {
        put(&mut wtr, &[p.node_i.to_string(), p.node_k.to_string()])?;
    }
    wtr.flush()
}

/// Row cursor that tags every failure with the file and line.
struct Rows<'p, R> {
    reader: csv::Reader<R>,
    path: &'p Path,
    record: csv::StringRecord,
    width: usize,
    line: u64,
}

impl<'p, R: Read> Rows<'p, R> {
    fn open(r: R, path: &'p Path, header: &[&str]) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(r);
        let mut record = csv::StringRecord::new();
        let found = reader.read_record(&mut record).map_err(|e| csv_error(path, e))?;
        if !found || record.iter().ne(header.iter().copied()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!("expected header `{}`", header.join(",")),
            });
        }
        Ok(Rows {
            reader,
            path,
            record,
            width: header.len(),
            line: 1,
        })
    }

    /// Advances to the next row; checks its field count.
    fn next(&mut self) -> Result<bool> {
        if !self.reader.read_record(&mut self.record).map_err(|e| csv_error(self.path, e))? {
            return Ok(false);
        }
        self.line = self.record.position().map_or(self.line + 1, |p| p.line());
        let expected = self.width;
        if self.record.len() != expected {
            return Err(self.error(format!("expected {expected} fields, found {}", self.record.len())));
        }
        Ok(true)
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line: self.line,
            message: message.into(),
        }
    }

    fn str(&self, i: usize) -> &str {
        &self.record[i]
    }

    fn float(&self, i: usize, name: &str) -> Result<f64> {
        let v: f64 = self
            .str(i)
            .parse()
            .map_err(|_| self.error(format!("{name}: cannot parse `{}` as a number", self.str(i))))?;
        if !v.is_finite() {
            return Err(self.error(format!("{name}: value is not finite")));
        }
        Ok(v)
    }

    fn index(&self, i: usize, name: &str) -> Result<usize> {
        self.str(i)
            .parse()
            .map_err(|_| self.error(format!("{name}: `{}` is not a non-negative integer", self.str(i))))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        csv::ErrorKind::Utf8 { .. } => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: "invalid UTF-8".into(),
        },
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

pub fn read_imu_log<R: Read>(r: R, path: &Path) -> Result<Vec<ImuSample>> {
    let mut rows = Rows::open(r, path, IMU_HEADER)?;
    let mut out: Vec<ImuSample> = Vec::new();
    while rows.next()? {
        let mut v = [0.0; 10];
        for (i, slot) in v.iter_mut().enumerate() {
            *slot = rows.float(i, IMU_HEADER[i])?;
        }
        if let Some(prev) = out.last() {
            if !(v[0] > prev.t) {
                return Err(rows.error(format!("timestamp {} does not increase", v[0])));
            }
        }
        out.push(ImuSample {
            t: v[0],
            accel: Vector3::new(v[1], v[2], v[3]),
            gyro: Vector3::new(v[4], v[5], v[6]),
            mag: Vector3::new(v[7], v[8], v[9]),
        });
    }
    Ok(out)
}

/// Groups consecutive rows with equal `t` into observations. Timestamps may
/// repeat only within a group; an AP may appear once per group.
pub fn read_rtt_log<R: Read>(r: R, path: &Path) -> Result<Vec<RttObservation>> {
    let mut rows = Rows::open(r, path, RTT_HEADER)?;
    let mut out = Vec::new();
    let mut current: Option<(f64, BTreeMap<String, RangeMeasurement>)> = None;
    while rows.next()? {
        let t = rows.float(0, "t")?;
        let ap = rows.str(1).to_string();
        if ap.is_empty() {
            return Err(rows.error("ap_id is empty"));
        }
        let range = rows.float(2, "range_m")?;
        if range < 0.0 {
            return Err(rows.error("range_m is negative"));
        }
        let stddev = match rows.str(3) {
            "" => None,
            _ => {
                let s = rows.float(3, "stddev_m")?;
                if s < 0.0 {
                    return Err(rows.error("stddev_m is negative"));
                }
                Some(s)
            }
        };
        let m = RangeMeasurement { range, stddev };
        match &mut current {
            Some((ct, ranges)) if *ct == t => {
                if ranges.insert(ap.clone(), m).is_some() {
                    return Err(rows.error(format!("duplicate ap_id `{ap}` at t={t}")));
                }
            }
            _ => {
                if let Some((ct, ranges)) = current.take() {
                    if !(t > ct) {
                        return Err(rows.error(format!("timestamp {t} does not increase")));
                    }
                    out.push(RttObservation::new(ct, ranges)?);
                }
                current = Some((t, BTreeMap::from([(ap, m)])));
            }
        }
    }
    if let Some((t, ranges)) = current {
        out.push(RttObservation::new(t, ranges)?);
    }
    Ok(out)
}

pub fn read_step_log<R: Read>(r: R, path: &Path) -> Result<Vec<StepEvent>> {
    let mut rows = Rows::open(r, path, STEP_HEADER)?;
    let mut out: Vec<StepEvent> = Vec::new();
    while rows.next()? {
        let s = StepEvent {
            index: rows.index(0, "j")?,
            t_start: rows.float(1, "t_start")?,
            t_end: rows.float(2, "t_end")?,
            length: rows.float(3, "length_m")?,
            heading: rows.float(4, "heading_rad")?,
        };
        if s.t_start >= s.t_end {
            return Err(rows.error("t_start must precede t_end"));
        }
        if s.length < 0.0 {
            return Err(rows.error("length_m is negative"));
        }
        if let Some(prev) = out.last() {
            if s.index <= prev.index {
                return Err(rows.error(format!("step index {} does not increase", s.index)));
            }
            if !(s.t_end > prev.t_end) {
                return Err(rows.error(format!("timestamp {} does not increase", s.t_end)));
            }
        }
        out.push(s);
    }
    Ok(out)
}

pub fn read_trajectory<R: Read>(r: R, path: &Path) -> Result<Trajectory> {
    let mut rows = Rows::open(r, path, TRAJECTORY_HEADER)?;
    let mut points: Vec<TimedPose> = Vec::new();
    while rows.next()? {
        let t = rows.float(0, "t")?;
        if let Some(prev) = points.last() {
            if !(t > prev.t) {
                return Err(rows.error(format!("timestamp {t} does not increase")));
            }
        }
        // stored as-is so a written trajectory reads back unchanged
        let pose = Pose2 {
            x: rows.float(1, "x")?,
            y: rows.float(2, "y")?,
            theta: rows.float(3, "theta")?,
        };
        points.push(TimedPose { t, pose });
    }
    Trajectory::new(points)
}

pub fn read_loop_pairs<R: Read>(r: R, path: &Path) -> Result<Vec<LoopPair>> {
    let mut rows = Rows::open(r, path, LOOP_PAIR_HEADER)?;
    let mut out = Vec::new();
    while rows.next()? {
        let (i, k) = (rows.index(0, "node_i")?, rows.index(1, "node_k")?);
        if i == k {
            return Err(rows.error("loop pair joins a node to itself"));
        }
        out.push(LoopPair::new(i, k));
    }
    Ok(out)
}

pub fn parse_loop_pairs(path: &Path) -> Result<Vec<LoopPair>> {
    read_loop_pairs(open(path)?, path)
}

pub fn parse_imu_log(path: &Path) -> Result<Vec<ImuSample>> {
    read_imu_log(open(path)?, path)
}

pub fn parse_rtt_log(path: &Path) -> Result<Vec<RttObservation>> {
    read_rtt_log(open(path)?, path)
}

pub fn parse_step_log(path: &Path) -> Result<Vec<StepEvent>> {
    read_step_log(open(path)?, path)
}

pub fn parse_trajectory(path: &Path) -> Result<Trajectory> {
    read_trajectory(open(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdr::PdrConfig;
    use crate::sim::{generate_walk, synth_imu, ImuSynthConfig, SimConfig};

    fn p() -> &'static Path {
        Path::new("test.csv")
    }

    fn line_of(e: Error) -> u64 {
        match e {
            Error::Parse { line, .. } => line,
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn header_only_is_empty() {
        assert!(read_imu_log("t,ax,ay,az,gx,gy,gz,mx,my,mz\n".as_bytes(), p()).unwrap().is_empty());
        assert!(read_rtt_log("t,ap_id,range_m,stddev_m\n".as_bytes(), p()).unwrap().is_empty());
        assert!(read_step_log("j,t_start,t_end,length_m,heading_rad\n".as_bytes(), p()).unwrap().is_empty());
    }

    #[test]
    fn bad_header_rejected() {
        let e = read_imu_log("t,ax,ay\n".as_bytes(), p()).unwrap_err();
        assert_eq!(line_of(e), 1);
        assert!(read_rtt_log("".as_bytes(), p()).is_err());
    }

    #[test]
    fn regression_cites_line() {
        let text = "t,ax,ay,az,gx,gy,gz,mx,my,mz\n\
                    0,0,0,9.8,0,0,0,20,0,-40\n\
                    0.01,0,0,9.8,0,0,0,20,0,-40\n\
                    0.005,0,0,9.8,0,0,0,20,0,-40\n";
        assert_eq!(line_of(read_imu_log(text.as_bytes(), p()).unwrap_err()), 4);

        let rtt = "t,ap_id,range_m,stddev_m\n1,a,2,\n1,b,3,0.5\n0.5,a,1,\n";
        assert_eq!(line_of(read_rtt_log(rtt.as_bytes(), p()).unwrap_err()), 4);
    }

    #[test]
    fn bad_values_cite_line() {
        let rtt = "t,ap_id,range_m,stddev_m\n1,a,2,\n2,a,NaN,\n";
        assert_eq!(line_of(read_rtt_log(rtt.as_bytes(), p()).unwrap_err()), 3);
        let rtt = "t,ap_id,range_m,stddev_m\n1,a,2,\n1,a,3,\n";
        assert_eq!(line_of(read_rtt_log(rtt.as_bytes(), p()).unwrap_err()), 3);
        let steps = "j,t_start,t_end,length_m,heading_rad\n0,0,1,0.7,0\n1,1,2,0.7\n";
        assert_eq!(line_of(read_step_log(steps.as_bytes(), p()).unwrap_err()), 3);
        let traj = "t,x,y,theta\n0,0,0,0\n1,inf,0,0\n";
        assert_eq!(line_of(read_trajectory(traj.as_bytes(), p()).unwrap_err()), 3);
    }

    #[test]
    fn rows_group_into_observations() {
        let rtt = "t,ap_id,range_m,stddev_m\n0,b,2,\n0,a,1,0.5\n0.2,a,1.5,\n";
        let obs = read_rtt_log(rtt.as_bytes(), p()).unwrap();
        assert_eq!(obs.len(), 2);
        assert_eq!(obs[0].ranges.len(), 2);
        assert_eq!(obs[0].ranges["a"].stddev, Some(0.5));
        assert_eq!(obs[1].ranges["a"].stddev, None);
    }

    #[test]
    fn simulated_logs_round_trip() {
        let cfg = SimConfig {
            laps: 2,
            ..SimConfig::default()
        };
        let out = generate_walk(&cfg).unwrap();
        let imu = synth_imu(&out.noisy_steps, &ImuSynthConfig::default(), &PdrConfig::default()).unwrap();

        let mut buf = Vec::new();
        write_imu_log(&mut buf, &imu).unwrap();
        assert_eq!(read_imu_log(buf.as_slice(), p()).unwrap(), imu);

        buf.clear();
        write_rtt_log(&mut buf, &out.rtt_observations).unwrap();
        assert_eq!(read_rtt_log(buf.as_slice(), p()).unwrap(), out.rtt_observations);

        buf.clear();
        write_step_log(&mut buf, &out.noisy_steps).unwrap();
        assert_eq!(read_step_log(buf.as_slice(), p()).unwrap(), out.noisy_steps);

        buf.clear();
        write_trajectory(&mut buf, &out.ground_truth).unwrap();
        assert_eq!(read_trajectory(buf.as_slice(), p()).unwrap(), out.ground_truth);
    }

    #[test]
    fn loop_report_format() {
        let mut buf = Vec::new();
        let rows = [
            LoopReportRow { node_i: 9, node_k: 2, rtt_distance: Some(0.25), scaling_factor: 1.0 },
            LoopReportRow { node_i: 12, node_k: 3, rtt_distance: None, scaling_factor: 0.5 },
        ];
        write_loop_report(&mut buf, &rows).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "node_i,node_k,d_rtt_m,s_final\n9,2,0.25,1\n12,3,,0.5\n"
        );
    }

    #[test]
    fn loop_pairs_round_trip() {
        let pairs = vec![LoopPair::new(9, 2), LoopPair::new(40, 11)];
        let mut buf = Vec::new();
        write_loop_pairs(&mut buf, &pairs).unwrap();
        assert_eq!(read_loop_pairs(buf.as_slice(), p()).unwrap(), pairs);
        assert_eq!(line_of(read_loop_pairs("node_i,node_k\n3,3\n".as_bytes(), p()).unwrap_err()), 2);
    }

    #[test]
    fn missing_file_names_path() {
        let e = parse_rtt_log(Path::new("/nonexistent/rtt.csv")).unwrap_err();
        assert!(e.to_string().contains("/nonexistent/rtt.csv"));
    }
}
