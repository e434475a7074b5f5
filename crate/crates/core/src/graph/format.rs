//! Plain-text edge list, one record per line:
//!
//! ```text
//! NODE id x y theta
//! ODOM from to dx dy dtheta i11 i12 i13 i22 i23 i33
//! LOOP i k i11 i12 i22 rtt_distance|-
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Records may appear
//! in any order; nodes must be numbered `0..n` without gaps.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{Matrix2, Matrix3};

use super::{LoopEdge, OdometryEdge, PoseGraph};
use crate::error::{Error, Result};
use crate::pose::Pose2;

pub fn write_graph<W: Write>(graph: &PoseGraph, mut out: W) -> std::io::Result<()> {
    for (id, p) in graph.nodes.iter().enumerate() {
        writeln!(out, "NODE {id} {} {} {}", p.x, p.y, p.theta)?;
    }
    for e in &graph.odometry {
        let m = &e.information;
        let z = &e.measurement;
        writeln!(
            out,
            "ODOM {} {} {} {} {} {} {} {} {} {} {}",
            e.from,
            e.to,
            z.x,
            z.y,
            z.theta,
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 2)]
        )?;
    }
    for e in &graph.loops {
        let m = &e.information;
        let d = e.rtt_distance.map_or_else(|| "-".to_string(), |d| d.to_string());
        writeln!(
            out,
            "LOOP {} {} {} {} {} {d}",
            e.node_i,
            e.node_k,
            m[(0, 0)],
            m[(0, 1)],
            m[(1, 1)]
        )?;
    }
    Ok(())
}

/// Parses the edge-list format; `origin` labels errors.
pub fn read_graph<R: BufRead>(input: R, origin: &Path) -> Result<PoseGraph> {
    let mut nodes: Vec<(usize, Pose2)> = Vec::new();
    let mut odometry = Vec::new();
    let mut loops = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line_no = n as u64 + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        let err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line: line_no,
            message,
        };
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let mut fields = text.split_whitespace();
        let tag = fields.next().unwrap_or_default();
        let rest: Vec<&str> = fields.collect();
        let num = |i: usize| -> Result<f64> {
            rest[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("field {} is not a finite number: {:?}", i + 2, rest[i])))
        };
        let idx = |i: usize| -> Result<usize> {
            rest[i]
                .parse::<usize>()
                .map_err(|_| err(format!("field {} is not an index: {:?}", i + 2, rest[i])))
        };
        let expect = |count: usize| -> Result<()> {
            if rest.len() == count {
                Ok(())
            } else {
                Err(err(format!("{tag} expects {count} fields, found {}", rest.len())))
            }
        };
        match tag {
            "NODE" => {
                expect(4)?;
                nodes.push((idx(0)?, Pose2::new(num(1)?, num(2)?, num(3)?)));
            }
            "ODOM" => {
                expect(11)?;
                let (a, b, c, d, e, f) = (num(5)?, num(6)?, num(7)?, num(8)?, num(9)?, num(10)?);
                odometry.push(OdometryEdge {
                    from: idx(0)?,
                    to: idx(1)?,
                    measurement: Pose2::new(num(2)?, num(3)?, num(4)?),
                    information: Matrix3::new(a, b, c, b, d, e, c, e, f),
                });
            }
            "LOOP" => {
                expect(6)?;
                let rtt = match rest[5] {
                    "-" => None,
                    _ => Some(num(5)?),
                };
                let (a, b, c) = (num(2)?, num(3)?, num(4)?);
                loops.push(LoopEdge {
                    node_i: idx(0)?,
                    node_k: idx(1)?,
                    information: Matrix2::new(a, b, b, c),
                    rtt_distance: rtt,
                });
            }
            other => return Err(err(format!("unknown record type {other:?}"))),
        }
    }
    nodes.sort_by_key(|(id, _)| *id);
    if nodes.iter().enumerate().any(|(n, (id, _))| n != *id) {
        return Err(Error::invalid(format!(
            "{}: node ids must be 0..n without gaps or duplicates",
            origin.display()
        )));
    }
    odometry.sort_by_key(|e| e.from);
    let graph = PoseGraph {
        nodes: nodes.into_iter().map(|(_, p)| p).collect(),
        odometry,
        loops,
    };
    graph.validate()?;
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn graph_strategy() -> impl Strategy<Value = PoseGraph> {
        let pose = (-1e3..1e3f64, -1e3..1e3f64, -3.1..3.1f64).prop_map(|(x, y, t)| Pose2::new(x, y, t));
        (
            proptest::collection::vec(pose.clone(), 3..20),
            proptest::collection::vec((0.1..100.0f64, 0.1..100.0f64, proptest::option::of(0.0..5.0f64)), 0..5),
        )
            .prop_map(|(nodes, loops)| {
                let odometry = (0..nodes.len() - 1)
                    .map(|j| OdometryEdge {
                        from: j,
                        to: j + 1,
                        measurement: nodes[j].between(&nodes[j + 1]),
                        information: Matrix3::new(4.0, 0.5, 0.1, 0.5, 3.0, 0.2, 0.1, 0.2, 2.0) * (j as f64 + 1.0),
                    })
                    .collect();
                let n = nodes.len();
                let loops = loops
                    .into_iter()
                    .enumerate()
                    .map(|(m, (a, c, d))| LoopEdge {
                        node_i: n - 1,
                        node_k: m % (n - 2),
                        information: Matrix2::new(a, 0.0, 0.0, c),
                        rtt_distance: d,
                    })
                    .collect();
                PoseGraph { nodes, odometry, loops }
            })
    }

    proptest! {
        #[test]
        fn text_round_trip(g in graph_strategy()) {
            let mut buf = Vec::new();
            write_graph(&g, &mut buf).unwrap();
            let back = read_graph(buf.as_slice(), Path::new("mem")).unwrap();
            prop_assert_eq!(back, g);
        }
    }

    #[test]
    fn reports_line_numbers() {
        let text = "NODE 0 0 0 0\n# comment\nNODE 1 1 0 zero\n";
        match read_graph(text.as_bytes(), Path::new("g.txt")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let text = "NODE 0 0 0 0\nEDGE 0 1\n";
        assert!(matches!(read_graph(text.as_bytes(), Path::new("g")), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn rejects_inconsistent_graph() {
        // two nodes, no odometry edge
        let text = "NODE 0 0 0 0\nNODE 1 1 0 0\n";
        assert!(read_graph(text.as_bytes(), Path::new("g")).is_err());
    }
}
