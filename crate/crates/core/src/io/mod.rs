//! Pose-graph files (g2o and TORO 2D), bootstrapped exports, reports and the
//! command-line front end.
//!
//! External vertex ids are remapped to a dense range in ascending id order,
//! so the smallest id becomes the reference node 0. Only the θθ information
//! entry feeds the orientation variance.
//!
//! TORO `EDGE2` lines are read with the information entries in the order
//! `xx xy yy tt xt yt`.

pub mod cli;
mod positions;
mod report;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use log::warn;

use crate::angles::wrap;
use crate::graph::PoseGraph;
use crate::oracle::GroundTruthInstance;
use crate::{Error, Result};

pub use positions::{
    bootstrapped, integrate_odometry, solve_positions_given_orientations, write_bootstrapped,
    PositionMode,
};
pub use report::{format_report, parse_truth, write_truth, Report, Truth};

/// Information entries in g2o order `I11 I12 I13 I22 I23 I33`.
pub type Information = [f64; 6];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Se2Edge {
    /// Dense tail index.
    pub tail: usize,
    /// Dense head index.
    pub head: usize,
    pub dx: f64,
    pub dy: f64,
    pub dtheta: f64,
    pub information: Information,
}

impl Se2Edge {
    pub fn theta_variance(&self) -> f64 {
        1.0 / self.information[5]
    }
}

/// A planar pose graph together with its orientation sub-problem.
#[derive(Debug, Clone)]
pub struct PoseGraph2D {
    /// Original vertex id of each dense index.
    pub ids: Vec<i64>,
    /// `(x, y, θ)` per dense index.
    pub vertices: Vec<[f64; 3]>,
    pub edges: Vec<Se2Edge>,
    pub orientation: PoseGraph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    G2o,
    Toro,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "g2o" => Ok(Format::G2o),
            "toro" => Ok(Format::Toro),
            other => Err(Error::InvalidArgument(format!("unknown format {other:?}"))),
        }
    }
}

impl PoseGraph2D {
    /// Assembles from dense data and builds the orientation graph.
    pub fn new(ids: Vec<i64>, vertices: Vec<[f64; 3]>, edges: Vec<Se2Edge>) -> Result<Self> {
        let tuples: Vec<_> = edges
            .iter()
            .map(|e| (e.tail, e.head, e.dtheta, e.theta_variance()))
            .collect();
        let orientation = PoseGraph::new(vertices.len(), &tuples)?;
        Ok(Self {
            ids,
            vertices,
            edges,
            orientation,
        })
    }

    /// Orientations of nodes `1..=n` relative to node 0, from the vertex poses.
    pub fn relative_orientations(&self) -> Vec<f64> {
        let t0 = self.vertices[0][2];
        self.vertices[1..].iter().map(|v| wrap(v[2] - t0)).collect()
    }

    /// Copy with new vertex poses and identical edges.
    pub fn with_vertices(&self, vertices: Vec<[f64; 3]>) -> Self {
        assert_eq!(vertices.len(), self.vertices.len());
        Self {
            vertices,
            ..self.clone()
        }
    }

    /// Export of a simulated instance: exact relative translations from the
    /// true positions, the noisy orientation measurements, and position
    /// information `position_information · I₂`.
    pub fn from_instance(
        instance: &GroundTruthInstance,
        position_information: f64,
    ) -> Result<Self> {
        let graph = &instance.graph;
        let count = graph.node_count();
        let positions = instance
            .positions
            .clone()
            .unwrap_or_else(|| vec![[0.0, 0.0]; count]);
        let theta = |v: usize| {
            if v == 0 {
                0.0
            } else {
                instance.theta_true[v - 1]
            }
        };
        let vertices: Vec<[f64; 3]> = (0..count)
            .map(|v| [positions[v][0], positions[v][1], theta(v)])
            .collect();
        let edges = graph
            .edges()
            .iter()
            .map(|e| {
                let (c, s) = (theta(e.tail).cos(), theta(e.tail).sin());
                let gx = positions[e.head][0] - positions[e.tail][0];
                let gy = positions[e.head][1] - positions[e.tail][1];
                Se2Edge {
                    tail: e.tail,
                    head: e.head,
                    dx: c * gx + s * gy,
                    dy: -s * gx + c * gy,
                    dtheta: graph.measurements()[e.id],
                    information: [
                        position_information,
                        0.0,
                        0.0,
                        position_information,
                        0.0,
                        1.0 / graph.variances()[e.id],
                    ],
                }
            })
            .collect();
        Self::new((0..count as i64).collect(), vertices, edges)
    }
}

fn parse_number(token: Option<&str>, line: usize, what: &str) -> Result<f64> {
    let token = token.ok_or_else(|| Error::MalformedLine {
        line,
        message: format!("missing {what}"),
    })?;
    let value: f64 = token.parse().map_err(|_| Error::MalformedLine {
        line,
        message: format!("cannot parse {what} from {token:?}"),
    })?;
    if !value.is_finite() {
        return Err(Error::MalformedLine {
            line,
            message: format!("{what} is not finite"),
        });
    }
    Ok(value)
}

fn parse_id(token: Option<&str>, line: usize, what: &str) -> Result<i64> {
    let token = token.ok_or_else(|| Error::MalformedLine {
        line,
        message: format!("missing {what}"),
    })?;
    token.parse().map_err(|_| Error::MalformedLine {
        line,
        message: format!("cannot parse {what} from {token:?}"),
    })
}

struct RawEdge {
    tail: i64,
    head: i64,
    dx: f64,
    dy: f64,
    dtheta: f64,
    information: Information,
}

fn parse_text(text: &str, format: Format) -> Result<PoseGraph2D> {
    let (vertex_tag, edge_tag) = match format {
        Format::G2o => ("VERTEX_SE2", "EDGE_SE2"),
        Format::Toro => ("VERTEX2", "EDGE2"),
    };
    let mut vertices: BTreeMap<i64, [f64; 3]> = BTreeMap::new();
    let mut raw_edges = Vec::new();
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let tag = tokens.next().expect("non-empty line");
        if tag == vertex_tag {
            let id = parse_id(tokens.next(), line, "vertex id")?;
            let x = parse_number(tokens.next(), line, "x")?;
            let y = parse_number(tokens.next(), line, "y")?;
            let theta = parse_number(tokens.next(), line, "theta")?;
            if vertices.insert(id, [x, y, theta]).is_some() {
                return Err(Error::MalformedLine {
                    line,
                    message: format!("vertex {id} declared twice"),
                });
            }
        } else if tag == edge_tag {
            let tail = parse_id(tokens.next(), line, "tail id")?;
            let head = parse_id(tokens.next(), line, "head id")?;
            let dx = parse_number(tokens.next(), line, "dx")?;
            let dy = parse_number(tokens.next(), line, "dy")?;
            let dtheta = parse_number(tokens.next(), line, "dtheta")?;
            let mut info = [0.0; 6];
            for (k, slot) in info.iter_mut().enumerate() {
                *slot = parse_number(tokens.next(), line, &format!("information entry {}", k + 1))?;
            }
            let information = match format {
                Format::G2o => info,
                // xx xy yy tt xt yt → xx xy xt yy yt tt
                Format::Toro => [info[0], info[1], info[4], info[2], info[5], info[3]],
            };
            if !(information[5] > 0.0) {
                return Err(Error::NonpositiveInformation {
                    line,
                    value: information[5],
                });
            }
            raw_edges.push(RawEdge {
                tail,
                head,
                dx,
                dy,
                dtheta,
                information,
            });
        } else {
            warn!("line {line}: ignoring unsupported record {tag}");
        }
    }
    for e in &raw_edges {
        for id in [e.tail, e.head] {
            if !vertices.contains_key(&id) {
                warn!("vertex {id} is referenced by an edge but never declared; using a zero pose");
                vertices.insert(id, [0.0; 3]);
            }
        }
    }
    let ids: Vec<i64> = vertices.keys().copied().collect();
    let dense: BTreeMap<i64, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let poses: Vec<[f64; 3]> = vertices.values().copied().collect();
    let edges = raw_edges
        .into_iter()
        .map(|e| Se2Edge {
            tail: dense[&e.tail],
            head: dense[&e.head],
            dx: e.dx,
            dy: e.dy,
            dtheta: e.dtheta,
            information: e.information,
        })
        .collect();
    PoseGraph2D::new(ids, poses, edges)
}

pub fn parse_g2o(text: &str) -> Result<PoseGraph2D> {
    parse_text(text, Format::G2o)
}

pub fn parse_toro(text: &str) -> Result<PoseGraph2D> {
    parse_text(text, Format::Toro)
}

pub fn parse(text: &str, format: Format) -> Result<PoseGraph2D> {
    parse_text(text, format)
}

/// Serializes in g2o format with the original vertex ids.
pub fn write_g2o(graph: &PoseGraph2D) -> String {
    let mut out = String::new();
    for (id, v) in graph.ids.iter().zip(&graph.vertices) {
        writeln!(out, "VERTEX_SE2 {id} {} {} {}", v[0], v[1], v[2]).expect("write to string");
    }
    for e in &graph.edges {
        let i = &e.information;
        writeln!(
            out,
            "EDGE_SE2 {} {} {} {} {} {} {} {} {} {} {}",
            graph.ids[e.tail],
            graph.ids[e.head],
            e.dx,
            e.dy,
            e.dtheta,
            i[0],
            i[1],
            i[2],
            i[3],
            i[4],
            i[5]
        )
        .expect("write to string");
    }
    out
}

/// Serializes in TORO format (`EDGE2 … xx xy yy tt xt yt`).
pub fn write_toro(graph: &PoseGraph2D) -> String {
    let mut out = String::new();
    for (id, v) in graph.ids.iter().zip(&graph.vertices) {
        writeln!(out, "VERTEX2 {id} {} {} {}", v[0], v[1], v[2]).expect("write to string");
    }
    for e in &graph.edges {
        let i = &e.information;
        writeln!(
            out,
            "EDGE2 {} {} {} {} {} {} {} {} {} {} {}",
            graph.ids[e.tail],
            graph.ids[e.head],
            e.dx,
            e.dy,
            e.dtheta,
            i[0],
            i[1],
            i[3],
            i[5],
            i[2],
            i[4]
        )
        .expect("write to string");
    }
    out
}
