use std::str::FromStr;

use crate::angles::wrap;
use crate::graph::{spanning_tree, TreeStrategy};
use crate::linalg::sparse::{SpdFactor, SymmetricTriplets};
use crate::{Error, Result};

use super::{write_g2o, PoseGraph2D};

/// How positions are filled in once orientations are fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositionMode {
    /// Compose relative translations along a spanning tree.
    Odometry,
    /// Weighted least squares over all edges.
    Linear,
}

impl FromStr for PositionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "odometry" => Ok(Self::Odometry),
            "linear" => Ok(Self::Linear),
            other => Err(Error::InvalidArgument(format!(
                "unknown position mode {other:?}"
            ))),
        }
    }
}

fn check_theta(graph: &PoseGraph2D, theta: &[f64]) -> Result<()> {
    if theta.len() + 1 != graph.vertices.len() {
        return Err(Error::InvalidArgument(format!(
            "{} orientations for {} vertices",
            theta.len(),
            graph.vertices.len()
        )));
    }
    Ok(())
}

fn rotated(angle: f64, x: f64, y: f64) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    [c * x - s * y, s * x + c * y]
}

/// Positions relative to node 0 by composing edge translations along the
/// odometric tree (or the minimum-uncertainty tree if the chain is absent).
/// `theta` holds orientations of nodes `1..=n` relative to node 0.
pub fn integrate_odometry(graph: &PoseGraph2D, theta: &[f64]) -> Result<Vec<[f64; 2]>> {
    check_theta(graph, theta)?;
    let pg = &graph.orientation;
    let tree = match spanning_tree(pg, TreeStrategy::Odometric) {
        Ok(t) => t,
        Err(Error::OdometricPathMissing(..)) => {
            spanning_tree(pg, TreeStrategy::MinimumUncertainty)?
        }
        Err(e) => return Err(e),
    };
    let at = |v: usize| if v == 0 { 0.0 } else { theta[v - 1] };
    let count = graph.vertices.len();
    let mut positions: Vec<Option<[f64; 2]>> = vec![None; count];
    positions[0] = Some([0.0, 0.0]);
    let mut order: Vec<usize> = (1..count).collect();
    let mut depth = vec![0usize; count];
    for v in 1..count {
        let mut d = 0;
        let mut u = v;
        while let Some((p, _)) = tree.parent(u) {
            d += 1;
            u = p;
        }
        depth[v] = d;
    }
    order.sort_by_key(|&v| depth[v]);
    for v in order {
        let (parent, e) = tree
            .parent(v)
            .expect("every non-root node has a tree parent");
        let edge = &graph.edges[e];
        let base = positions[parent].expect("parents are placed first");
        let p = if edge.tail == parent {
            let d = rotated(at(parent), edge.dx, edge.dy);
            [base[0] + d[0], base[1] + d[1]]
        } else {
            let d = rotated(at(v), edge.dx, edge.dy);
            [base[0] - d[0], base[1] - d[1]]
        };
        positions[v] = Some(p);
    }
    Ok(positions
        .into_iter()
        .map(|p| p.expect("tree spans the graph"))
        .collect())
}

/// Weighted least-squares positions given orientations, with node 0 pinned
/// at the origin. Each edge contributes the residual
/// `p_head − p_tail − R(θ_tail)·t` weighted by its rotated position
/// information block.
pub fn solve_positions_given_orientations(
    graph: &PoseGraph2D,
    theta: &[f64],
) -> Result<Vec<[f64; 2]>> {
    check_theta(graph, theta)?;
    let n = theta.len();
    let at = |v: usize| if v == 0 { 0.0 } else { theta[v - 1] };
    let mut normal = SymmetricTriplets::new(2 * n);
    let mut rhs = vec![0.0; 2 * n];
    for edge in &graph.edges {
        let i = &edge.information;
        let (s, c) = at(edge.tail).sin_cos();
        let r = [[c, -s], [s, c]];
        let omega = [[i[0], i[1]], [i[1], i[3]]];
        let mut w = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                w[a][b] = (0..2)
                    .flat_map(|p| (0..2).map(move |q| (p, q)))
                    .map(|(p, q)| r[a][p] * omega[p][q] * r[b][q])
                    .sum();
            }
        }
        let z = rotated(at(edge.tail), edge.dx, edge.dy);
        let wz = [
            w[0][0] * z[0] + w[0][1] * z[1],
            w[1][0] * z[0] + w[1][1] * z[1],
        ];
        let slot = |v: usize| if v == 0 { None } else { Some(2 * (v - 1)) };
        let (h, t) = (slot(edge.head), slot(edge.tail));
        for (node, sign) in [(h, 1.0), (t, -1.0)] {
            if let Some(k) = node {
                for a in 0..2 {
                    rhs[k + a] += sign * wz[a];
                    for b in a..2 {
                        normal.add(k + a, k + b, w[a][b]);
                    }
                }
            }
        }
        if let (Some(hk), Some(tk)) = (h, t) {
            for a in 0..2 {
                for b in 0..2 {
                    normal.add(hk + a, tk + b, -w[a][b]);
                }
            }
        }
    }
    let solution = if n == 0 {
        Vec::new()
    } else {
        SpdFactor::new(&normal)?.solve(&rhs)
    };
    let mut positions = vec![[0.0, 0.0]];
    positions.extend(solution.chunks(2).map(|p| [p[0], p[1]]));
    Ok(positions)
}

/// A copy of `graph` whose vertices carry the given orientations and
/// positions recovered from them. The result is anchored at the input pose of
/// node 0; edges are untouched.
pub fn bootstrapped(graph: &PoseGraph2D, theta: &[f64], mode: PositionMode) -> Result<PoseGraph2D> {
    let local = match mode {
        PositionMode::Odometry => integrate_odometry(graph, theta)?,
        PositionMode::Linear => solve_positions_given_orientations(graph, theta)?,
    };
    let [x0, y0, t0] = graph.vertices[0];
    let vertices = local
        .iter()
        .enumerate()
        .map(|(v, p)| {
            let d = rotated(t0, p[0], p[1]);
            let rel = if v == 0 { 0.0 } else { theta[v - 1] };
            [x0 + d[0], y0 + d[1], wrap(t0 + rel)]
        })
        .collect();
    Ok(graph.with_vertices(vertices))
}

/// [`bootstrapped`] serialized as g2o.
pub fn write_bootstrapped(
    graph: &PoseGraph2D,
    theta: &[f64],
    mode: PositionMode,
) -> Result<String> {
    Ok(write_g2o(&bootstrapped(graph, theta, mode)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::cost;
    use crate::io::parse_g2o;
    use crate::synth::grid_walk;

    fn exported() -> (PoseGraph2D, Vec<f64>, Vec<[f64; 2]>) {
        let inst = grid_walk(5, 5, 0.4, 0.0, 3).unwrap();
        let g2 = PoseGraph2D::from_instance(&inst, 100.0).unwrap();
        (g2, inst.theta_true.clone(), inst.positions.clone().unwrap())
    }

    #[test]
    fn exact_orientations_recover_exact_positions() {
        let (g2, theta, truth) = exported();
        for mode in [PositionMode::Odometry, PositionMode::Linear] {
            let out = bootstrapped(&g2, &theta, mode).unwrap();
            for (v, p) in out.vertices.iter().zip(&truth) {
                assert!(
                    (v[0] - p[0]).abs() < 1e-9 && (v[1] - p[1]).abs() < 1e-9,
                    "{mode:?}"
                );
            }
        }
    }

    #[test]
    fn written_file_keeps_edges_and_cost() {
        let (g2, theta, _) = exported();
        let text = write_bootstrapped(&g2, &theta, PositionMode::Linear).unwrap();
        let back = parse_g2o(&text).unwrap();
        assert_eq!(back.edges, g2.edges);
        let c_in = cost(&g2.orientation, &theta);
        let c_out = cost(&back.orientation, &back.relative_orientations());
        assert!((c_in - c_out).abs() < 1e-9);
    }

    #[test]
    fn anchored_at_first_vertex() {
        let text = "VERTEX_SE2 3 5 -2 1\nVERTEX_SE2 4 0 0 0\nEDGE_SE2 3 4 1 0 0.5 1 0 0 1 0 1\n";
        let g = parse_g2o(text).unwrap();
        let out = bootstrapped(&g, &[0.5], PositionMode::Linear).unwrap();
        assert_eq!(out.vertices[0], [5.0, -2.0, 1.0]);
        assert!((out.vertices[1][0] - (5.0 + 1f64.cos())).abs() < 1e-12);
        assert!((out.vertices[1][1] - (-2.0 + 1f64.sin())).abs() < 1e-12);
        assert!((out.vertices[1][2] - 1.5).abs() < 1e-12);
        assert!(bootstrapped(&g, &[], PositionMode::Linear).is_err());
    }
}
