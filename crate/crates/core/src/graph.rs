//! Directed pose graph with relative orientation measurements.
//!
//! Nodes are dense indices `0..=n`; node 0 is the fixed reference. Every edge
//! `tail -> head` carries a measurement of `θ_head − θ_tail` and its variance.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::angles::wrap;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EdgeRecord {
    pub id: usize,
    pub tail: usize,
    pub head: usize,
}

impl EdgeRecord {
    /// The endpoint opposite to `node`.
    pub fn other(&self, node: usize) -> usize {
        if node == self.tail {
            self.head
        } else {
            self.tail
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseGraph {
    node_count: usize,
    edges: Vec<EdgeRecord>,
    measurements: Vec<f64>,
    variances: Vec<f64>,
    wrapped_on_ingest: Vec<usize>,
    adjacency: Vec<Vec<usize>>,
}

impl PoseGraph {
    /// Validates and builds a graph from `(tail, head, measurement, variance)`
    /// tuples. Measurements outside `(−π, π]` are wrapped and their edge ids
    /// recorded in [`PoseGraph::wrapped_on_ingest`].
    pub fn new(node_count: usize, edges: &[(usize, usize, f64, f64)]) -> Result<Self> {
        if node_count < 2 {
            return Err(Error::InvalidGraph(format!(
                "need at least 2 nodes, got {node_count}"
            )));
        }
        let mut records = Vec::with_capacity(edges.len());
        let mut measurements = Vec::with_capacity(edges.len());
        let mut variances = Vec::with_capacity(edges.len());
        let mut wrapped_on_ingest = Vec::new();
        let mut adjacency = vec![Vec::new(); node_count];
        for (id, &(tail, head, delta, variance)) in edges.iter().enumerate() {
            if tail >= node_count || head >= node_count {
                return Err(Error::InvalidGraph(format!(
                    "edge {id} references node outside 0..{node_count}"
                )));
            }
            if tail == head {
                return Err(Error::SelfLoop {
                    edge: id,
                    node: tail,
                });
            }
            if !delta.is_finite() {
                return Err(Error::NonFinite(format!("measurement of edge {id}")));
            }
            if !(variance > 0.0) || !variance.is_finite() {
                return Err(Error::NonpositiveVariance { edge: id, variance });
            }
            let wrapped = wrap(delta);
            if !(delta > -PI && delta <= PI) {
                wrapped_on_ingest.push(id);
            }
            records.push(EdgeRecord { id, tail, head });
            measurements.push(wrapped);
            variances.push(variance);
            adjacency[tail].push(id);
            adjacency[head].push(id);
        }
        let graph = Self {
            node_count,
            edges: records,
            measurements,
            variances,
            wrapped_on_ingest,
            adjacency,
        };
        let components = graph.component_count();
        if components != 1 {
            return Err(Error::Disconnected { components });
        }
        Ok(graph)
    }

    fn component_count(&self) -> usize {
        let mut seen = vec![false; self.node_count];
        let mut components = 0;
        for start in 0..self.node_count {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &e in &self.adjacency[u] {
                    let v = self.edges[e].other(u);
                    if !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
        }
        components
    }

    /// `n + 1`, including the reference node.
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// `n`, the number of free orientations.
    pub fn free_nodes(&self) -> usize {
        self.node_count - 1
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// `ℓ = m − n`.
    pub fn cyclomatic_number(&self) -> usize {
        self.edges.len() + 1 - self.node_count
    }

    pub fn edges(&self) -> &[EdgeRecord] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> &EdgeRecord {
        &self.edges[id]
    }

    pub fn measurements(&self) -> &[f64] {
        &self.measurements
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn wrapped_on_ingest(&self) -> &[usize] {
        &self.wrapped_on_ingest
    }

    /// Edge ids incident to `node`, in insertion order.
    pub fn incident_edges(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    /// Same topology and variances with replaced measurements (wrapped).
    pub fn with_measurements(&self, measurements: &[f64]) -> Result<Self> {
        assert_eq!(measurements.len(), self.edges.len());
        let tuples: Vec<_> = self
            .edges
            .iter()
            .zip(measurements)
            .zip(&self.variances)
            .map(|((e, &d), &v)| (e.tail, e.head, d, v))
            .collect();
        Self::new(self.node_count, &tuples)
    }

    /// Full `(n+1) × m` and reduced `n × m` incidence matrices.
    pub fn incidence_matrices(&self) -> (DMatrix<i32>, DMatrix<i32>) {
        let mut full = DMatrix::zeros(self.node_count, self.edges.len());
        for e in &self.edges {
            full[(e.tail, e.id)] = -1;
            full[(e.head, e.id)] = 1;
        }
        let reduced = full.rows(1, self.node_count - 1).into_owned();
        (full, reduced)
    }

    /// Reduced incidence matrix as `f64`.
    pub fn reduced_incidence_f64(&self) -> DMatrix<f64> {
        self.incidence_matrices().1.map(|x| x as f64)
    }

    /// `Aᵀθ` for node orientations `theta` of length `n` (node 0 is zero).
    pub fn edge_differences(&self, theta: &[f64]) -> Vec<f64> {
        assert_eq!(theta.len(), self.free_nodes());
        let at = |i: usize| if i == 0 { 0.0 } else { theta[i - 1] };
        self.edges.iter().map(|e| at(e.head) - at(e.tail)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TreeStrategy {
    /// The robot trajectory `0 → 1 → … → n`.
    Odometric,
    /// Minimum spanning tree under `w(e) = σ²_e`.
    MinimumUncertainty,
}

impl fmt::Display for TreeStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeStrategy::Odometric => write!(f, "odometric"),
            TreeStrategy::MinimumUncertainty => write!(f, "minimum-uncertainty"),
        }
    }
}

impl FromStr for TreeStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "odometric" | "odo" => Ok(Self::Odometric),
            "minimum-uncertainty" | "mst" => Ok(Self::MinimumUncertainty),
            other => Err(Error::InvalidArgument(format!(
                "unknown tree strategy {other:?}"
            ))),
        }
    }
}

/// A spanning tree plus the canonical edge ordering (tree edges first, then
/// chords, each group by ascending edge id).
#[derive(Debug, Clone, PartialEq)]
pub struct SpanningTree {
    strategy: TreeStrategy,
    in_tree: Vec<bool>,
    ordering: Vec<usize>,
    tree_count: usize,
    /// `(parent node, edge id)` for every node when rooted at node 0.
    parent: Vec<Option<(usize, usize)>>,
    depth: Vec<usize>,
}

impl SpanningTree {
    fn from_edges(graph: &PoseGraph, strategy: TreeStrategy, tree_edges: &[usize]) -> Self {
        let mut in_tree = vec![false; graph.edge_count()];
        for &e in tree_edges {
            in_tree[e] = true;
        }
        let mut ordering: Vec<usize> = (0..graph.edge_count()).filter(|&e| in_tree[e]).collect();
        let tree_count = ordering.len();
        ordering.extend((0..graph.edge_count()).filter(|&e| !in_tree[e]));

        let mut parent = vec![None; graph.node_count()];
        let mut depth = vec![0; graph.node_count()];
        let mut seen = vec![false; graph.node_count()];
        seen[0] = true;
        let mut queue = VecDeque::from([0usize]);
        while let Some(u) = queue.pop_front() {
            for &e in graph.incident_edges(u) {
                if !in_tree[e] {
                    continue;
                }
                let v = graph.edge(e).other(u);
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = Some((u, e));
                    depth[v] = depth[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        Self {
            strategy,
            in_tree,
            ordering,
            tree_count,
            parent,
            depth,
        }
    }

    pub fn strategy(&self) -> TreeStrategy {
        self.strategy
    }

    pub fn contains(&self, edge: usize) -> bool {
        self.in_tree[edge]
    }

    /// Tree edge ids, ascending.
    pub fn tree_edges(&self) -> &[usize] {
        &self.ordering[..self.tree_count]
    }

    /// Chord edge ids, ascending.
    pub fn chords(&self) -> &[usize] {
        &self.ordering[self.tree_count..]
    }

    /// Permutation of `0..m`: tree edges first, chords last.
    pub fn ordering(&self) -> &[usize] {
        &self.ordering
    }

    pub fn parent(&self, node: usize) -> Option<(usize, usize)> {
        self.parent[node]
    }

    /// Signed tree path from `from` to `to` as `(edge id, ±1)` where `+1`
    /// means the edge is traversed tail → head.
    pub fn path(&self, graph: &PoseGraph, from: usize, to: usize) -> Vec<(usize, i8)> {
        let mut up_from = Vec::new();
        let mut up_to = Vec::new();
        let (mut a, mut b) = (from, to);
        while self.depth[a] > self.depth[b] {
            let (p, e) = self.parent[a].expect("non-root has parent");
            up_from.push((e, a));
            a = p;
        }
        while self.depth[b] > self.depth[a] {
            let (p, e) = self.parent[b].expect("non-root has parent");
            up_to.push((e, b));
            b = p;
        }
        while a != b {
            let (pa, ea) = self.parent[a].expect("non-root has parent");
            up_from.push((ea, a));
            a = pa;
            let (pb, eb) = self.parent[b].expect("non-root has parent");
            up_to.push((eb, b));
            b = pb;
        }
        let mut path = Vec::with_capacity(up_from.len() + up_to.len());
        // going up: we leave `child` towards its parent
        for (e, child) in up_from {
            let sign = if graph.edge(e).tail == child { 1 } else { -1 };
            path.push((e, sign));
        }
        // going down: we enter `child` from its parent
        for (e, child) in up_to.into_iter().rev() {
            let sign = if graph.edge(e).head == child { 1 } else { -1 };
            path.push((e, sign));
        }
        path
    }

    /// Sum of `σ²` over tree edges.
    pub fn weight(&self, graph: &PoseGraph) -> f64 {
        self.tree_edges()
            .iter()
            .map(|&e| graph.variances()[e])
            .sum()
    }
}

/// Builds a spanning tree with the requested strategy.
pub fn spanning_tree(graph: &PoseGraph, strategy: TreeStrategy) -> Result<SpanningTree> {
    let tree_edges = match strategy {
        TreeStrategy::Odometric => odometric_edges(graph)?,
        TreeStrategy::MinimumUncertainty => minimum_spanning_edges(graph),
    };
    Ok(SpanningTree::from_edges(graph, strategy, &tree_edges))
}

fn odometric_edges(graph: &PoseGraph) -> Result<Vec<usize>> {
    let mut best: Vec<Option<usize>> = vec![None; graph.node_count() - 1];
    for e in graph.edges() {
        let (lo, hi) = if e.tail < e.head {
            (e.tail, e.head)
        } else {
            (e.head, e.tail)
        };
        if hi == lo + 1 && best[lo].is_none() {
            best[lo] = Some(e.id);
        }
    }
    best.iter()
        .enumerate()
        .map(|(i, e)| e.ok_or(Error::OdometricPathMissing(i, i + 1)))
        .collect()
}

fn minimum_spanning_edges(graph: &PoseGraph) -> Vec<usize> {
    let mut order: Vec<usize> = (0..graph.edge_count()).collect();
    let var = graph.variances();
    order.sort_by(|&a, &b| var[a].total_cmp(&var[b]).then(a.cmp(&b)));
    let mut dsu = DisjointSets::new(graph.node_count());
    let mut picked = Vec::with_capacity(graph.free_nodes());
    for e in order {
        let rec = graph.edge(e);
        if dsu.union(rec.tail, rec.head) {
            picked.push(e);
            if picked.len() == graph.free_nodes() {
                break;
            }
        }
    }
    picked
}

pub(crate) struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSets {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// The 8-node, 9-edge toy graph (A..H = 0..7, edges 1..9 = ids 0..8),
    /// unit variances, zero measurements.
    pub(crate) fn toy_graph() -> PoseGraph {
        let edges = [
            (0, 1),
            (1, 2),
            (2, 3),
            (3, 4),
            (4, 5),
            (5, 6),
            (6, 2),
            (6, 7),
            (7, 0),
        ];
        let tuples: Vec<_> = edges.iter().map(|&(t, h)| (t, h, 0.0, 1.0)).collect();
        PoseGraph::new(8, &tuples).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::toy_graph;
    use super::*;

    #[test]
    fn minimal_graph() {
        let g = PoseGraph::new(2, &[(0, 1, 0.5, 0.01)]).unwrap();
        assert_eq!(
            (g.free_nodes(), g.edge_count(), g.cyclomatic_number()),
            (1, 1, 0)
        );
    }

    #[test]
    fn toy_graph_dimensions() {
        let g = toy_graph();
        assert_eq!(
            (g.free_nodes(), g.edge_count(), g.cyclomatic_number()),
            (7, 9, 2)
        );
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            PoseGraph::new(4, &[(0, 1, 0.0, 1.0), (2, 3, 0.0, 1.0)]),
            Err(Error::Disconnected { components: 2 })
        ));
        assert!(matches!(
            PoseGraph::new(2, &[(0, 1, 0.0, 1.0), (1, 1, 0.0, 1.0)]),
            Err(Error::SelfLoop { edge: 1, node: 1 })
        ));
        assert!(matches!(
            PoseGraph::new(2, &[(0, 1, 0.0, 0.0)]),
            Err(Error::NonpositiveVariance { edge: 0, .. })
        ));
        assert!(matches!(
            PoseGraph::new(2, &[(0, 1, f64::NAN, 1.0)]),
            Err(Error::NonFinite(_))
        ));
        assert!(PoseGraph::new(1, &[]).is_err());
    }

    #[test]
    fn measurements_wrapped_and_flagged() {
        let g = PoseGraph::new(3, &[(0, 1, 4.0, 1.0), (1, 2, -PI, 1.0), (2, 0, 0.1, 1.0)]).unwrap();
        assert_eq!(g.wrapped_on_ingest(), &[0, 1]);
        assert!((g.measurements()[0] - (4.0 - 2.0 * PI)).abs() < 1e-15);
        assert_eq!(g.measurements()[1], PI);
    }

    #[test]
    fn parallel_edges_allowed() {
        let g = PoseGraph::new(2, &[(0, 1, 0.1, 1.0), (1, 0, -0.1, 1.0)]).unwrap();
        assert_eq!(g.cyclomatic_number(), 1);
    }

    #[test]
    fn toy_incidence_matches_printed_matrix() {
        let (full, reduced) = toy_graph().incidence_matrices();
        #[rustfmt::skip]
        let printed = DMatrix::from_row_slice(8, 9, &[
            -1,  0,  0,  0,  0,  0,  0,  0,  1,
             1, -1,  0,  0,  0,  0,  0,  0,  0,
             0,  1, -1,  0,  0,  0,  1,  0,  0,
             0,  0,  1, -1,  0,  0,  0,  0,  0,
             0,  0,  0,  1, -1,  0,  0,  0,  0,
             0,  0,  0,  0,  1, -1,  0,  0,  0,
             0,  0,  0,  0,  0,  1, -1, -1,  0,
             0,  0,  0,  0,  0,  0,  0,  1, -1,
        ]);
        assert_eq!(full, printed);
        assert_eq!(reduced, printed.rows(1, 7).into_owned());
        assert_eq!(reduced.map(|x| x as f64).rank(1e-9), 7);
    }

    #[test]
    fn small_incidence_examples() {
        let g = PoseGraph::new(2, &[(0, 1, 0.0, 1.0)]).unwrap();
        let (full, reduced) = g.incidence_matrices();
        assert_eq!(full, DMatrix::from_row_slice(2, 1, &[-1, 1]));
        assert_eq!(reduced, DMatrix::from_row_slice(1, 1, &[1]));

        let g = PoseGraph::new(3, &[(0, 1, 0.0, 1.0), (1, 2, 0.0, 1.0)]).unwrap();
        let (_, reduced) = g.incidence_matrices();
        assert_eq!(reduced, DMatrix::from_row_slice(2, 2, &[1, -1, 0, 1]));
    }

    #[test]
    fn toy_odometric_tree() {
        let g = toy_graph();
        let t = spanning_tree(&g, TreeStrategy::Odometric).unwrap();
        assert_eq!(t.tree_edges(), &[0, 1, 2, 3, 4, 5, 7]);
        assert_eq!(t.chords(), &[6, 8]);
        assert_eq!(t.ordering(), &[0, 1, 2, 3, 4, 5, 7, 6, 8]);
    }

    #[test]
    fn odometric_requires_consecutive_edges() {
        let g = PoseGraph::new(3, &[(0, 2, 0.0, 1.0), (2, 1, 0.0, 1.0)]).unwrap();
        assert!(matches!(
            spanning_tree(&g, TreeStrategy::Odometric),
            Err(Error::OdometricPathMissing(0, 1))
        ));
    }

    #[test]
    fn tree_graph_has_no_chords() {
        let g = PoseGraph::new(4, &[(0, 1, 0.0, 1.0), (1, 2, 0.0, 1.0), (1, 3, 0.0, 2.0)]).unwrap();
        for s in [TreeStrategy::Odometric, TreeStrategy::MinimumUncertainty] {
            if let Ok(t) = spanning_tree(&g, s) {
                assert!(t.chords().is_empty());
            }
        }
        let t = spanning_tree(&g, TreeStrategy::MinimumUncertainty).unwrap();
        assert_eq!(t.tree_edges(), &[0, 1, 2]);
    }

    #[test]
    fn triangle_minimum_tree() {
        let g = PoseGraph::new(3, &[(0, 1, 0.0, 0.1), (1, 2, 0.0, 0.2), (2, 0, 0.0, 0.3)]).unwrap();
        let t = spanning_tree(&g, TreeStrategy::MinimumUncertainty).unwrap();
        assert_eq!(t.tree_edges(), &[0, 1]);
        // enumerate the three spanning trees: {0,1}: 0.3, {0,2}: 0.4, {1,2}: 0.5
        assert!((t.weight(&g) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn mst_ties_prefer_smaller_ids() {
        let g = PoseGraph::new(3, &[(0, 1, 0.0, 1.0), (1, 2, 0.0, 1.0), (2, 0, 0.0, 1.0)]).unwrap();
        let t = spanning_tree(&g, TreeStrategy::MinimumUncertainty).unwrap();
        assert_eq!(t.tree_edges(), &[0, 1]);
    }

    #[test]
    fn tree_paths_are_signed() {
        let g = toy_graph();
        let t = spanning_tree(&g, TreeStrategy::Odometric).unwrap();
        assert_eq!(t.path(&g, 2, 6), vec![(2, 1), (3, 1), (4, 1), (5, 1)]);
        assert_eq!(t.path(&g, 6, 2), vec![(5, -1), (4, -1), (3, -1), (2, -1)]);
        assert!(t.path(&g, 3, 3).is_empty());
    }

    #[test]
    fn minimum_tree_never_heavier_than_odometric() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.random_range(3..12);
            let mut edges: Vec<_> = (0..n - 1)
                .map(|i| (i, i + 1, 0.0, rng.random_range(0.01..1.0)))
                .collect();
            for _ in 0..rng.random_range(0..6) {
                let a = rng.random_range(0..n);
                let b = rng.random_range(0..n);
                if a != b {
                    edges.push((a, b, 0.0, rng.random_range(0.01..1.0)));
                }
            }
            let g = PoseGraph::new(n, &edges).unwrap();
            let odo = spanning_tree(&g, TreeStrategy::Odometric).unwrap();
            let mst = spanning_tree(&g, TreeStrategy::MinimumUncertainty).unwrap();
            assert!(mst.weight(&g) <= odo.weight(&g) + 1e-12);
            assert_eq!(mst.tree_edges().len(), n - 1);
        }
    }
}
