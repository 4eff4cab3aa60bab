//! Exact minimum cycle basis from Horton's candidate family.
//!
//! For every source vertex `v` a shortest-path tree is grown under
//! `w(e) = σ²_e`; each edge `(x, y)` whose endpoints hang off different
//! branches of that tree closes the candidate circuit `v ⇝ x → y ⇝ v`.
//! Candidates are scanned by ascending weight and kept when independent of
//! the ones already kept over GF(2). Independence is tested in chord
//! coordinates of the minimum-uncertainty tree, which is also the tree the
//! result is canonicalized against.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::hash::{Hash, Hasher};

use rayon::prelude::*;

use super::{BasisKind, Circuit, CycleBasisMatrix};
use crate::graph::{spanning_tree, PoseGraph, TreeStrategy};
use crate::Result;

const NONE: u32 = u32::MAX;

/// Shortest-path tree from one source.
struct PathTree {
    /// Edge leading to each node from its parent (`NONE` at the source).
    parent_edge: Vec<u32>,
}

#[derive(Clone, Copy)]
struct Candidate {
    weight: f64,
    source: u32,
    edge: u32,
}

#[derive(PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (dist, node)
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra with ties on distance resolved towards the smaller predecessor
/// node, then the smaller edge id.
fn shortest_path_tree(graph: &PoseGraph, source: usize) -> (Vec<f64>, Vec<u32>, Vec<u32>) {
    let n = graph.node_count();
    let var = graph.variances();
    let mut dist = vec![f64::INFINITY; n];
    let mut parent_node = vec![NONE; n];
    let mut parent_edge = vec![NONE; n];
    let mut done = vec![false; n];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::from([HeapEntry {
        dist: 0.0,
        node: source,
    }]);
    while let Some(HeapEntry { dist: d, node: u }) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for &e in graph.incident_edges(u) {
            let v = graph.edge(e).other(u);
            if done[v] {
                continue;
            }
            let nd = d + var[e];
            let better = match nd.total_cmp(&dist[v]) {
                Ordering::Less => true,
                Ordering::Equal => (u as u32, e as u32) < (parent_node[v], parent_edge[v]),
                Ordering::Greater => false,
            };
            if better {
                dist[v] = nd;
                parent_node[v] = u as u32;
                parent_edge[v] = e as u32;
                heap.push(HeapEntry { dist: nd, node: v });
            }
        }
    }
    (dist, parent_node, parent_edge)
}

/// Candidates rooted at `source`, plus the tree needed to materialize them.
fn candidates_from(graph: &PoseGraph, source: usize) -> (PathTree, Vec<Candidate>) {
    let (dist, parent_node, parent_edge) = shortest_path_tree(graph, source);
    // branch[u]: the child of `source` whose subtree contains u (source maps to itself)
    let n = graph.node_count();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
    let mut branch = vec![NONE; n];
    branch[source] = source as u32;
    for &u in &order {
        if u == source {
            continue;
        }
        let p = parent_node[u] as usize;
        branch[u] = if p == source { u as u32 } else { branch[p] };
    }
    let var = graph.variances();
    let mut out = Vec::new();
    for rec in graph.edges() {
        let (x, y) = (rec.tail, rec.head);
        if parent_edge[x] == rec.id as u32 || parent_edge[y] == rec.id as u32 {
            continue;
        }
        let disjoint = x == source || y == source || branch[x] != branch[y];
        if !disjoint {
            continue;
        }
        out.push(Candidate {
            weight: dist[x] + var[rec.id] + dist[y],
            source: source as u32,
            edge: rec.id as u32,
        });
    }
    (PathTree { parent_edge }, out)
}

/// Signed traversal `x ⇝ source ⇝ y → x` of a candidate.
fn materialize(graph: &PoseGraph, tree: &PathTree, edge: usize) -> Vec<(usize, i8)> {
    let rec = graph.edge(edge);
    let (x, y) = (rec.tail, rec.head);
    let mut entries = Vec::new();
    // climb from x to the source: leaving each node towards its parent
    let mut u = x;
    while tree.parent_edge[u] != NONE {
        let e = tree.parent_edge[u] as usize;
        let r = graph.edge(e);
        entries.push((e, if r.tail == u { 1 } else { -1 }));
        u = r.other(u);
    }
    // descend from the source to y: the reverse of climbing from y
    let mut u = y;
    while tree.parent_edge[u] != NONE {
        let e = tree.parent_edge[u] as usize;
        let r = graph.edge(e);
        entries.push((e, if r.head == u { 1 } else { -1 }));
        u = r.other(u);
    }
    // close with y → x, i.e. the edge traversed backwards
    entries.push((edge, -1));
    entries
}

struct Gf2Basis {
    words: usize,
    pivots: Vec<Option<Vec<u64>>>,
    rank: usize,
}

impl Gf2Basis {
    fn new(dim: usize) -> Self {
        Self {
            words: dim.div_ceil(64),
            pivots: vec![None; dim],
            rank: 0,
        }
    }

    /// Inserts `v` if it is independent of the stored vectors.
    fn insert(&mut self, mut v: Vec<u64>) -> bool {
        let mut w = 0;
        loop {
            while w < self.words && v[w] == 0 {
                w += 1;
            }
            if w == self.words {
                return false;
            }
            let bit = w * 64 + v[w].trailing_zeros() as usize;
            match &self.pivots[bit] {
                Some(p) => {
                    for i in w..self.words {
                        v[i] ^= p[i];
                    }
                }
                None => {
                    self.pivots[bit] = Some(v);
                    self.rank += 1;
                    return true;
                }
            }
        }
    }
}

fn fingerprint(words: &[u64]) -> (u64, u64) {
    let mut a = std::collections::hash_map::DefaultHasher::new();
    words.hash(&mut a);
    // second, differently seeded pass to make collisions negligible
    let mut b = std::collections::hash_map::DefaultHasher::new();
    0x9e37_79b9_7f4a_7c15u64.hash(&mut b);
    words.hash(&mut b);
    (a.finish(), b.finish())
}

/// Minimum cycle basis under `w(e) = σ²_e`, canonical against the
/// minimum-uncertainty spanning tree.
pub fn minimum_cycle_basis(graph: &PoseGraph) -> Result<CycleBasisMatrix> {
    let tree = spanning_tree(graph, TreeStrategy::MinimumUncertainty)?;
    let ell = graph.cyclomatic_number();
    if ell == 0 {
        return Ok(CycleBasisMatrix::new(
            BasisKind::Mcb,
            graph.edge_count(),
            Vec::new(),
            tree,
        ));
    }
    let mut chord_position = vec![usize::MAX; graph.edge_count()];
    for (j, &e) in tree.chords().iter().enumerate() {
        chord_position[e] = j;
    }

    let per_source: Vec<(PathTree, Vec<Candidate>)> = (0..graph.node_count())
        .into_par_iter()
        .map(|v| candidates_from(graph, v))
        .collect();
    let mut trees = Vec::with_capacity(per_source.len());
    let mut candidates = Vec::new();
    for (t, c) in per_source {
        trees.push(t);
        candidates.extend(c);
    }
    candidates.sort_unstable_by(|a, b| {
        a.weight
            .total_cmp(&b.weight)
            .then(a.source.cmp(&b.source))
            .then(a.edge.cmp(&b.edge))
    });

    let mut basis = Gf2Basis::new(ell);
    let mut seen = HashSet::new();
    let mut rows = Vec::with_capacity(ell);
    let mut words = vec![0u64; basis.words];
    for cand in &candidates {
        let tree_v = &trees[cand.source as usize];
        let traversal = materialize(graph, tree_v, cand.edge as usize);
        words.iter_mut().for_each(|w| *w = 0);
        for &(e, _) in &traversal {
            let j = chord_position[e];
            if j != usize::MAX {
                words[j / 64] ^= 1 << (j % 64);
            }
        }
        if !seen.insert(fingerprint(&words)) {
            continue;
        }
        if basis.insert(words.clone()) {
            let mut circuit = Circuit::from_traversal(traversal);
            circuit.normalize_sign();
            rows.push(circuit);
            if rows.len() == ell {
                break;
            }
        }
    }
    debug_assert_eq!(rows.len(), ell, "Horton family spans the cycle space");
    Ok(CycleBasisMatrix::new(
        BasisKind::Mcb,
        graph.edge_count(),
        rows,
        tree,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycles::{cycle_basis, BasisKind};
    use crate::graph::fixtures::toy_graph;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn toy_minimum_basis() {
        let g = toy_graph();
        let c = minimum_cycle_basis(&g).unwrap();
        assert_eq!(c.weight(&[1.0; 9]), 10.0);
        let mut sets: Vec<Vec<usize>> = c.rows().iter().map(|r| r.edge_ids().collect()).collect();
        sets.sort();
        assert_eq!(sets, vec![vec![0, 1, 6, 7, 8], vec![2, 3, 4, 5, 6]]);
        // printed orientation: (+1 +1 0 0 0 0 −1 +1 +1) and (0 0 +1 +1 +1 +1 +1 0 0)
        let dense: Vec<Vec<i64>> = c.rows().iter().map(|r| r.to_dense(9)).collect();
        assert!(dense.contains(&vec![1, 1, 0, 0, 0, 0, -1, 1, 1]));
        assert!(dense.contains(&vec![0, 0, 1, 1, 1, 1, 1, 0, 0]));
        assert!(c.annihilates_incidence(&g));
        for r in 0..c.ell() {
            assert!(c.row_is_circuit(&g, r));
        }
        let applier = c.pseudoinverse().unwrap();
        let k = applier.apply(&[1, 0]).unwrap();
        assert_eq!(c.apply_int(&k), vec![1, 0]);
    }

    #[test]
    fn parallel_edges_give_two_cycles() {
        let g = PoseGraph::new(2, &[(0, 1, 0.1, 1.0), (0, 1, 0.2, 1.0), (1, 0, 0.0, 1.0)]).unwrap();
        let c = minimum_cycle_basis(&g).unwrap();
        assert_eq!(c.ell(), 2);
        assert!(c.annihilates_incidence(&g));
        assert!(c.rows().iter().all(|r| r.len() == 2));
    }

    /// All simple cycles as edge sets, by DFS over edge subsets closing at the smallest node.
    fn simple_cycles(g: &PoseGraph) -> Vec<Vec<usize>> {
        let mut out = HashSet::new();
        fn dfs(
            g: &PoseGraph,
            start: usize,
            u: usize,
            visited: &mut Vec<bool>,
            path: &mut Vec<usize>,
            out: &mut HashSet<Vec<usize>>,
        ) {
            for &e in g.incident_edges(u) {
                if path.contains(&e) {
                    continue;
                }
                let v = g.edge(e).other(u);
                if v == start && !path.is_empty() {
                    let mut c = path.clone();
                    c.push(e);
                    c.sort();
                    out.insert(c);
                } else if v > start && !visited[v] {
                    visited[v] = true;
                    path.push(e);
                    dfs(g, start, v, visited, path, out);
                    path.pop();
                    visited[v] = false;
                }
            }
        }
        for s in 0..g.node_count() {
            let mut visited = vec![false; g.node_count()];
            visited[s] = true;
            dfs(g, s, s, &mut visited, &mut Vec::new(), &mut out);
        }
        out.into_iter().collect()
    }

    fn gf2_rank(sets: &[&Vec<usize>], m: usize) -> usize {
        let mut rows: Vec<Vec<bool>> = sets
            .iter()
            .map(|s| {
                let mut v = vec![false; m];
                s.iter().for_each(|&e| v[e] = true);
                v
            })
            .collect();
        let mut rank = 0;
        for col in 0..m {
            if let Some(p) = (rank..rows.len()).find(|&r| rows[r][col]) {
                rows.swap(rank, p);
                for r in 0..rows.len() {
                    if r != rank && rows[r][col] {
                        let pivot = rows[rank].clone();
                        rows[r].iter_mut().zip(pivot).for_each(|(a, b)| *a ^= b);
                    }
                }
                rank += 1;
            }
        }
        rank
    }

    #[test]
    fn matches_exhaustive_minimum_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut checked = 0;
        while checked < 25 {
            let n = 6;
            let mut edges: Vec<_> = (1..n)
                .map(|i| (rng.random_range(0..i), i, 0.0, rng.random_range(0.1..1.0)))
                .collect();
            while edges.len() < n - 1 + 3 {
                let a = rng.random_range(0..n);
                let b = rng.random_range(0..n);
                if a != b {
                    edges.push((a, b, 0.0, rng.random_range(0.1..1.0)));
                }
            }
            let g = PoseGraph::new(n, &edges).unwrap();
            let cycles = simple_cycles(&g);
            let w = |c: &Vec<usize>| c.iter().map(|&e| g.variances()[e]).sum::<f64>();
            let mut best = f64::INFINITY;
            for i in 0..cycles.len() {
                for j in i + 1..cycles.len() {
                    for k in j + 1..cycles.len() {
                        let trio = [&cycles[i], &cycles[j], &cycles[k]];
                        if gf2_rank(&trio, g.edge_count()) == 3 {
                            best = best.min(w(&cycles[i]) + w(&cycles[j]) + w(&cycles[k]));
                        }
                    }
                }
            }
            let c = minimum_cycle_basis(&g).unwrap();
            assert!(
                (c.weight(g.variances()) - best).abs() < 1e-12,
                "{} vs {best}",
                c.weight(g.variances())
            );
            assert!(c.annihilates_incidence(&g));
            let fcb = cycle_basis(&g, BasisKind::FcbMst).unwrap();
            assert!(c.weight(g.variances()) <= fcb.weight(g.variances()) + 1e-12);
            checked += 1;
        }
    }
}
