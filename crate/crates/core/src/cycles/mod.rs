//! Cycle bases of the pose graph and the exact integer right pseudoinverse.
//!
//! A [`CycleBasisMatrix`] holds `ℓ` signed circuits over the original edge
//! ids together with the spanning tree it is canonical against: under the
//! tree-first / chords-last ordering the basis splits as `(C_T | C_L)` and
//! `C_L` is unimodular, which is what makes `C† = (0 ; C_L⁻¹)` integral.

mod horton;
mod unimodular;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::graph::{spanning_tree, PoseGraph, SpanningTree, TreeStrategy};
use crate::{Error, Result};

pub use horton::minimum_cycle_basis;
pub use unimodular::PseudoinverseApplier;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisKind {
    /// Fundamental basis of the odometric spanning path.
    FcbOdo,
    /// Fundamental basis of the minimum-uncertainty spanning tree.
    FcbMst,
    /// Minimum-uncertainty cycle basis.
    Mcb,
}

impl BasisKind {
    pub const ALL: [BasisKind; 3] = [BasisKind::FcbOdo, BasisKind::FcbMst, BasisKind::Mcb];

    pub fn as_str(&self) -> &'static str {
        match self {
            BasisKind::FcbOdo => "fcb-odo",
            BasisKind::FcbMst => "fcb-mst",
            BasisKind::Mcb => "mcb",
        }
    }
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fcb-odo" => Ok(BasisKind::FcbOdo),
            "fcb-mst" => Ok(BasisKind::FcbMst),
            "mcb" => Ok(BasisKind::Mcb),
            other => Err(Error::InvalidArgument(format!(
                "unknown basis kind {other:?}"
            ))),
        }
    }
}

/// A signed circuit: `(edge id, ±1)` pairs sorted by edge id.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Circuit {
    entries: Vec<(usize, i8)>,
}

impl Circuit {
    /// Builds a circuit from a traversal; entries are sorted by edge id.
    pub fn from_traversal(mut entries: Vec<(usize, i8)>) -> Self {
        entries.sort_unstable_by_key(|&(e, _)| e);
        Self { entries }
    }

    pub fn entries(&self) -> &[(usize, i8)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|&(e, _)| e)
    }

    pub fn coefficient(&self, edge: usize) -> i8 {
        self.entries
            .binary_search_by_key(&edge, |&(e, _)| e)
            .map(|i| self.entries[i].1)
            .unwrap_or(0)
    }

    pub fn weight(&self, variances: &[f64]) -> f64 {
        self.entries.iter().map(|&(e, _)| variances[e]).sum()
    }

    pub fn to_dense(&self, edge_count: usize) -> Vec<i64> {
        let mut v = vec![0; edge_count];
        for &(e, s) in &self.entries {
            v[e] = s as i64;
        }
        v
    }

    fn negate(&mut self) {
        for entry in &mut self.entries {
            entry.1 = -entry.1;
        }
    }

    /// Flips the orientation so the lowest edge id carries `+1`.
    fn normalize_sign(&mut self) {
        if self.entries.first().is_some_and(|&(_, s)| s < 0) {
            self.negate();
        }
    }
}

/// `Σ σ²_e |c_e|` for a dense integer cycle vector.
pub fn cycle_weight(circuit: &[i64], variances: &[f64]) -> f64 {
    assert_eq!(circuit.len(), variances.len());
    circuit
        .iter()
        .zip(variances)
        .map(|(&c, &v)| v * c.unsigned_abs() as f64)
        .sum()
}

#[derive(Debug, Clone)]
pub struct CycleBasisMatrix {
    kind: BasisKind,
    edge_count: usize,
    rows: Vec<Circuit>,
    tree: SpanningTree,
}

impl CycleBasisMatrix {
    pub(crate) fn new(
        kind: BasisKind,
        edge_count: usize,
        rows: Vec<Circuit>,
        tree: SpanningTree,
    ) -> Self {
        Self {
            kind,
            edge_count,
            rows,
            tree,
        }
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    /// Number of rows `ℓ`.
    pub fn ell(&self) -> usize {
        self.rows.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn rows(&self) -> &[Circuit] {
        &self.rows
    }

    /// The spanning tree this basis is canonical against.
    pub fn tree(&self) -> &SpanningTree {
        &self.tree
    }

    /// Edge permutation placing tree edges first and chords last.
    pub fn ordering(&self) -> &[usize] {
        self.tree.ordering()
    }

    /// Dense `ℓ × m` matrix in original edge order.
    pub fn to_dense(&self) -> DMatrix<i64> {
        let mut c = DMatrix::zeros(self.ell(), self.edge_count);
        for (r, row) in self.rows.iter().enumerate() {
            for &(e, s) in row.entries() {
                c[(r, e)] = s as i64;
            }
        }
        c
    }

    pub fn to_dense_f64(&self) -> DMatrix<f64> {
        self.to_dense().map(|x| x as f64)
    }

    /// Dense `ℓ × ℓ` chord block `C_L` (columns follow [`SpanningTree::chords`]).
    pub fn chord_block(&self) -> DMatrix<i64> {
        let chords = self.tree.chords();
        let mut position = vec![usize::MAX; self.edge_count];
        for (j, &e) in chords.iter().enumerate() {
            position[e] = j;
        }
        let mut block = DMatrix::zeros(self.ell(), chords.len());
        for (r, row) in self.rows.iter().enumerate() {
            for &(e, s) in row.entries() {
                if position[e] != usize::MAX {
                    block[(r, position[e])] = s as i64;
                }
            }
        }
        block
    }

    /// `C x` for a real vector of length `m`.
    pub fn apply(&self, x: &[f64]) -> DVector<f64> {
        assert_eq!(x.len(), self.edge_count);
        DVector::from_iterator(
            self.ell(),
            self.rows
                .iter()
                .map(|row| row.entries().iter().map(|&(e, s)| s as f64 * x[e]).sum()),
        )
    }

    /// `C k` in exact integer arithmetic.
    pub fn apply_int(&self, k: &[i64]) -> Vec<i64> {
        assert_eq!(k.len(), self.edge_count);
        self.rows
            .iter()
            .map(|row| row.entries().iter().map(|&(e, s)| s as i64 * k[e]).sum())
            .collect()
    }

    /// `C diag(d) Cᵀ` accumulated edge by edge.
    pub fn weighted_gram(&self, diagonal: &[f64]) -> DMatrix<f64> {
        assert_eq!(diagonal.len(), self.edge_count);
        let mut rows_of_edge: Vec<Vec<(usize, i8)>> = vec![Vec::new(); self.edge_count];
        for (r, row) in self.rows.iter().enumerate() {
            for &(e, s) in row.entries() {
                rows_of_edge[e].push((r, s));
            }
        }
        let mut gram = DMatrix::zeros(self.ell(), self.ell());
        for (e, touching) in rows_of_edge.iter().enumerate() {
            for &(a, sa) in touching {
                for &(b, sb) in touching {
                    gram[(a, b)] += diagonal[e] * (sa * sb) as f64;
                }
            }
        }
        gram
    }

    /// Total weight `Σ_t W(c_t)`.
    pub fn weight(&self, variances: &[f64]) -> f64 {
        self.rows.iter().map(|r| r.weight(variances)).sum()
    }

    /// Checks `C Āᵀ = 0` exactly, i.e. every row has zero net flow at every node.
    pub fn annihilates_incidence(&self, graph: &PoseGraph) -> bool {
        let mut flow = vec![0i64; graph.node_count()];
        self.rows.iter().all(|row| {
            for &(e, s) in row.entries() {
                let rec = graph.edge(e);
                flow[rec.tail] -= s as i64;
                flow[rec.head] += s as i64;
            }
            let ok = row.entries().iter().all(|&(e, _)| {
                let rec = graph.edge(e);
                flow[rec.tail] == 0 && flow[rec.head] == 0
            });
            for &(e, _) in row.entries() {
                let rec = graph.edge(e);
                flow[rec.tail] = 0;
                flow[rec.head] = 0;
            }
            ok
        })
    }

    /// Whether row `r` touches every node it visits exactly twice.
    pub fn row_is_circuit(&self, graph: &PoseGraph, r: usize) -> bool {
        let mut degree = std::collections::HashMap::new();
        for e in self.rows[r].edge_ids() {
            let rec = graph.edge(e);
            *degree.entry(rec.tail).or_insert(0) += 1;
            *degree.entry(rec.head).or_insert(0) += 1;
        }
        !degree.is_empty() && degree.values().all(|&d| d == 2)
    }

    /// Factorizes `C_L` for exact integer solves.
    pub fn pseudoinverse(&self) -> Result<PseudoinverseApplier> {
        PseudoinverseApplier::new(self)
    }
}

/// Fundamental basis: per chord, the chord forward plus the tree path from
/// its head back to its tail. `C_L` is the identity under the tree ordering.
pub fn fundamental_cycle_basis(graph: &PoseGraph, tree: &SpanningTree) -> CycleBasisMatrix {
    let rows = tree
        .chords()
        .iter()
        .map(|&c| {
            let rec = graph.edge(c);
            let mut entries = vec![(c, 1i8)];
            entries.extend(tree.path(graph, rec.head, rec.tail));
            Circuit::from_traversal(entries)
        })
        .collect();
    let kind = match tree.strategy() {
        TreeStrategy::Odometric => BasisKind::FcbOdo,
        TreeStrategy::MinimumUncertainty => BasisKind::FcbMst,
    };
    CycleBasisMatrix::new(kind, graph.edge_count(), rows, tree.clone())
}

/// Builds the basis of the requested kind.
pub fn cycle_basis(graph: &PoseGraph, kind: BasisKind) -> Result<CycleBasisMatrix> {
    match kind {
        BasisKind::FcbOdo => Ok(fundamental_cycle_basis(
            graph,
            &spanning_tree(graph, TreeStrategy::Odometric)?,
        )),
        BasisKind::FcbMst => Ok(fundamental_cycle_basis(
            graph,
            &spanning_tree(graph, TreeStrategy::MinimumUncertainty)?,
        )),
        BasisKind::Mcb => minimum_cycle_basis(graph),
    }
}

/// Solves `C k = γ` with `k = (0 ; C_L⁻¹ γ)`.
pub fn apply_pseudoinverse(basis: &CycleBasisMatrix, gamma: &[i64]) -> Result<Vec<i64>> {
    basis.pseudoinverse()?.apply(gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::toy_graph;

    fn edge_set(c: &Circuit) -> Vec<usize> {
        c.edge_ids().collect()
    }

    #[test]
    fn toy_fundamental_basis() {
        let g = toy_graph();
        let tree = spanning_tree(&g, TreeStrategy::Odometric).unwrap();
        let c = fundamental_cycle_basis(&g, &tree);
        assert_eq!(c.ell(), 2);
        // rows follow chord order: edge 7 (id 6) then edge 9 (id 8)
        assert_eq!(edge_set(&c.rows()[0]), vec![2, 3, 4, 5, 6]);
        assert_eq!(edge_set(&c.rows()[1]), vec![0, 1, 2, 3, 4, 5, 7, 8]);
        assert_eq!(c.rows()[0].to_dense(9), vec![0, 0, 1, 1, 1, 1, 1, 0, 0]);
        assert_eq!(c.rows()[1].to_dense(9), vec![1, 1, 1, 1, 1, 1, 0, 1, 1]);
        assert!(c.annihilates_incidence(&g));
        assert_eq!(c.chord_block(), DMatrix::identity(2, 2));
        let ones = vec![1.0; 9];
        assert_eq!(c.rows()[1].weight(&ones), 8.0);
        assert_eq!(c.weight(&ones), 13.0);
    }

    #[test]
    fn single_cycle_is_all_ones() {
        let n = 6;
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, 0.0, 1.0)).collect();
        let g = PoseGraph::new(n, &edges).unwrap();
        for kind in BasisKind::ALL {
            let c = cycle_basis(&g, kind).unwrap();
            assert_eq!(c.ell(), 1);
            let row = c.rows()[0].to_dense(n);
            assert!(row.iter().all(|&x| x == 1) || row.iter().all(|&x| x == -1));
        }
    }

    #[test]
    fn cycle_weight_examples() {
        assert_eq!(cycle_weight(&[0, 0, 0], &[1.0, 2.0, 3.0]), 0.0);
        let circuit = [0, 0, 1, 1, 1, 1, 1, 0, 0];
        let w = cycle_weight(&circuit, &[0.04; 9]);
        assert!((w - 0.20).abs() < 1e-15);
    }

    #[test]
    fn pseudoinverse_on_identity_block() {
        let g = toy_graph();
        let c = cycle_basis(&g, BasisKind::FcbOdo).unwrap();
        let k = apply_pseudoinverse(&c, &[2, -1]).unwrap();
        assert_eq!(k, vec![0, 0, 0, 0, 0, 0, 2, 0, -1]);
        assert_eq!(apply_pseudoinverse(&c, &[0, 0]).unwrap(), vec![0; 9]);
    }

    #[test]
    fn weighted_gram_matches_dense_product() {
        let g = toy_graph();
        let c = cycle_basis(&g, BasisKind::Mcb).unwrap();
        let d: Vec<f64> = (0..9).map(|i| 0.1 + i as f64).collect();
        let dense = c.to_dense_f64();
        let expected =
            &dense * DMatrix::from_diagonal(&DVector::from_vec(d.clone())) * dense.transpose();
        assert!((c.weighted_gram(&d) - expected).abs().max() < 1e-12);
    }

    #[test]
    fn basis_kind_round_trips_through_str() {
        for kind in BasisKind::ALL {
            assert_eq!(kind.as_str().parse::<BasisKind>().unwrap(), kind);
        }
        assert!("fcb".parse::<BasisKind>().is_err());
    }
}
