//! Sparse LDLᵀ for symmetric positive definite systems.
//!
//! Up-looking factorization driven by the elimination tree, after a reverse
//! Cuthill–McKee permutation to limit fill. Small systems go through a dense
//! Cholesky instead.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Systems below this dimension are factorized densely.
pub const DENSE_CUTOFF: usize = 50;

/// Symmetric matrix assembled from `(row, col, value)` triplets; both
/// triangles are implied by either one, duplicates are summed.
#[derive(Debug, Clone, Default)]
pub struct SymmetricTriplets {
    dim: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SymmetricTriplets {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Adds `value` at `(i, j)` and, when `i ≠ j`, at `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        assert!(i < self.dim && j < self.dim);
        self.entries.push((i.max(j), i.min(j), value));
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.dim, self.dim);
        for &(i, j, v) in &self.entries {
            a[(i, j)] += v;
            if i != j {
                a[(j, i)] += v;
            }
        }
        a
    }

    /// Full symmetric adjacency: for each column, `(row, value)` sorted by row.
    fn columns(&self) -> Vec<Vec<(usize, f64)>> {
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.dim];
        for &(i, j, v) in &self.entries {
            cols[j].push((i, v));
            if i != j {
                cols[i].push((j, v));
            }
        }
        for col in &mut cols {
            col.sort_unstable_by_key(|&(r, _)| r);
            col.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
        }
        cols
    }
}

/// Reverse Cuthill–McKee ordering; `perm[new] = old`.
pub fn reverse_cuthill_mckee(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let degree: Vec<usize> = adjacency.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut starts: Vec<usize> = (0..n).collect();
    starts.sort_by_key(|&v| (degree[v], v));
    for &s in &starts {
        if visited[s] {
            continue;
        }
        let root = pseudo_peripheral(adjacency, s);
        let root = if visited[root] { s } else { root };
        visited[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut next: Vec<usize> = adjacency[u]
                .iter()
                .copied()
                .filter(|&v| !visited[v])
                .collect();
            next.sort_by_key(|&v| (degree[v], v));
            next.dedup();
            for v in next {
                visited[v] = true;
                queue.push_back(v);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(adjacency: &[Vec<usize>], root: usize) -> (usize, usize) {
    let mut dist = vec![usize::MAX; adjacency.len()];
    dist[root] = 0;
    let mut queue = VecDeque::from([root]);
    let mut last = root;
    while let Some(u) = queue.pop_front() {
        last = u;
        for &v in &adjacency[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    (last, dist[last])
}

fn pseudo_peripheral(adjacency: &[Vec<usize>], start: usize) -> usize {
    let mut root = start;
    let (mut far, mut ecc) = bfs_levels(adjacency, root);
    for _ in 0..8 {
        let (next_far, next_ecc) = bfs_levels(adjacency, far);
        if next_ecc <= ecc {
            break;
        }
        root = far;
        far = next_far;
        ecc = next_ecc;
    }
    root
}

#[derive(Debug, Clone)]
enum Factor {
    Dense(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Sparse(SparseLdl),
}

/// Factorization of an SPD matrix.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    dim: usize,
    factor: Factor,
}

impl SpdFactor {
    pub fn new(matrix: &SymmetricTriplets) -> Result<Self> {
        Self::with_cutoff(matrix, DENSE_CUTOFF)
    }

    /// Factorizes densely below `cutoff`, sparsely otherwise.
    pub fn with_cutoff(matrix: &SymmetricTriplets, cutoff: usize) -> Result<Self> {
        let factor = if matrix.dim() < cutoff {
            Factor::Dense(
                matrix
                    .to_dense()
                    .cholesky()
                    .ok_or(Error::NotPositiveDefinite)?,
            )
        } else {
            Factor::Sparse(SparseLdl::factor(matrix)?)
        };
        Ok(Self {
            dim: matrix.dim(),
            factor,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.factor, Factor::Sparse(_))
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.dim);
        match &self.factor {
            Factor::Dense(ch) => ch
                .solve(&DVector::from_column_slice(rhs))
                .as_slice()
                .to_vec(),
            Factor::Sparse(ldl) => ldl.solve(rhs),
        }
    }
}

/// `P A Pᵀ = L D Lᵀ` with unit lower-triangular `L` stored by columns.
#[derive(Debug, Clone)]
pub struct SparseLdl {
    perm: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    diag: Vec<f64>,
}

impl SparseLdl {
    pub fn factor(matrix: &SymmetricTriplets) -> Result<Self> {
        let n = matrix.dim();
        let cols = matrix.columns();
        let adjacency: Vec<Vec<usize>> = cols
            .iter()
            .enumerate()
            .map(|(j, c)| c.iter().map(|&(r, _)| r).filter(|&r| r != j).collect())
            .collect();
        let perm = reverse_cuthill_mckee(&adjacency);
        let mut inverse = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        // upper triangle of the permuted matrix, by column: (row < col)
        let mut upper: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (old_j, col) in cols.iter().enumerate() {
            let j = inverse[old_j];
            for &(old_i, v) in col {
                let i = inverse[old_i];
                if i <= j {
                    upper[j].push((i, v));
                }
            }
        }

        // symbolic: elimination tree and column counts
        let mut parent = vec![usize::MAX; n];
        let mut flag = vec![usize::MAX; n];
        let mut counts = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for &(i0, _) in &upper[k] {
                let mut i = i0;
                while i < k && flag[i] != k {
                    if parent[i] == usize::MAX {
                        parent[i] = k;
                    }
                    counts[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut col_ptr = vec![0; n + 1];
        for k in 0..n {
            col_ptr[k + 1] = col_ptr[k] + counts[k];
        }
        let nnz = col_ptr[n];
        let mut row_idx = vec![0; nnz];
        let mut values = vec![0.0; nnz];
        let mut diag = vec![0.0; n];

        // numeric: row k of L from a sparse triangular solve
        let mut y = vec![0.0; n];
        let mut pattern = vec![0usize; n];
        let mut filled = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            let mut top = n;
            for &(i0, v) in &upper[k] {
                y[i0] += v;
                let mut len = 0;
                let mut i = i0;
                while flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern[top] = pattern[len];
                }
            }
            diag[k] = y[k];
            y[k] = 0.0;
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = 0.0;
                let start = col_ptr[i];
                let end = start + filled[i];
                for p in start..end {
                    y[row_idx[p]] -= values[p] * yi;
                }
                let l_ki = yi / diag[i];
                diag[k] -= l_ki * yi;
                row_idx[end] = k;
                values[end] = l_ki;
                filled[i] += 1;
            }
            if !(diag[k] > 0.0) || !diag[k].is_finite() {
                return Err(Error::NotPositiveDefinite);
            }
        }
        Ok(Self {
            perm,
            col_ptr,
            row_idx,
            values,
            diag,
        })
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        let mut x: Vec<f64> = self.perm.iter().map(|&old| rhs[old]).collect();
        for j in 0..n {
            let xj = x[j];
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                x[self.row_idx[p]] -= self.values[p] * xj;
            }
        }
        for j in 0..n {
            x[j] /= self.diag[j];
        }
        for j in (0..n).rev() {
            let mut xj = x[j];
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                xj -= self.values[p] * x[self.row_idx[p]];
            }
            x[j] = xj;
        }
        let mut out = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_laplacian(rng: &mut ChaCha8Rng, n: usize, extra: usize) -> SymmetricTriplets {
        // grounded Laplacian of a random connected graph on n + 1 nodes
        let mut t = SymmetricTriplets::new(n);
        let add_edge = |t: &mut SymmetricTriplets, a: usize, b: usize, w: f64| {
            if a > 0 {
                t.add(a - 1, a - 1, w);
            }
            if b > 0 {
                t.add(b - 1, b - 1, w);
            }
            if a > 0 && b > 0 {
                t.add(a - 1, b - 1, -w);
            }
        };
        for i in 1..=n {
            let j = rng.random_range(0..i);
            add_edge(&mut t, i, j, rng.random_range(0.5..5.0));
        }
        for _ in 0..extra {
            let a = rng.random_range(0..=n);
            let b = rng.random_range(0..=n);
            if a != b {
                add_edge(&mut t, a, b, rng.random_range(0.5..5.0));
            }
        }
        t
    }

    #[test]
    fn sparse_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in [1usize, 2, 5, 60, 200] {
            let t = random_laplacian(&mut rng, n, n / 2 + 1);
            let dense = t.to_dense();
            let rhs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let sparse = SpdFactor::with_cutoff(&t, 0).unwrap();
            assert!(sparse.is_sparse());
            let x = sparse.solve(&rhs);
            let expected = dense
                .clone()
                .cholesky()
                .unwrap()
                .solve(&DVector::from_column_slice(&rhs));
            let err =
                (DVector::from_column_slice(&x) - &expected).norm() / expected.norm().max(1e-300);
            assert!(err < 1e-10, "n={n} err={err}");
        }
    }

    #[test]
    fn indefinite_rejected() {
        let mut t = SymmetricTriplets::new(2);
        t.add(0, 0, 1.0);
        t.add(1, 1, 1.0);
        t.add(0, 1, 2.0);
        assert!(matches!(
            SparseLdl::factor(&t),
            Err(Error::NotPositiveDefinite)
        ));
        assert!(matches!(
            SpdFactor::new(&t),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn rcm_is_a_permutation() {
        let adjacency = vec![vec![3], vec![2], vec![1, 3], vec![0, 2], vec![]];
        let mut p = reverse_cuthill_mckee(&adjacency);
        p.sort();
        assert_eq!(p, vec![0, 1, 2, 3, 4]);
    }
}
