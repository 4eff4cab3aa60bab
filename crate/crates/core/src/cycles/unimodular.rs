//! Exact integer solves with the chord block `C_L`.
//!
//! `C_L` is reduced to unit upper-triangular form (in pivot order) using only
//! unimodular row operations: adding an integer multiple of one row to
//! another, negation, and 2×2 extended-gcd combinations. All arithmetic is
//! checked `i64`. The recorded operations are replayed on each right-hand
//! side, followed by back substitution, so every solve is exact. A pivot
//! whose column gcd is not ±1 means `|det C_L| ≠ 1` and is rejected.

use std::collections::{BTreeMap, BTreeSet};

use super::CycleBasisMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone)]
enum RowOp {
    /// `row[target] += factor * row[source]`
    AddMultiple {
        target: usize,
        source: usize,
        factor: i64,
    },
    Negate(usize),
    /// `(row[a], row[b]) ← (s·row[a] + t·row[b], u·row[a] + v·row[b])`
    Combine {
        a: usize,
        b: usize,
        s: i64,
        t: i64,
        u: i64,
        v: i64,
    },
}

/// Factorization of `C_L` applying `C† = (0 ; C_L⁻¹)`.
#[derive(Debug, Clone)]
pub struct PseudoinverseApplier {
    edge_count: usize,
    chords: Vec<usize>,
    ops: Vec<RowOp>,
    /// `(row, pivot column, off-pivot entries)` in elimination order.
    upper: Vec<(usize, usize, Vec<(usize, i64)>)>,
    /// Row entries for the exact `C k = γ` check.
    rows: Vec<Vec<(usize, i8)>>,
}

fn overflow() -> Error {
    Error::CanonicalizationFailure("integer overflow while inverting the chord block".into())
}

fn checked_axpy(a: i64, x: i64, y: i64) -> Result<i64> {
    a.checked_mul(x)
        .and_then(|ax| ax.checked_add(y))
        .ok_or_else(overflow)
}

fn extended_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    let (mut old_r, mut r) = (a, b);
    let (mut old_s, mut s) = (1i64, 0i64);
    let (mut old_t, mut t) = (0i64, 1i64);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
        (old_t, t) = (t, old_t - q * t);
    }
    if old_r < 0 {
        (-old_r, -old_s, -old_t)
    } else {
        (old_r, old_s, old_t)
    }
}

struct SparseRows {
    rows: Vec<BTreeMap<usize, i64>>,
    col_rows: Vec<BTreeSet<usize>>,
}

impl SparseRows {
    fn set(&mut self, row: usize, col: usize, value: i64) {
        if value == 0 {
            self.rows[row].remove(&col);
            self.col_rows[col].remove(&row);
        } else {
            self.rows[row].insert(col, value);
            self.col_rows[col].insert(row);
        }
    }

    fn get(&self, row: usize, col: usize) -> i64 {
        self.rows[row].get(&col).copied().unwrap_or(0)
    }

    fn add_multiple(&mut self, target: usize, source: usize, factor: i64) -> Result<()> {
        let src: Vec<(usize, i64)> = self.rows[source].iter().map(|(&c, &v)| (c, v)).collect();
        for (c, v) in src {
            let nv = checked_axpy(factor, v, self.get(target, c))?;
            self.set(target, c, nv);
        }
        Ok(())
    }

    fn negate(&mut self, row: usize) {
        for v in self.rows[row].values_mut() {
            *v = -*v;
        }
    }

    fn combine(&mut self, a: usize, b: usize, s: i64, t: i64, u: i64, v: i64) -> Result<()> {
        let cols: BTreeSet<usize> = self.rows[a]
            .keys()
            .chain(self.rows[b].keys())
            .copied()
            .collect();
        for c in cols {
            let (ra, rb) = (self.get(a, c), self.get(b, c));
            let na = checked_axpy(s, ra, t.checked_mul(rb).ok_or_else(overflow)?)?;
            let nb = checked_axpy(u, ra, v.checked_mul(rb).ok_or_else(overflow)?)?;
            self.set(a, c, na);
            self.set(b, c, nb);
        }
        Ok(())
    }
}

impl PseudoinverseApplier {
    pub fn new(basis: &CycleBasisMatrix) -> Result<Self> {
        let chords = basis.tree().chords().to_vec();
        let ell = basis.ell();
        if chords.len() != ell {
            return Err(Error::CanonicalizationFailure(format!(
                "{ell} rows but {} chords",
                chords.len()
            )));
        }
        let mut position = vec![usize::MAX; basis.edge_count()];
        for (j, &e) in chords.iter().enumerate() {
            position[e] = j;
        }
        let mut m = SparseRows {
            rows: vec![BTreeMap::new(); ell],
            col_rows: vec![BTreeSet::new(); ell],
        };
        for (r, row) in basis.rows().iter().enumerate() {
            for &(e, s) in row.entries() {
                if position[e] != usize::MAX {
                    m.set(r, position[e], s as i64);
                }
            }
        }

        let mut ops = Vec::new();
        let mut upper = Vec::with_capacity(ell);
        let mut active_cols: BTreeSet<usize> = (0..ell).collect();
        for _ in 0..ell {
            // column with the fewest active rows (rows leave col_rows when they pivot)
            let &col = active_cols
                .iter()
                .min_by_key(|&&c| (m.col_rows[c].len(), c))
                .expect("one active column per remaining step");
            if m.col_rows[col].is_empty() {
                return Err(Error::CanonicalizationFailure(
                    "chord block is singular".into(),
                ));
            }
            // merge rows by extended gcd until a single row remains or a unit appears
            loop {
                let mut cands: Vec<(i64, usize, usize)> = m.col_rows[col]
                    .iter()
                    .map(|&r| (m.get(r, col).abs(), m.rows[r].len(), r))
                    .collect();
                cands.sort_unstable();
                if cands.len() == 1 || cands[0].0 == 1 {
                    break;
                }
                let (a, b) = (cands[0].2, cands[1].2);
                let (va, vb) = (m.get(a, col), m.get(b, col));
                let (g, s, t) = extended_gcd(va, vb);
                let (u, v) = (-vb / g, va / g);
                m.combine(a, b, s, t, u, v)?;
                ops.push(RowOp::Combine { a, b, s, t, u, v });
            }
            let pivot_row = m.col_rows[col]
                .iter()
                .copied()
                .min_by_key(|&r| (m.get(r, col).abs(), m.rows[r].len(), r))
                .expect("column is non-empty");
            let pv = m.get(pivot_row, col);
            if pv.abs() != 1 {
                return Err(Error::CanonicalizationFailure(format!(
                    "chord block is not unimodular (pivot {pv})"
                )));
            }
            if pv < 0 {
                m.negate(pivot_row);
                ops.push(RowOp::Negate(pivot_row));
            }
            let others: Vec<usize> = m.col_rows[col]
                .iter()
                .copied()
                .filter(|&r| r != pivot_row)
                .collect();
            for r in others {
                let factor = -m.get(r, col);
                m.add_multiple(r, pivot_row, factor)?;
                ops.push(RowOp::AddMultiple {
                    target: r,
                    source: pivot_row,
                    factor,
                });
            }
            let entries: Vec<(usize, i64)> = m.rows[pivot_row]
                .iter()
                .filter(|&(&c, _)| c != col)
                .map(|(&c, &v)| (c, v))
                .collect();
            for &c in m.rows[pivot_row].keys() {
                m.col_rows[c].remove(&pivot_row);
            }
            active_cols.remove(&col);
            upper.push((pivot_row, col, entries));
        }

        let rows = basis.rows().iter().map(|r| r.entries().to_vec()).collect();
        Ok(Self {
            edge_count: basis.edge_count(),
            chords,
            ops,
            upper,
            rows,
        })
    }

    pub fn ell(&self) -> usize {
        self.chords.len()
    }

    /// Integer `k` (length `m`, zero on tree edges) with `C k = γ` exactly.
    pub fn apply(&self, gamma: &[i64]) -> Result<Vec<i64>> {
        if gamma.len() != self.ell() {
            return Err(Error::InvalidArgument(format!(
                "γ has length {}, expected {}",
                gamma.len(),
                self.ell()
            )));
        }
        let mut rhs = gamma.to_vec();
        for op in &self.ops {
            match *op {
                RowOp::AddMultiple {
                    target,
                    source,
                    factor,
                } => {
                    rhs[target] = checked_axpy(factor, rhs[source], rhs[target])?;
                }
                RowOp::Negate(r) => rhs[r] = -rhs[r],
                RowOp::Combine { a, b, s, t, u, v } => {
                    let (ra, rb) = (rhs[a], rhs[b]);
                    rhs[a] = checked_axpy(s, ra, t.checked_mul(rb).ok_or_else(overflow)?)?;
                    rhs[b] = checked_axpy(u, ra, v.checked_mul(rb).ok_or_else(overflow)?)?;
                }
            }
        }
        let mut x = vec![0i64; self.ell()];
        for (row, col, entries) in self.upper.iter().rev() {
            let mut acc = rhs[*row];
            for &(c, v) in entries {
                acc = checked_axpy(-v, x[c], acc)?;
            }
            x[*col] = acc;
        }
        let mut k = vec![0i64; self.edge_count];
        for (j, &e) in self.chords.iter().enumerate() {
            k[e] = x[j];
        }
        for (r, row) in self.rows.iter().enumerate() {
            let mut acc = 0i64;
            for &(e, s) in row {
                acc = checked_axpy(s as i64, k[e], acc)?;
            }
            if acc != gamma[r] {
                return Err(Error::CanonicalizationFailure(format!(
                    "C·k = γ check failed on row {r}"
                )));
            }
        }
        Ok(k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycles::{cycle_basis, BasisKind};
    use crate::graph::PoseGraph;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn extended_gcd_identity() {
        for (a, b) in [(3, 5), (-4, 6), (7, -21), (1, 0), (0, -3)] {
            let (g, s, t) = extended_gcd(a, b);
            assert_eq!(s * a + t * b, g);
            assert!(g > 0);
        }
    }

    fn random_graph(rng: &mut ChaCha8Rng, n: usize, extra: usize) -> PoseGraph {
        let mut edges: Vec<_> = (1..n)
            .map(|i| (rng.random_range(0..i), i, 0.0, rng.random_range(0.01..0.5)))
            .collect();
        while edges.len() < n - 1 + extra {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if a != b {
                edges.push((a, b, 0.0, rng.random_range(0.01..0.5)));
            }
        }
        PoseGraph::new(n, &edges).unwrap()
    }

    #[test]
    fn round_trip_on_random_bases() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let n = rng.random_range(4..25);
            let extra = rng.random_range(1..12);
            let g = random_graph(&mut rng, n, extra);
            for kind in [BasisKind::FcbMst, BasisKind::Mcb] {
                let c = cycle_basis(&g, kind).unwrap();
                let det = c.chord_block().map(|x| x as f64).determinant();
                assert!((det.abs() - 1.0).abs() < 1e-9, "det {det}");
                let applier = c.pseudoinverse().unwrap();
                for _ in 0..100 {
                    let gamma: Vec<i64> = (0..c.ell()).map(|_| rng.random_range(-5..=5)).collect();
                    let k = applier.apply(&gamma).unwrap();
                    assert_eq!(c.apply_int(&k), gamma);
                    for &e in c.tree().tree_edges() {
                        assert_eq!(k[e], 0);
                    }
                }
            }
        }
    }

    #[test]
    fn wrong_length_rejected() {
        let g = PoseGraph::new(3, &[(0, 1, 0.0, 1.0), (1, 2, 0.0, 1.0), (2, 0, 0.0, 1.0)]).unwrap();
        let c = cycle_basis(&g, BasisKind::Mcb).unwrap();
        assert!(c.pseudoinverse().unwrap().apply(&[1, 2]).is_err());
    }
}
