//! Gaussian conditioning, normal and χ² quantiles, and weighted least-squares
//! solves on the reduced graph Laplacian.

pub mod sparse;

use nalgebra::{DMatrix, DVector};

use crate::graph::PoseGraph;
use crate::{Error, Result};
pub use sparse::{SpdFactor, SymmetricTriplets};

/// Multivariate Gaussian belief `N(mean, covariance)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::InvalidArgument(format!(
                "covariance is {}×{}, mean has length {d}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if mean.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Gaussian belief".into()));
        }
        let scale = covariance.amax().max(f64::MIN_POSITIVE);
        let asym = (&covariance - covariance.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::InvalidArgument(format!(
                "covariance asymmetric by {asym:e}"
            )));
        }
        Ok(Self { mean, covariance })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.covariance[(i, i)]
    }

    /// Conditions on `x[fixed_indices] = fixed_values` jointly (Schur
    /// complement) and returns the belief over the remaining indices, in
    /// their original relative order.
    pub fn condition(
        &self,
        fixed_indices: &[usize],
        fixed_values: &[i64],
    ) -> Result<GaussianBelief> {
        let d = self.dim();
        if fixed_indices.len() != fixed_values.len() {
            return Err(Error::InvalidArgument(
                "fixed indices and values differ in length".into(),
            ));
        }
        let mut is_fixed = vec![false; d];
        for &i in fixed_indices {
            if i >= d || is_fixed[i] {
                return Err(Error::InvalidArgument(format!("bad fixed index {i}")));
            }
            is_fixed[i] = true;
        }
        let free: Vec<usize> = (0..d).filter(|&i| !is_fixed[i]).collect();
        if fixed_indices.is_empty() {
            return Ok(self.clone());
        }
        let f = fixed_indices.len();
        let sub = |rows: &[usize], cols: &[usize]| {
            DMatrix::from_fn(rows.len(), cols.len(), |r, c| {
                self.covariance[(rows[r], cols[c])]
            })
        };
        let p_ff = sub(fixed_indices, fixed_indices);
        let p_rf = sub(&free, fixed_indices);
        let p_rr = sub(&free, &free);
        let chol = p_ff.cholesky().ok_or(Error::SingularBlock)?;
        let residual = DVector::from_fn(f, |r, _| {
            fixed_values[r] as f64 - self.mean[fixed_indices[r]]
        });
        let mean_r = DVector::from_fn(free.len(), |r, _| self.mean[free[r]]);
        let mean = mean_r + &p_rf * chol.solve(&residual);
        let gain = chol.solve(&p_rf.transpose());
        let cov = p_rr - &p_rf * gain;
        let cov = (&cov + cov.transpose()) * 0.5;
        Ok(GaussianBelief {
            mean,
            covariance: cov,
        })
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile: Acklam's rational approximation refined by one
/// Halley step.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::OutOfRange {
            value: p,
            range: "(0, 1)",
        });
    }
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383577518672690e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996,
        3.754408661907416,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let x = if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    };
    // Halley; the upper tail uses the complement for accuracy
    let e = if p > 0.5 {
        -(0.5 * libm::erfc(x / std::f64::consts::SQRT_2) - (1.0 - p))
    } else {
        normal_cdf(x) - p
    };
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    Ok(x - u / (1.0 + 0.5 * x * u))
}

/// CDF of the χ² distribution with one degree of freedom.
pub fn chi2_cdf_1dof(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        libm::erf((0.5 * x).sqrt())
    }
}

/// Quantile of the χ² distribution with one degree of freedom.
pub fn chi2_quantile_1dof(eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::OutOfRange {
            value: eta,
            range: "(0, 1)",
        });
    }
    let z = normal_quantile(0.5 * (1.0 + eta))?;
    Ok(z * z)
}

/// Reusable solver for `(A P⁻¹ Aᵀ) x = A P⁻¹ r` on a fixed graph, where `A` is
/// the reduced incidence matrix and `P` the diagonal of edge variances.
#[derive(Debug, Clone)]
pub struct LaplacianSolver {
    tails: Vec<usize>,
    heads: Vec<usize>,
    weights: Vec<f64>,
    factor: Option<SpdFactor>,
}

impl LaplacianSolver {
    pub fn new(graph: &PoseGraph) -> Result<Self> {
        let n = graph.free_nodes();
        let weights: Vec<f64> = graph.variances().iter().map(|v| 1.0 / v).collect();
        let tails: Vec<usize> = graph.edges().iter().map(|e| e.tail).collect();
        let heads: Vec<usize> = graph.edges().iter().map(|e| e.head).collect();
        let factor = if n == 0 {
            None
        } else {
            let mut t = SymmetricTriplets::new(n);
            for e in 0..weights.len() {
                let (a, b, w) = (tails[e], heads[e], weights[e]);
                if a > 0 {
                    t.add(a - 1, a - 1, w);
                }
                if b > 0 {
                    t.add(b - 1, b - 1, w);
                }
                if a > 0 && b > 0 {
                    t.add(a - 1, b - 1, -w);
                }
            }
            Some(SpdFactor::new(&t)?)
        };
        Ok(Self {
            tails,
            heads,
            weights,
            factor,
        })
    }

    pub fn dim(&self) -> usize {
        self.factor.as_ref().map_or(0, SpdFactor::dim)
    }

    /// Solves the weighted normal equations for an edge-space right-hand side.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(
            rhs.len(),
            self.weights.len(),
            "rhs must have one entry per edge"
        );
        let Some(factor) = &self.factor else {
            return Vec::new();
        };
        let mut b = vec![0.0; factor.dim()];
        for e in 0..rhs.len() {
            let v = self.weights[e] * rhs[e];
            if self.heads[e] > 0 {
                b[self.heads[e] - 1] += v;
            }
            if self.tails[e] > 0 {
                b[self.tails[e] - 1] -= v;
            }
        }
        factor.solve(&b)
    }
}

/// One-shot `(A P⁻¹ Aᵀ)⁻¹ A P⁻¹ rhs` on the graph.
pub fn weighted_ls_solve(graph: &PoseGraph, rhs: &[f64]) -> Result<Vec<f64>> {
    Ok(LaplacianSolver::new(graph)?.solve(rhs))
}

/// Dense normal-equation solve with an explicit reduced incidence matrix.
pub fn weighted_ls_solve_dense(
    a: &DMatrix<f64>,
    variances: &[f64],
    rhs: &[f64],
) -> Result<DVector<f64>> {
    let pinv = DMatrix::from_diagonal(&DVector::from_iterator(
        variances.len(),
        variances.iter().map(|v| 1.0 / v),
    ));
    let lhs = a * &pinv * a.transpose();
    let b = a * &pinv * DVector::from_column_slice(rhs);
    let chol = lhs.cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.solve(&b))
}

/// Max-norm of `P⁻¹Aᵀ(AP⁻¹Aᵀ)⁻¹AP⁻¹ + Cᵀ(CPCᵀ)⁻¹C − P⁻¹`.
pub fn projection_identity_residual(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    variances: &[f64],
) -> Result<f64> {
    let m = variances.len();
    let p = DMatrix::from_diagonal(&DVector::from_column_slice(variances));
    let pinv = DMatrix::from_diagonal(&DVector::from_iterator(
        m,
        variances.iter().map(|v| 1.0 / v),
    ));
    let mut total = -pinv.clone();
    if a.nrows() > 0 {
        let lap = a * &pinv * a.transpose();
        let lap_inv = lap.cholesky().ok_or(Error::NotPositiveDefinite)?.inverse();
        total += &pinv * a.transpose() * lap_inv * a * &pinv;
    }
    if c.nrows() > 0 {
        let gram = c * &p * c.transpose();
        let gram_inv = gram.cholesky().ok_or(Error::NotPositiveDefinite)?.inverse();
        total += c.transpose() * gram_inv * c;
    }
    Ok(total.amax())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycles::{cycle_basis, BasisKind};
    use crate::graph::fixtures::toy_graph;
    use nalgebra::{dmatrix, dvector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn condition_example() {
        let b =
            GaussianBelief::new(dvector![0.02, 0.4], dmatrix![0.01, 0.0475; 0.0475, 0.25]).unwrap();
        let c = b.condition(&[0], &[0]).unwrap();
        assert_eq!(c.dim(), 1);
        assert!((c.mean[0] - 0.305).abs() < 1e-12);
        assert!((c.variance(0) - 0.024375).abs() < 1e-12);
    }

    #[test]
    fn condition_matches_joint_density_grid() {
        // brute force: conditional of a 2D Gaussian along the line x0 = 0
        let mean = [0.02, 0.4];
        let cov = dmatrix![0.01, 0.0475; 0.0475, 0.25];
        let inv = cov.clone().try_inverse().unwrap();
        let (mut w, mut m1, mut m2) = (0.0f64, 0.0f64, 0.0f64);
        let h = 1e-4;
        let mut y = -3.0f64;
        while y < 3.0 {
            let d = dvector![0.0 - mean[0], y - mean[1]];
            let q: f64 = (d.transpose() * &inv * &d)[0];
            let dens = (-0.5 * q).exp();
            w += dens;
            m1 += dens * y;
            m2 += dens * y * y;
            y += h;
        }
        let mu = m1 / w;
        let var = m2 / w - mu * mu;
        assert!((mu - 0.305).abs() < 1e-6);
        assert!((var - 0.024375).abs() < 1e-6);
    }

    #[test]
    fn condition_uncorrelated_and_idempotent() {
        let b = GaussianBelief::new(
            dvector![1.0, 2.0, 3.0],
            DMatrix::from_diagonal(&dvector![1.0, 2.0, 3.0]),
        )
        .unwrap();
        let c = b.condition(&[1], &[5]).unwrap();
        assert_eq!(c.mean, dvector![1.0, 3.0]);
        assert_eq!(c.covariance, DMatrix::from_diagonal(&dvector![1.0, 3.0]));

        let b = GaussianBelief::new(
            dvector![0.2, 0.4, -0.1],
            dmatrix![2.0, 0.5, 0.3; 0.5, 1.0, 0.2; 0.3, 0.2, 1.5],
        )
        .unwrap();
        let once = b.condition(&[0], &[1]).unwrap();
        // re-conditioning on the now-deterministic coordinate changes nothing
        let mut fixed_mean = vec![1.0];
        fixed_mean.extend(once.mean.iter());
        let mut cov = DMatrix::zeros(3, 3);
        cov[(0, 0)] = 1e-300;
        cov.view_mut((1, 1), (2, 2)).copy_from(&once.covariance);
        let again = GaussianBelief {
            mean: DVector::from_vec(fixed_mean),
            covariance: cov,
        }
        .condition(&[0], &[1])
        .unwrap();
        assert!((again.mean - &once.mean).amax() < 1e-12);
        assert!((again.covariance - &once.covariance).amax() < 1e-12);
    }

    #[test]
    fn condition_singular_block() {
        let b = GaussianBelief::new(dvector![0.0, 0.0], dmatrix![0.0, 0.0; 0.0, 1.0]).unwrap();
        assert!(matches!(b.condition(&[0], &[0]), Err(Error::SingularBlock)));
    }

    #[test]
    fn condition_preserves_definiteness() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let d = rng.random_range(2..8);
            let g = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
            let cov = &g * g.transpose() + DMatrix::identity(d, d) * 0.1;
            let mean = DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
            let b = GaussianBelief::new(mean, cov).unwrap();
            let f = rng.random_range(1..d);
            let idx: Vec<usize> = (0..f)
                .map(|i| (i * 3) % d)
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            let vals: Vec<i64> = idx.iter().map(|_| rng.random_range(-2..=2)).collect();
            let c = b.condition(&idx, &vals).unwrap();
            assert!(c.covariance.symmetric_eigenvalues().min() > 0.0);
        }
    }

    #[test]
    fn chi2_quantiles() {
        assert!((chi2_quantile_1dof(0.9).unwrap() - 2.7055).abs() < 1e-3);
        assert!((chi2_quantile_1dof(0.99).unwrap() - 6.6349).abs() < 1e-3);
        let mut last = 0.0;
        for i in 1..1000 {
            let eta = i as f64 / 1000.0;
            let q = chi2_quantile_1dof(eta).unwrap();
            assert!(q > last);
            assert!((chi2_cdf_1dof(q) - eta).abs() < 1e-6);
            last = q;
        }
        assert!(chi2_quantile_1dof(1.0).is_err());
        assert!(chi2_quantile_1dof(0.0).is_err());
    }

    #[test]
    fn normal_quantile_accuracy() {
        for &(p, z) in &[
            (0.975, 1.959963984540054),
            (0.5, 0.0),
            (0.995, 2.5758293035489004),
            (1e-9, -5.997807015007686),
        ] {
            assert!((normal_quantile(p).unwrap() - z).abs() < 1e-9, "p={p}");
        }
        let mut p = 0.5;
        while p < 1.0 - 1e-9 {
            let z = normal_quantile(p).unwrap();
            let back = 1.0 - 0.5 * libm::erfc(z / std::f64::consts::SQRT_2);
            assert!((back - p).abs() < 1e-12, "p={p}");
            p += (1.0 - p) * 0.05 + 1e-4;
        }
    }

    #[test]
    fn weighted_ls_examples() {
        // tree: exact interpolation
        let tree = PoseGraph::new(3, &[(0, 1, 0.3, 0.1), (1, 2, -0.2, 0.5)]).unwrap();
        let x = weighted_ls_solve(&tree, &[0.3, -0.2]).unwrap();
        let diff = tree.edge_differences(&x);
        assert!((diff[0] - 0.3).abs() < 1e-14 && (diff[1] + 0.2).abs() < 1e-14);
        assert_eq!(
            weighted_ls_solve(&tree, &[0.0, 0.0]).unwrap(),
            vec![0.0, 0.0]
        );

        let tri =
            PoseGraph::new(3, &[(0, 1, 0.0, 1.0), (1, 2, 0.0, 1.0), (2, 0, 0.0, 1.0)]).unwrap();
        let rhs = [0.1, 0.2, -0.25];
        let x = weighted_ls_solve(&tri, &rhs).unwrap();
        let dense =
            weighted_ls_solve_dense(&tri.reduced_incidence_f64(), tri.variances(), &rhs).unwrap();
        assert!((DVector::from_vec(x) - dense).amax() < 1e-10);
    }

    #[test]
    fn projection_identity_on_toy_graph() {
        let g = toy_graph();
        let a = g.reduced_incidence_f64();
        for kind in [BasisKind::FcbOdo, BasisKind::Mcb] {
            let c = cycle_basis(&g, kind).unwrap();
            assert!(
                projection_identity_residual(&a, &c.to_dense_f64(), g.variances()).unwrap() < 1e-9
            );
        }
        let tree = PoseGraph::new(3, &[(0, 1, 0.0, 0.3), (2, 1, 0.0, 2.0)]).unwrap();
        let c = DMatrix::zeros(0, 2);
        assert!(
            projection_identity_residual(&tree.reduced_incidence_f64(), &c, tree.variances())
                .unwrap()
                < 1e-9
        );
    }
}
