//! The γ estimator, integer screening, closed-form orientation recovery and
//! the end-to-end MOLE2D pipeline.

mod screening;

use std::cmp::Ordering;
use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::angles::{wrap, wrap_all};
use crate::cycles::{cycle_basis, BasisKind, CycleBasisMatrix, PseudoinverseApplier};
use crate::graph::PoseGraph;
use crate::linalg::{GaussianBelief, LaplacianSolver};
use crate::{Error, Result};

pub use screening::{
    integer_screening, HypothesisSet, ProductIter, ScreeningDiagnostics, DEFAULT_ALPHA, DEFAULT_CAP,
};

/// Default enumeration budget for [`ml_estimate`].
pub const DEFAULT_ML_BUDGET: f64 = 1e7;

/// Real-valued estimate `γ̂ = Cδ̌/2π` with covariance `C P_δ Cᵀ/4π²`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaEstimate {
    pub gamma_hat: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub basis_kind: Option<BasisKind>,
}

impl GammaEstimate {
    pub fn new(
        gamma_hat: DVector<f64>,
        covariance: DMatrix<f64>,
        basis_kind: Option<BasisKind>,
    ) -> Self {
        Self {
            gamma_hat,
            covariance,
            basis_kind,
        }
    }

    pub fn ell(&self) -> usize {
        self.gamma_hat.len()
    }

    pub fn trace(&self) -> f64 {
        self.covariance.trace()
    }

    pub fn belief(&self) -> Result<GaussianBelief> {
        GaussianBelief::new(self.gamma_hat.clone(), self.covariance.clone())
    }
}

pub fn gamma_estimator(graph: &PoseGraph, basis: &CycleBasisMatrix) -> GammaEstimate {
    let gamma_hat = basis.apply(graph.measurements()) / TAU;
    let covariance = basis.weighted_gram(graph.variances()) / (TAU * TAU);
    GammaEstimate::new(gamma_hat, covariance, Some(basis.kind()))
}

/// One orientation hypothesis: the integer cycle vector, the real-valued
/// closed-form estimate, its wrapped version and the circular cost.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientationHypothesis {
    pub gamma: Vec<i64>,
    pub theta_real: Vec<f64>,
    pub theta_wrapped: Vec<f64>,
    pub cost: f64,
}

/// Circular weighted cost `Σ (1/σ²)·wrap(θ_j − θ_i − δ̌)²` with node 0 at 0.
pub fn cost(graph: &PoseGraph, theta: &[f64]) -> f64 {
    assert_eq!(
        theta.len(),
        graph.free_nodes(),
        "one orientation per free node"
    );
    let at = |v: usize| if v == 0 { 0.0 } else { theta[v - 1] };
    graph
        .edges()
        .iter()
        .zip(graph.measurements())
        .zip(graph.variances())
        .map(|((e, &d), &var)| {
            let r = wrap(at(e.head) - at(e.tail) - d);
            r * r / var
        })
        .sum()
}

/// `(A P⁻¹ Aᵀ)⁻¹ A P⁻¹ (δ̌ − 2πk)`.
pub fn theta_given_k(graph: &PoseGraph, k: &[i64]) -> Result<Vec<f64>> {
    Ok(HypothesisSolver::with_basis_free(graph)?.theta_given_k(k))
}

pub fn theta_given_gamma(
    graph: &PoseGraph,
    basis: &CycleBasisMatrix,
    gamma: &[i64],
) -> Result<OrientationHypothesis> {
    HypothesisSolver::new(graph, basis)?.hypothesis(gamma)
}

/// Reusable factorizations for turning many `γ` into hypotheses on one graph.
#[derive(Debug, Clone)]
pub struct HypothesisSolver<'g> {
    graph: &'g PoseGraph,
    laplacian: LaplacianSolver,
    applier: Option<PseudoinverseApplier>,
}

impl<'g> HypothesisSolver<'g> {
    pub fn new(graph: &'g PoseGraph, basis: &CycleBasisMatrix) -> Result<Self> {
        if basis.edge_count() != graph.edge_count() {
            return Err(Error::InvalidArgument(
                "basis does not belong to this graph".into(),
            ));
        }
        Ok(Self {
            graph,
            laplacian: LaplacianSolver::new(graph)?,
            applier: Some(basis.pseudoinverse()?),
        })
    }

    fn with_basis_free(graph: &'g PoseGraph) -> Result<Self> {
        Ok(Self {
            graph,
            laplacian: LaplacianSolver::new(graph)?,
            applier: None,
        })
    }

    pub fn theta_given_k(&self, k: &[i64]) -> Vec<f64> {
        assert_eq!(k.len(), self.graph.edge_count());
        let rhs: Vec<f64> = self
            .graph
            .measurements()
            .iter()
            .zip(k)
            .map(|(&d, &ki)| d - TAU * ki as f64)
            .collect();
        self.laplacian.solve(&rhs)
    }

    pub fn hypothesis(&self, gamma: &[i64]) -> Result<OrientationHypothesis> {
        let applier = self.applier.as_ref().expect("constructed with a basis");
        let k = applier.apply(gamma)?;
        let theta_real = self.theta_given_k(&k);
        let theta_wrapped = wrap_all(&theta_real);
        let cost = cost(self.graph, &theta_wrapped);
        Ok(OrientationHypothesis {
            gamma: gamma.to_vec(),
            theta_real,
            theta_wrapped,
            cost,
        })
    }
}

/// Ascending cost, ties broken by lexicographic `γ`.
pub fn hypothesis_order(a: &OrientationHypothesis, b: &OrientationHypothesis) -> Ordering {
    a.cost
        .total_cmp(&b.cost)
        .then_with(|| a.gamma.cmp(&b.gamma))
}

#[derive(Debug, Clone)]
pub struct Mole2dResult {
    pub basis: CycleBasisMatrix,
    pub estimate: GammaEstimate,
    pub screening: HypothesisSet,
    /// Sorted by [`hypothesis_order`].
    pub hypotheses: Vec<OrientationHypothesis>,
}

impl Mole2dResult {
    pub fn best(&self) -> &OrientationHypothesis {
        &self.hypotheses[0]
    }
}

/// Builds the basis, estimates γ, screens it and recovers one orientation
/// hypothesis per candidate.
pub fn mole2d(
    graph: &PoseGraph,
    alpha: f64,
    basis_kind: BasisKind,
    cap: usize,
) -> Result<Mole2dResult> {
    let basis = cycle_basis(graph, basis_kind)?;
    mole2d_with_basis(graph, basis, alpha, cap)
}

pub fn mole2d_with_basis(
    graph: &PoseGraph,
    basis: CycleBasisMatrix,
    alpha: f64,
    cap: usize,
) -> Result<Mole2dResult> {
    let estimate = gamma_estimator(graph, &basis);
    let screening = integer_screening(&estimate, alpha, cap)?;
    let solver = HypothesisSolver::new(graph, &basis)?;
    let candidates: Vec<Vec<i64>> = screening.iter().collect();
    let mut hypotheses = candidates
        .par_iter()
        .map(|g| solver.hypothesis(g))
        .collect::<Result<Vec<_>>>()?;
    hypotheses.sort_by(hypothesis_order);
    Ok(Mole2dResult {
        basis,
        estimate,
        screening,
        hypotheses,
    })
}

/// Result of the exhaustive box search for the maximum-likelihood `γ*`.
#[derive(Debug, Clone)]
pub struct MlSolution {
    pub hypothesis: OrientationHypothesis,
    /// `‖γ* − γ̂‖²` in the `P_γ⁻¹` norm.
    pub objective: f64,
    /// Objective of the second-best box point, if the box has more than one.
    pub runner_up: Option<f64>,
}

impl MlSolution {
    pub fn gap(&self) -> Option<f64> {
        self.runner_up.map(|r| r - self.objective)
    }
}

/// Minimizes `‖γ − γ̂‖²_{P_γ⁻¹}` over the integer box `round(γ̂) ± radius`.
pub fn ml_estimate(
    graph: &PoseGraph,
    basis: &CycleBasisMatrix,
    estimate: &GammaEstimate,
    radius: i64,
) -> Result<MlSolution> {
    ml_estimate_with_budget(graph, basis, estimate, radius, DEFAULT_ML_BUDGET)
}

pub fn ml_estimate_with_budget(
    graph: &PoseGraph,
    basis: &CycleBasisMatrix,
    estimate: &GammaEstimate,
    radius: i64,
    budget: f64,
) -> Result<MlSolution> {
    if radius < 0 {
        return Err(Error::InvalidArgument("radius must be non-negative".into()));
    }
    let ell = estimate.ell();
    let needed = ((2 * radius + 1) as f64).powi(ell as i32);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let chol = estimate
        .covariance
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite)?;
    let center: Vec<i64> = estimate
        .gamma_hat
        .iter()
        .map(|g| g.round() as i64)
        .collect();
    let objective = |gamma: &[i64]| {
        let d = DVector::from_fn(ell, |i, _| gamma[i] as f64 - estimate.gamma_hat[i]);
        let y = chol
            .l()
            .solve_lower_triangular(&d)
            .expect("Cholesky factor is invertible");
        y.norm_squared()
    };

    let mut offset = vec![-radius; ell];
    let mut best: Option<(f64, Vec<i64>)> = None;
    let mut runner_up: Option<f64> = None;
    loop {
        let gamma: Vec<i64> = center.iter().zip(&offset).map(|(c, o)| c + o).collect();
        let value = objective(&gamma);
        match &best {
            Some((b, _)) if value >= *b => {
                if runner_up.is_none_or(|r| value < r) {
                    runner_up = Some(value);
                }
            }
            _ => {
                if let Some((b, _)) = best.take() {
                    runner_up = Some(runner_up.map_or(b, |r| r.min(b)));
                }
                best = Some((value, gamma));
            }
        }
        // odometer over the box
        let mut i = ell;
        loop {
            if i == 0 {
                let (value, gamma) = best.expect("box is nonempty");
                let hypothesis = theta_given_gamma(graph, basis, &gamma)?;
                return Ok(MlSolution {
                    hypothesis,
                    objective: value,
                    runner_up,
                });
            }
            i -= 1;
            if offset[i] < radius {
                offset[i] += 1;
                break;
            }
            offset[i] = -radius;
        }
    }
}
