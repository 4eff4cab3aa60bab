use std::f64::consts::{PI, TAU};

use crate::angles::wrap;
use crate::cycles::CycleBasisMatrix;
use crate::graph::PoseGraph;
use crate::{Error, Result};

/// A simulated instance with known orientations and noise.
#[derive(Debug, Clone)]
pub struct GroundTruthInstance {
    pub graph: PoseGraph,
    /// `θ̌°` for nodes `1..=n`; node 0 is fixed at 0.
    pub theta_true: Vec<f64>,
    /// Real-valued per-edge noise `ϵ`.
    pub noise: Vec<f64>,
    /// Optional planar positions for every node, including node 0.
    pub positions: Option<Vec<[f64; 2]>>,
}

impl GroundTruthInstance {
    /// Builds the graph with `δ̌ = wrap(θ_head − θ_tail + ϵ)`.
    pub fn build(
        node_count: usize,
        topology: &[(usize, usize, f64)],
        theta_true: Vec<f64>,
        noise: Vec<f64>,
        positions: Option<Vec<[f64; 2]>>,
    ) -> Result<Self> {
        if theta_true.len() + 1 != node_count {
            return Err(Error::InvalidArgument(format!(
                "{} orientations for {node_count} nodes",
                theta_true.len()
            )));
        }
        if noise.len() != topology.len() {
            return Err(Error::InvalidArgument(
                "one noise value per edge required".into(),
            ));
        }
        if positions.as_ref().is_some_and(|p| p.len() != node_count) {
            return Err(Error::InvalidArgument(
                "one position per node required".into(),
            ));
        }
        let theta_true: Vec<f64> = theta_true.into_iter().map(wrap).collect();
        let at = |v: usize| if v == 0 { 0.0 } else { theta_true[v - 1] };
        let edges: Vec<_> = topology
            .iter()
            .zip(&noise)
            .map(|(&(t, h, var), &eps)| (t, h, wrap(at(h) - at(t) + eps), var))
            .collect();
        let graph = PoseGraph::new(node_count, &edges)?;
        Ok(Self {
            graph,
            theta_true,
            noise,
            positions,
        })
    }

    /// Same orientations, positions and topology with a new noise vector and
    /// new variances.
    pub fn with_noise(&self, noise: Vec<f64>, variances: &[f64]) -> Result<Self> {
        let topology: Vec<_> = self
            .graph
            .edges()
            .iter()
            .zip(variances)
            .map(|(e, &v)| (e.tail, e.head, v))
            .collect();
        Self::build(
            self.graph.node_count(),
            &topology,
            self.theta_true.clone(),
            noise,
            self.positions.clone(),
        )
    }

    /// `Aᵀθ̌°` per edge.
    pub fn true_differences(&self) -> Vec<f64> {
        self.graph.edge_differences(&self.theta_true)
    }

    /// Checks that the stored measurements equal `wrap(Aᵀθ̌° + ϵ)` bit for bit.
    pub fn is_consistent(&self) -> bool {
        self.true_differences()
            .iter()
            .zip(&self.noise)
            .zip(self.graph.measurements())
            .all(|((d, e), m)| wrap(d + e).to_bits() == m.to_bits())
    }

    /// `k° = ⌊(π − Aᵀθ̌° − ϵ)/2π⌋` per edge.
    pub fn true_k(&self) -> Vec<i64> {
        self.true_differences()
            .iter()
            .zip(&self.noise)
            .map(|(d, e)| ((PI - d - e) / TAU).floor() as i64)
            .collect()
    }
}

/// `γ° = C k°`.
pub fn true_gamma(instance: &GroundTruthInstance, basis: &CycleBasisMatrix) -> Vec<i64> {
    basis.apply_int(&instance.true_k())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycles::{cycle_basis, BasisKind};

    fn polygon(steps: usize, noise: f64) -> GroundTruthInstance {
        let theta: Vec<f64> = (1..steps).map(|i| i as f64 * TAU / steps as f64).collect();
        let topology: Vec<_> = (0..steps).map(|i| (i, (i + 1) % steps, 0.04)).collect();
        GroundTruthInstance::build(steps, &topology, theta, vec![noise; steps], None).unwrap()
    }

    #[test]
    fn polygon_true_gamma() {
        for noise in [0.0, 0.2] {
            let inst = polygon(18, noise);
            assert!(inst.is_consistent());
            let c = cycle_basis(&inst.graph, BasisKind::FcbOdo).unwrap();
            assert_eq!(true_gamma(&inst, &c), vec![1]);
            // only the edge crossing ±π carries a nonzero k°
            assert_eq!(inst.true_k().iter().filter(|&&k| k != 0).count(), 1);
        }
    }

    #[test]
    fn tree_has_empty_gamma() {
        let inst = GroundTruthInstance::build(
            3,
            &[(0, 1, 0.1), (1, 2, 0.1)],
            vec![3.0, -3.0],
            vec![0.0, 0.0],
            None,
        )
        .unwrap();
        let c = cycle_basis(&inst.graph, BasisKind::Mcb).unwrap();
        assert!(true_gamma(&inst, &c).is_empty());
    }

    #[test]
    fn k_regularizes_measurements() {
        let inst = polygon(7, 0.9);
        for ((d, e), (k, m)) in inst
            .true_differences()
            .iter()
            .zip(&inst.noise)
            .zip(inst.true_k().iter().zip(inst.graph.measurements()))
        {
            assert!((d + e + TAU * *k as f64 - m).abs() < 1e-12);
        }
    }
}
