//! Brute-force references: angular grid search with local polish, and a
//! dense enumeration of the integer box for the maximum-likelihood `γ`.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::angles::wrap;
use crate::cycles::CycleBasisMatrix;
use crate::graph::PoseGraph;
use crate::{Error, Result};

/// Default angular resolution `2π/720`.
pub const DEFAULT_RESOLUTION: f64 = TAU / 720.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchConfig {
    pub resolution: f64,
    /// Maximum number of grid points; the per-axis count is reduced until
    /// the full grid fits.
    pub budget: f64,
    /// Grid points (best first) that are polished.
    pub polish_top: usize,
    pub random_starts: usize,
    pub seed: u64,
}

impl Default for GridSearchConfig {
    fn default() -> Self {
        Self {
            resolution: DEFAULT_RESOLUTION,
            budget: 4e6,
            polish_top: 16,
            random_starts: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridSearchResult {
    /// Best wrapped orientations found (nodes `1..=n`).
    pub theta: Vec<f64>,
    pub cost: f64,
    /// Grid spacing actually used; `None` when only random starts ran.
    pub effective_resolution: Option<f64>,
    pub grid_points: usize,
    /// Polished costs of every random start, in start order.
    pub local_minima: Vec<f64>,
}

/// Edge list view with the circular cost, written independently of the
/// estimator module.
struct Objective {
    tails: Vec<usize>,
    heads: Vec<usize>,
    delta: Vec<f64>,
    weight: Vec<f64>,
    n: usize,
}

impl Objective {
    fn new(graph: &PoseGraph) -> Self {
        Self {
            tails: graph.edges().iter().map(|e| e.tail).collect(),
            heads: graph.edges().iter().map(|e| e.head).collect(),
            delta: graph.measurements().to_vec(),
            weight: graph.variances().iter().map(|v| 1.0 / v).collect(),
            n: graph.free_nodes(),
        }
    }

    /// `theta` holds all `n + 1` nodes with `theta[0] = 0`.
    fn eval(&self, theta: &[f64]) -> f64 {
        let mut total = 0.0;
        for e in 0..self.delta.len() {
            let r = wrap(theta[self.heads[e]] - theta[self.tails[e]] - self.delta[e]);
            total += self.weight[e] * r * r;
        }
        total
    }

    fn golden(&self, theta: &mut [f64], i: usize, half_width: f64) -> f64 {
        const INV_PHI: f64 = 0.618_033_988_749_894_9;
        let center = theta[i];
        let (mut a, mut b) = (center - half_width, center + half_width);
        let f = |x: f64, th: &mut [f64]| {
            th[i] = x;
            self.eval(th)
        };
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let mut fc = f(c, theta);
        let mut fd = f(d, theta);
        while b - a > 1e-11 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = f(c, theta);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = f(d, theta);
            }
        }
        let x = 0.5 * (a + b);
        let fx = f(x, theta);
        let f0 = f(center, theta);
        if fx <= f0 {
            theta[i] = x;
            fx
        } else {
            theta[i] = center;
            f0
        }
    }

    /// Fixes the wrap pattern of the current residuals and solves the
    /// resulting weighted linear least-squares problem densely.
    fn gauss_newton(&self, theta: &[f64]) -> Option<Vec<f64>> {
        let n = self.n;
        let mut lhs = DMatrix::<f64>::zeros(n, n);
        let mut rhs = DVector::<f64>::zeros(n);
        for e in 0..self.delta.len() {
            let (t, h, w) = (self.tails[e], self.heads[e], self.weight[e]);
            let raw = theta[h] - theta[t] - self.delta[e];
            let shift = wrap(raw) - raw;
            // minimize w (θ_h − θ_t − δ + shift)²
            let target = self.delta[e] - shift;
            if h > 0 {
                lhs[(h - 1, h - 1)] += w;
                rhs[h - 1] += w * target;
            }
            if t > 0 {
                lhs[(t - 1, t - 1)] += w;
                rhs[t - 1] -= w * target;
            }
            if h > 0 && t > 0 {
                lhs[(h - 1, t - 1)] -= w;
                lhs[(t - 1, h - 1)] -= w;
            }
        }
        let x = lhs.cholesky()?.solve(&rhs);
        let mut out = vec![0.0];
        out.extend(x.iter());
        Some(out)
    }

    /// Coordinate descent with golden-section line search until a sweep
    /// improves by less than `1e-9`, then a Gauss–Newton step.
    fn polish(&self, start: &[f64], half_width: f64) -> (Vec<f64>, f64) {
        let mut theta = start.to_vec();
        let mut best = self.eval(&theta);
        let mut width = half_width;
        for _ in 0..10_000 {
            let before = best;
            for i in 1..=self.n {
                best = self.golden(&mut theta, i, width);
            }
            if before - best < 1e-9 {
                if width < 1e-6 {
                    break;
                }
                width *= 0.25;
            }
        }
        if let Some(candidate) = self.gauss_newton(&theta) {
            let c = self.eval(&candidate);
            if c < best {
                theta = candidate;
                best = c;
            }
        }
        (theta, best)
    }
}

/// Global search of the circular cost over `(−π, π]^n`.
pub fn grid_search_angles(graph: &PoseGraph, resolution: f64) -> Result<GridSearchResult> {
    grid_search_with(
        graph,
        &GridSearchConfig {
            resolution,
            ..GridSearchConfig::default()
        },
    )
}

pub fn grid_search_with(graph: &PoseGraph, config: &GridSearchConfig) -> Result<GridSearchResult> {
    if !(config.resolution > 0.0 && config.resolution <= TAU) {
        return Err(Error::OutOfRange {
            value: config.resolution,
            range: "(0, 2π]",
        });
    }
    let objective = Objective::new(graph);
    let n = objective.n;
    let mut per_axis = (TAU / config.resolution).round().max(1.0) as usize;
    while n > 0 && (per_axis as f64).powi(n as i32) > config.budget && per_axis > 1 {
        per_axis -= 1;
    }
    let use_grid = n == 0 || per_axis >= 8;
    let mut top: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut grid_points = 0;
    let mut effective_resolution = None;
    if use_grid {
        let step = TAU / per_axis as f64;
        effective_resolution = Some(step);
        let mut index = vec![0usize; n];
        let mut theta = vec![0.0; n + 1];
        loop {
            for i in 0..n {
                theta[i + 1] = PI - index[i] as f64 * step;
            }
            let c = objective.eval(&theta);
            grid_points += 1;
            if top.len() < config.polish_top.max(1) || c < top.last().expect("nonempty").0 {
                let pos = top.partition_point(|(v, _)| *v <= c);
                top.insert(pos, (c, theta.clone()));
                top.truncate(config.polish_top.max(1));
            }
            let mut i = 0;
            while i < n {
                index[i] += 1;
                if index[i] < per_axis {
                    break;
                }
                index[i] = 0;
                i += 1;
            }
            if i == n {
                break;
            }
        }
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |c: f64, th: Vec<f64>| {
        if best.as_ref().is_none_or(|(b, _)| c < *b) {
            best = Some((c, th));
        }
    };
    let grid_half = effective_resolution.unwrap_or(PI);
    for (_, start) in &top {
        let (th, c) = objective.polish(start, grid_half);
        consider(c, th);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut local_minima = Vec::with_capacity(config.random_starts);
    for _ in 0..config.random_starts {
        let mut start = vec![0.0];
        start.extend((0..n).map(|_| rng.random_range(-PI..PI)));
        let (th, c) = objective.polish(&start, PI / 2.0);
        local_minima.push(c);
        consider(c, th);
    }
    let (cost, theta) =
        best.unwrap_or_else(|| (objective.eval(&vec![0.0; n + 1]), vec![0.0; n + 1]));
    let theta: Vec<f64> = theta[1..].iter().map(|&t| wrap(t)).collect();
    let mut full = vec![0.0];
    full.extend(&theta);
    let cost = objective.eval(&full).min(cost);
    Ok(GridSearchResult {
        theta,
        cost,
        effective_resolution,
        grid_points,
        local_minima,
    })
}

/// Independent dense box search for `argmin ‖γ − γ̂‖²_{P_γ⁻¹}`.
#[derive(Debug, Clone)]
pub struct BruteForceMl {
    pub gamma: Vec<i64>,
    pub objective: f64,
    pub runner_up: Option<f64>,
}

pub fn brute_force_ml(
    graph: &PoseGraph,
    basis: &CycleBasisMatrix,
    radius: i64,
) -> Result<BruteForceMl> {
    let c = basis.to_dense_f64();
    let p = DMatrix::from_diagonal(&DVector::from_column_slice(graph.variances()));
    let delta = DVector::from_column_slice(graph.measurements());
    let gamma_hat = &c * delta / TAU;
    let info = ((&c * p * c.transpose()) / (TAU * TAU))
        .try_inverse()
        .ok_or(Error::SingularBlock)?;
    let ell = gamma_hat.len();
    let mut results: Vec<(f64, Vec<i64>)> = Vec::new();
    fn recurse(
        depth: usize,
        current: &mut Vec<i64>,
        gamma_hat: &DVector<f64>,
        radius: i64,
        info: &DMatrix<f64>,
        out: &mut Vec<(f64, Vec<i64>)>,
    ) {
        if depth == gamma_hat.len() {
            let d = DVector::from_iterator(
                current.len(),
                current
                    .iter()
                    .zip(gamma_hat.iter())
                    .map(|(&g, h)| g as f64 - h),
            );
            out.push(((d.transpose() * info * &d)[0], current.clone()));
            return;
        }
        let center = gamma_hat[depth].round() as i64;
        for g in center - radius..=center + radius {
            current.push(g);
            recurse(depth + 1, current, gamma_hat, radius, info, out);
            current.pop();
        }
    }
    recurse(
        0,
        &mut Vec::with_capacity(ell),
        &gamma_hat,
        radius,
        &info,
        &mut results,
    );
    results.sort_by(|a, b| a.0.total_cmp(&b.0));
    let runner_up = results.get(1).map(|r| r.0);
    let (objective, gamma) = results.swap_remove(0);
    Ok(BruteForceMl {
        gamma,
        objective,
        runner_up,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::cost;

    #[test]
    fn noiseless_triangle() {
        let th = [0.0, 1.0, -2.5];
        let edges = [
            (0, 1, th[1] - th[0], 0.1),
            (1, 2, wrap(th[2] - th[1]), 0.1),
            (2, 0, wrap(th[0] - th[2]), 0.1),
        ];
        let g = PoseGraph::new(3, &edges).unwrap();
        let r = grid_search_angles(&g, DEFAULT_RESOLUTION).unwrap();
        assert!(r.cost < 1e-12);
        assert!((r.theta[0] - 1.0).abs() < 1e-6 && (r.theta[1] + 2.5).abs() < 1e-6);
        assert_eq!(r.effective_resolution, Some(DEFAULT_RESOLUTION));
    }

    #[test]
    fn multiple_local_minima() {
        // two nodes with strongly conflicting measurements around the cycle
        let edges = [
            (0, 1, 2.0, 0.1),
            (1, 2, 2.0, 0.1),
            (2, 0, 2.0, 0.1),
            (0, 2, -1.0, 0.5),
        ];
        let g = PoseGraph::new(3, &edges).unwrap();
        let r = grid_search_angles(&g, DEFAULT_RESOLUTION).unwrap();
        let worst = r.local_minima.iter().cloned().fold(f64::MIN, f64::max);
        assert!(r.cost < worst - 1e-3, "best {} worst {}", r.cost, worst);
        let mut full = r.theta.clone();
        full.iter_mut().for_each(|t| *t = wrap(*t));
        assert!((cost(&g, &full) - r.cost).abs() < 1e-9);
    }

    #[test]
    fn coarse_grid_for_larger_graphs() {
        let edges: Vec<_> = (0..6).map(|i| (i, (i + 1) % 6, 0.3, 0.05)).collect();
        let g = PoseGraph::new(6, &edges).unwrap();
        let r = grid_search_with(
            &g,
            &GridSearchConfig {
                budget: 1e5,
                random_starts: 10,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(r.grid_points as f64 <= 1e5);
        assert!(r.effective_resolution.unwrap() > DEFAULT_RESOLUTION);
    }
}
