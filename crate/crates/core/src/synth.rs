//! Seeded synthetic instances: the regular-polygon circle and grid-world
//! random walks with loop closures.
//!
//! All randomness comes from [`ChaCha8Rng`] seeded with a `u64`, so an
//! instance is reproduced bit for bit from its configuration.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::angles::wrap;
use crate::oracle::GroundTruthInstance;
use crate::{Error, Result};

/// Variance assigned to edges whose noise level is exactly zero.
pub const NOISELESS_VARIANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    /// `ϵ ~ N(0, σ²)` per edge.
    Gaussian,
    /// `ϵ = σ` on every edge.
    Fixed,
}

impl fmt::Display for NoiseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseMode::Gaussian => "gaussian",
            NoiseMode::Fixed => "fixed",
        })
    }
}

impl FromStr for NoiseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(NoiseMode::Gaussian),
            "fixed" | "fixed-value" => Ok(NoiseMode::Fixed),
            other => Err(Error::InvalidArgument(format!(
                "unknown noise mode {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Circle { steps: usize },
    GridWalk(GridWalkParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub family: Family,
    pub sigma_theta: f64,
    pub extra_sigma: f64,
    pub seed: u64,
    pub noise_mode: NoiseMode,
}

impl SynthConfig {
    pub fn generate(&self) -> Result<GroundTruthInstance> {
        let inst = match &self.family {
            Family::Circle { steps } => {
                circle_graph(*steps, self.sigma_theta, self.noise_mode, self.seed)?
            }
            Family::GridWalk(params) => {
                let mut params = params.clone();
                params.sigma = SigmaSpec::Fixed(self.sigma_theta);
                grid_walk_with(&params, self.noise_mode, self.seed)?
            }
        };
        inject_orientation_noise(
            &inst,
            self.extra_sigma,
            self.seed.wrapping_add(0x9e37_79b9_7f4a_7c15),
        )
    }
}

fn variance_for(sigma: f64) -> f64 {
    if sigma == 0.0 {
        NOISELESS_VARIANCE
    } else {
        sigma * sigma
    }
}

fn draw_noise(rng: &mut ChaCha8Rng, sigma: f64, mode: NoiseMode) -> Result<f64> {
    match mode {
        NoiseMode::Fixed => Ok(sigma),
        NoiseMode::Gaussian if sigma == 0.0 => Ok(0.0),
        NoiseMode::Gaussian => {
            let normal = Normal::new(0.0, sigma).map_err(|_| Error::OutOfRange {
                value: sigma,
                range: "[0, inf)",
            })?;
            Ok(normal.sample(rng))
        }
    }
}

/// Regular `steps`-gon traversed counter-clockwise from the origin:
/// `θ°_i = wrap(2πi/steps)`, edges `i → i+1` plus the closing edge.
pub fn circle_graph(
    steps: usize,
    sigma: f64,
    mode: NoiseMode,
    seed: u64,
) -> Result<GroundTruthInstance> {
    if steps < 3 {
        return Err(Error::InvalidArgument(format!(
            "circle needs at least 3 steps, got {steps}"
        )));
    }
    if !(sigma.is_finite() && (mode == NoiseMode::Fixed || sigma >= 0.0)) {
        return Err(Error::OutOfRange {
            value: sigma,
            range: "finite",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step_angle = TAU / steps as f64;
    let radius = 0.5 / (PI / steps as f64).sin();
    let positions: Vec<[f64; 2]> = (0..steps)
        .map(|i| {
            let phi = i as f64 * step_angle;
            [radius * phi.sin(), radius * (1.0 - phi.cos())]
        })
        .collect();
    let theta: Vec<f64> = (1..steps).map(|i| wrap(i as f64 * step_angle)).collect();
    let variance = variance_for(sigma.abs());
    let topology: Vec<_> = (0..steps).map(|i| (i, (i + 1) % steps, variance)).collect();
    let noise = (0..steps)
        .map(|_| draw_noise(&mut rng, sigma, mode))
        .collect::<Result<Vec<_>>>()?;
    GroundTruthInstance::build(steps, &topology, theta, noise, Some(positions))
}

/// Per-edge standard deviation specification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaSpec {
    Fixed(f64),
    /// Drawn uniformly from `[lo, hi]` for every edge.
    Uniform(f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridWalkParams {
    pub rows: usize,
    pub cols: usize,
    /// Number of moves; the trajectory has `steps + 1` poses.
    pub steps: usize,
    /// Probability of closing a loop when the walk re-enters a visited cell.
    pub chord_prob: f64,
    pub max_chords: Option<usize>,
    pub sigma: SigmaSpec,
}

impl GridWalkParams {
    pub fn new(rows: usize, cols: usize, chord_prob: f64, sigma: f64) -> Self {
        Self {
            rows,
            cols,
            steps: 2 * rows * cols,
            chord_prob,
            max_chords: None,
            sigma: SigmaSpec::Fixed(sigma),
        }
    }
}

const HEADINGS: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

/// Grid walk with Gaussian orientation noise and the default number of
/// steps (`2·rows·cols`).
pub fn grid_walk(
    rows: usize,
    cols: usize,
    chord_prob: f64,
    sigma: f64,
    seed: u64,
) -> Result<GroundTruthInstance> {
    grid_walk_with(
        &GridWalkParams::new(rows, cols, chord_prob, sigma),
        NoiseMode::Gaussian,
        seed,
    )
}

/// Random walk on a `rows × cols` grid with 90° turns, starting in the corner
/// cell facing +x. Each pose faces its direction of travel. When the walk
/// enters a cell it visited before, a loop-closure edge to the most recent
/// earlier visit is added with probability `chord_prob`.
pub fn grid_walk_with(
    params: &GridWalkParams,
    mode: NoiseMode,
    seed: u64,
) -> Result<GroundTruthInstance> {
    let GridWalkParams {
        rows,
        cols,
        steps,
        chord_prob,
        max_chords,
        sigma,
    } = *params;
    if rows * cols < 4 || rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument(format!(
            "grid {rows}×{cols} is too small"
        )));
    }
    if !(0.0..=1.0).contains(&chord_prob) {
        return Err(Error::OutOfRange {
            value: chord_prob,
            range: "[0, 1]",
        });
    }
    if steps == 0 {
        return Err(Error::InvalidArgument(
            "grid walk needs at least one step".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut cells = vec![(0i64, 0i64)];
    let mut heading = 0usize;
    let mut last_visit: HashMap<(i64, i64), usize> = HashMap::from([((0, 0), 0)]);
    let mut headings = vec![0usize];
    let mut closures = Vec::new();
    for step in 0..steps {
        let (x, y) = cells[step];
        let inside = |h: usize| {
            let (dx, dy) = HEADINGS[h];
            let (nx, ny) = (x + dx, y + dy);
            nx >= 0 && ny >= 0 && nx < cols as i64 && ny < rows as i64
        };
        let turn: u32 = rng.random_range(0..4);
        let mut choices = match turn {
            0 | 1 => vec![heading, (heading + 1) % 4, (heading + 3) % 4],
            2 => vec![(heading + 1) % 4, heading, (heading + 3) % 4],
            _ => vec![(heading + 3) % 4, heading, (heading + 1) % 4],
        };
        choices.push((heading + 2) % 4);
        heading = choices
            .into_iter()
            .find(|&h| inside(h))
            .expect("grid has at least two cells");
        let (dx, dy) = HEADINGS[heading];
        let cell = (x + dx, y + dy);
        let node = step + 1;
        cells.push(cell);
        headings.push(heading);
        if let Some(&prev) = last_visit.get(&cell) {
            let room = max_chords.is_none_or(|mx| closures.len() < mx);
            if prev + 1 != node && room && rng.random_bool(chord_prob) {
                closures.push((prev, node));
            }
        }
        last_visit.insert(cell, node);
    }

    let node_count = steps + 1;
    let mut topology: Vec<(usize, usize)> = (0..steps).map(|i| (i, i + 1)).collect();
    topology.extend(closures);
    let sigmas: Vec<f64> = topology
        .iter()
        .map(|_| match sigma {
            SigmaSpec::Fixed(s) => s,
            SigmaSpec::Uniform(lo, hi) => rng.random_range(lo..=hi),
        })
        .collect();
    let noise = sigmas
        .iter()
        .map(|&s| draw_noise(&mut rng, s, mode))
        .collect::<Result<Vec<_>>>()?;
    let topology: Vec<_> = topology
        .iter()
        .zip(&sigmas)
        .map(|(&(t, h), &s)| (t, h, variance_for(s.abs())))
        .collect();
    let theta: Vec<f64> = headings[1..].iter().map(|&h| h as f64 * PI / 2.0).collect();
    let positions: Vec<[f64; 2]> = cells.iter().map(|&(x, y)| [x as f64, y as f64]).collect();
    GroundTruthInstance::build(node_count, &topology, theta, noise, Some(positions))
}

/// Configuration of the random instances used by the Monte Carlo suites:
/// grid-walk topologies with 10–30 poses, 2–6 loop closures and per-edge σ
/// uniform in `[0.05, 0.3]`. True orientations are redrawn uniformly on the
/// circle, so positions are not kept.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialGenerator {
    pub min_poses: usize,
    pub max_poses: usize,
    pub min_chords: usize,
    pub max_chords: usize,
    pub sigma: SigmaSpec,
}

impl Default for TrialGenerator {
    fn default() -> Self {
        Self {
            min_poses: 10,
            max_poses: 30,
            min_chords: 2,
            max_chords: 6,
            sigma: SigmaSpec::Uniform(0.05, 0.3),
        }
    }
}

impl TrialGenerator {
    pub fn generate(&self, mode: NoiseMode, seed: u64) -> Result<GroundTruthInstance> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..1000 {
            let poses = rng.random_range(self.min_poses..=self.max_poses);
            let target = rng.random_range(self.min_chords..=self.max_chords);
            let params = GridWalkParams {
                rows: 3,
                cols: 4,
                steps: poses - 1,
                chord_prob: 1.0,
                max_chords: Some(target),
                sigma: self.sigma,
            };
            let walk = grid_walk_with(&params, mode, rng.random())?;
            if walk.graph.cyclomatic_number() != target {
                continue;
            }
            let theta: Vec<f64> = (1..poses).map(|_| rng.random_range(-PI..PI)).collect();
            let topology: Vec<_> = walk
                .graph
                .edges()
                .iter()
                .zip(walk.graph.variances())
                .map(|(e, &v)| (e.tail, e.head, v))
                .collect();
            return GroundTruthInstance::build(poses, &topology, theta, walk.noise, None);
        }
        Err(Error::InvalidArgument(
            "trial generator could not place the requested loop closures".into(),
        ))
    }
}

/// Adds independent `N(0, extra²)` noise to every edge and inflates the
/// variances by `extra²`.
pub fn inject_orientation_noise(
    instance: &GroundTruthInstance,
    extra_sigma: f64,
    seed: u64,
) -> Result<GroundTruthInstance> {
    if !(extra_sigma >= 0.0 && extra_sigma.is_finite()) {
        return Err(Error::OutOfRange {
            value: extra_sigma,
            range: "[0, inf)",
        });
    }
    if extra_sigma == 0.0 {
        return Ok(instance.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, extra_sigma).expect("validated sigma");
    let noise: Vec<f64> = instance
        .noise
        .iter()
        .map(|e| e + normal.sample(&mut rng))
        .collect();
    let variances: Vec<f64> = instance
        .graph
        .variances()
        .iter()
        .map(|v| v + extra_sigma * extra_sigma)
        .collect();
    instance.with_noise(noise, &variances)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycles::{cycle_basis, BasisKind};
    use crate::estimator::{gamma_estimator, mole2d, DEFAULT_ALPHA, DEFAULT_CAP};
    use crate::oracle::true_gamma;

    #[test]
    fn circle_instances() {
        let inst = circle_graph(18, 0.2, NoiseMode::Fixed, 0).unwrap();
        assert!(inst.is_consistent());
        assert_eq!(inst.graph.cyclomatic_number(), 1);
        let c = cycle_basis(&inst.graph, BasisKind::Mcb).unwrap();
        assert_eq!(true_gamma(&inst, &c), vec![1]);
        let total: f64 = inst.graph.variances().iter().sum();
        assert!((total - 0.72).abs() < 1e-12);
        // returns to the origin after a full turn
        let p = inst.positions.as_ref().unwrap();
        let step = ((p[1][0] - p[0][0]).powi(2) + (p[1][1] - p[0][1]).powi(2)).sqrt();
        assert!((step - 1.0).abs() < 1e-12);

        let clean = circle_graph(18, 0.0, NoiseMode::Fixed, 0).unwrap();
        let c = cycle_basis(&clean.graph, BasisKind::Mcb).unwrap();
        assert!((gamma_estimator(&clean.graph, &c).gamma_hat[0] - 1.0).abs() < 1e-12);
        let r = mole2d(&clean.graph, DEFAULT_ALPHA, BasisKind::Mcb, DEFAULT_CAP).unwrap();
        assert_eq!(r.hypotheses.len(), 1);
        assert!(r.best().cost < 1e-12);

        assert_eq!(
            circle_graph(3, 0.0, NoiseMode::Gaussian, 1)
                .unwrap()
                .graph
                .cyclomatic_number(),
            1
        );
        assert!(circle_graph(2, 0.0, NoiseMode::Gaussian, 1).is_err());
    }

    #[test]
    fn grid_walk_determinism_and_trees() {
        let a = grid_walk(10, 10, 0.1, 0.1, 42).unwrap();
        let b = grid_walk(10, 10, 0.1, 0.1, 42).unwrap();
        assert_eq!(a.graph.measurements(), b.graph.measurements());
        assert_eq!(a.noise, b.noise);
        assert!(a.is_consistent());
        assert!(a.graph.cyclomatic_number() > 0);
        assert_eq!(
            grid_walk(10, 10, 0.0, 0.1, 42)
                .unwrap()
                .graph
                .cyclomatic_number(),
            0
        );
    }

    #[test]
    fn grid_walk_geometry_is_consistent() {
        let inst = grid_walk(5, 5, 0.5, 0.0, 3).unwrap();
        let p = inst.positions.as_ref().unwrap();
        let theta = |v: usize| if v == 0 { 0.0 } else { inst.theta_true[v - 1] };
        for e in inst.graph.edges().iter().filter(|e| e.head == e.tail + 1) {
            // each odometry step moves one cell forward along the new heading
            let (dx, dy) = (p[e.head][0] - p[e.tail][0], p[e.head][1] - p[e.tail][1]);
            let th = theta(e.head);
            assert!((dx - th.cos()).abs() < 1e-9 && (dy - th.sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn trial_generator_ranges() {
        let g = TrialGenerator::default();
        for seed in 0..30 {
            let inst = g.generate(NoiseMode::Gaussian, seed).unwrap();
            let n = inst.graph.node_count();
            assert!((10..=30).contains(&n));
            assert!((2..=6).contains(&inst.graph.cyclomatic_number()));
            assert!(inst
                .graph
                .variances()
                .iter()
                .all(|&v| (0.0025..=0.09 + 1e-12).contains(&v)));
        }
    }

    #[test]
    fn injection() {
        let inst = grid_walk(6, 6, 0.3, 0.1, 7).unwrap();
        let same = inject_orientation_noise(&inst, 0.0, 1).unwrap();
        assert_eq!(same.graph.measurements(), inst.graph.measurements());
        let noisier = inject_orientation_noise(&inst, 0.2, 1).unwrap();
        assert!(noisier.is_consistent());
        for (a, b) in noisier.graph.variances().iter().zip(inst.graph.variances()) {
            assert!((a - b - 0.04).abs() < 1e-15);
        }
    }

    #[test]
    fn config_generation() {
        let cfg = SynthConfig {
            family: Family::Circle { steps: 18 },
            sigma_theta: 0.2,
            extra_sigma: 0.0,
            seed: 5,
            noise_mode: NoiseMode::Fixed,
        };
        let inst = cfg.generate().unwrap();
        assert!(inst.noise.iter().all(|&e| e == 0.2));
        let cfg = SynthConfig {
            family: Family::GridWalk(GridWalkParams::new(8, 8, 0.2, 0.1)),
            ..cfg
        };
        assert_eq!(
            cfg.generate().unwrap().graph.measurements(),
            cfg.generate().unwrap().graph.measurements()
        );
    }
}
