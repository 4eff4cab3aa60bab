//! Circular arithmetic on `(-π, +π]` and the wrapped Gaussian noise model.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::graph::PoseGraph;
use crate::{Error, Result};

/// Default split threshold on `3σ` for [`split_large_variance_edges`].
pub const DEFAULT_SPLIT_THRESHOLD: f64 = PI / 2.0;

/// Maps `omega` into `(-π, +π]` as `ω + 2π⌊(π − ω)/2π⌋`.
///
/// Non-finite input propagates as NaN; use [`checked_wrap`] to get an error.
pub fn wrap(omega: f64) -> f64 {
    omega + TAU * wrap_count(omega) as f64
}

/// [`wrap`] that rejects non-finite input.
pub fn checked_wrap(omega: f64) -> Result<f64> {
    if !omega.is_finite() {
        return Err(Error::NonFinite(format!("angle {omega}")));
    }
    Ok(wrap(omega))
}

/// The integer `k` with `wrap(ω) = ω + 2πk`, i.e. `argmin_k |ω + 2πk|`.
pub fn regularizer(omega: f64) -> Result<i64> {
    if !omega.is_finite() {
        return Err(Error::NonFinite(format!("angle {omega}")));
    }
    Ok(wrap_count(omega))
}

fn wrap_count(omega: f64) -> i64 {
    if !omega.is_finite() {
        return 0;
    }
    let mut k = ((PI - omega) / TAU).floor();
    // the floor can land one step off when ω + 2πk rounds across ±π
    let r = omega + TAU * k;
    if r <= -PI {
        k += 1.0;
    } else if r > PI {
        k -= 1.0;
    }
    k as i64
}

/// Wraps every entry of `values`.
pub fn wrap_all(values: &[f64]) -> Vec<f64> {
    values.iter().copied().map(wrap).collect()
}

/// Wrapped Gaussian `W_{σ²}` on the circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WrappedGaussian {
    variance: f64,
}

impl WrappedGaussian {
    pub fn new(variance: f64) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::OutOfRange {
                value: variance,
                range: "(0, inf)",
            });
        }
        Ok(Self { variance })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn sigma(&self) -> f64 {
        self.variance.sqrt()
    }

    /// Number of wrap terms kept on each side of `k = 0`.
    pub fn series_terms(&self) -> i64 {
        ((6.0 * self.sigma() + PI) / TAU).ceil() as i64 + 1
    }

    /// Density at `x` (any real; it is wrapped first).
    pub fn pdf(&self, x: f64) -> f64 {
        let x = wrap(x);
        let sigma = self.sigma();
        let norm = 1.0 / (sigma * TAU.sqrt());
        let k_max = self.series_terms();
        let mut acc = 0.0;
        for k in -k_max..=k_max {
            let d = x + TAU * k as f64;
            acc += (-d * d / (2.0 * self.variance)).exp();
        }
        norm * acc
    }

    /// Draws `wrap(z)` with `z ~ N(0, σ²)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        wrap(self.sample_unwrapped(rng))
    }

    /// Draws the tangent-space value `z ~ N(0, σ²)` before wrapping.
    pub fn sample_unwrapped<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Normal::new(0.0, self.sigma())
            .expect("sigma is positive and finite")
            .sample(rng)
    }
}

/// Density of `W_{σ²}` at `x`.
pub fn wrapped_pdf(x: f64, variance: f64) -> Result<f64> {
    Ok(WrappedGaussian::new(variance)?.pdf(x))
}

/// Draws one wrapped Gaussian sample.
pub fn sample_wrapped<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> Result<f64> {
    Ok(WrappedGaussian::new(variance)?.sample(rng))
}

/// Smallest `q` such that `3σ/√q ≤ threshold`.
pub fn split_factor(variance: f64, threshold: f64) -> usize {
    let three_sigma = 3.0 * variance.sqrt();
    if three_sigma <= threshold {
        return 1;
    }
    let mut q = ((three_sigma / threshold).powi(2)).ceil().max(1.0) as usize;
    // guard the ceil against rounding in either direction
    while q > 1 && three_sigma / ((q - 1) as f64).sqrt() <= threshold {
        q -= 1;
    }
    while three_sigma / (q as f64).sqrt() > threshold {
        q += 1;
    }
    q
}

/// Replaces every edge with `3σ > threshold` by `q` serial sub-edges of
/// variance `σ²/q` and measurement `wrap(δ/q)`.
///
/// Auxiliary nodes are appended after the original nodes, so original node
/// indices are preserved. Edges are emitted in original order; the sub-edges
/// of a split edge replace it in place.
pub fn split_large_variance_edges(graph: &PoseGraph, threshold: f64) -> Result<PoseGraph> {
    if !(threshold > 0.0) {
        return Err(Error::OutOfRange {
            value: threshold,
            range: "(0, inf)",
        });
    }
    let mut next_node = graph.node_count();
    let mut edges = Vec::with_capacity(graph.edge_count());
    for (e, rec) in graph.edges().iter().enumerate() {
        let variance = graph.variances()[e];
        let delta = graph.measurements()[e];
        let q = split_factor(variance, threshold);
        if q == 1 {
            edges.push((rec.tail, rec.head, delta, variance));
            continue;
        }
        let sub_delta = wrap(delta / q as f64);
        let sub_var = variance / q as f64;
        let mut from = rec.tail;
        for s in 0..q {
            let to = if s + 1 == q {
                rec.head
            } else {
                next_node += 1;
                next_node - 1
            };
            edges.push((from, to, sub_delta, sub_var));
            from = to;
        }
    }
    if next_node == graph.node_count() {
        return Ok(graph.clone());
    }
    PoseGraph::new(next_node, &edges)
}
