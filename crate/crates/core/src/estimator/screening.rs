use std::ops::RangeInclusive;

use log::{debug, info};

use super::GammaEstimate;
use crate::cycles::BasisKind;
use crate::linalg::chi2_quantile_1dof;
use crate::{Error, Result};

/// Default confidence level α.
pub const DEFAULT_ALPHA: f64 = 0.99;

/// Default bound on `|Γ|`.
pub const DEFAULT_CAP: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningDiagnostics {
    /// Number of iterations `K` that were run.
    pub iterations: usize,
    /// `|U^(k)|` for `k = 1..=K`.
    pub resolved_per_iteration: Vec<usize>,
    pub alpha: f64,
    pub basis_kind: Option<BasisKind>,
    /// Coordinates whose interval held no integer and fell back to rounding.
    pub confidence_violated: Vec<usize>,
}

impl ScreeningDiagnostics {
    /// `100·|U^(k)|/ℓ` per iteration.
    pub fn resolved_percent(&self, ell: usize) -> Vec<f64> {
        self.resolved_per_iteration
            .iter()
            .map(|&u| {
                if ell == 0 {
                    0.0
                } else {
                    100.0 * u as f64 / ell as f64
                }
            })
            .collect()
    }
}

/// Product set `Γ = Γ_1 × … × Γ_ℓ` of integer candidates; each `Γ_i` is a
/// contiguous integer range.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisSet {
    per_coordinate: Vec<RangeInclusive<i64>>,
    pub diagnostics: ScreeningDiagnostics,
}

impl HypothesisSet {
    pub fn new(
        per_coordinate: Vec<RangeInclusive<i64>>,
        diagnostics: ScreeningDiagnostics,
    ) -> Self {
        assert!(
            per_coordinate.iter().all(|r| !r.is_empty()),
            "every Γ_i must be nonempty"
        );
        Self {
            per_coordinate,
            diagnostics,
        }
    }

    pub fn ell(&self) -> usize {
        self.per_coordinate.len()
    }

    pub fn per_coordinate(&self) -> &[RangeInclusive<i64>] {
        &self.per_coordinate
    }

    /// `|Γ|`, or `None` if it does not fit in a `u128`.
    pub fn cardinality(&self) -> Option<u128> {
        self.per_coordinate
            .iter()
            .try_fold(1u128, |acc, r| acc.checked_mul(range_len(r)))
    }

    pub fn log10_cardinality(&self) -> f64 {
        self.per_coordinate
            .iter()
            .map(|r| (range_len(r) as f64).log10())
            .sum()
    }

    pub fn contains(&self, gamma: &[i64]) -> bool {
        gamma.len() == self.ell()
            && self
                .per_coordinate
                .iter()
                .zip(gamma)
                .all(|(r, g)| r.contains(g))
    }

    /// Iterates `Γ` in lexicographic order.
    pub fn iter(&self) -> ProductIter<'_> {
        ProductIter {
            ranges: &self.per_coordinate,
            current: Some(self.per_coordinate.iter().map(|r| *r.start()).collect()),
        }
    }
}

fn range_len(r: &RangeInclusive<i64>) -> u128 {
    (*r.end() as i128 - *r.start() as i128 + 1) as u128
}

pub struct ProductIter<'a> {
    ranges: &'a [RangeInclusive<i64>],
    current: Option<Vec<i64>>,
}

impl Iterator for ProductIter<'_> {
    type Item = Vec<i64>;

    fn next(&mut self) -> Option<Vec<i64>> {
        let out = self.current.take()?;
        let mut next = out.clone();
        for i in (0..next.len()).rev() {
            if next[i] < *self.ranges[i].end() {
                next[i] += 1;
                self.current = Some(next);
                return Some(out);
            }
            next[i] = *self.ranges[i].start();
        }
        Some(out)
    }
}

/// Iterative marginalization and conditioning on the γ belief.
///
/// Every iteration computes, for each unresolved coordinate, the integers in
/// the closed interval `ζ_i ± √(P_ii·χ²₁(η))` with `η = α^(1/ℓ)`. Coordinates
/// left with a single integer are fixed jointly and the belief is
/// conditioned on them. The loop stops when nothing new resolves or nothing
/// is left.
pub fn integer_screening(
    estimate: &GammaEstimate,
    alpha: f64,
    cap: usize,
) -> Result<HypothesisSet> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::OutOfRange {
            value: alpha,
            range: "(0, 1)",
        });
    }
    if cap == 0 {
        return Err(Error::InvalidArgument(
            "hypothesis cap must be at least 1".into(),
        ));
    }
    let ell = estimate.ell();
    let mut diagnostics = ScreeningDiagnostics {
        iterations: 0,
        resolved_per_iteration: Vec::new(),
        alpha,
        basis_kind: estimate.basis_kind,
        confidence_violated: Vec::new(),
    };
    if ell == 0 {
        return Ok(HypothesisSet::new(Vec::new(), diagnostics));
    }

    let eta = alpha.powf(1.0 / ell as f64);
    let chi2 = chi2_quantile_1dof(eta)?;
    let mut belief = estimate.belief()?;
    let mut remaining: Vec<usize> = (0..ell).collect();
    let mut sets: Vec<RangeInclusive<i64>> = vec![0..=0; ell];
    let mut violated = vec![false; ell];

    while !remaining.is_empty() {
        diagnostics.iterations += 1;
        let mut resolved_local = Vec::new();
        let mut resolved_values = Vec::new();
        for (j, &i) in remaining.iter().enumerate() {
            let zeta = belief.mean[j];
            let b = (belief.variance(j).max(0.0) * chi2).sqrt();
            let lo = (zeta - b).ceil();
            let hi = (zeta + b).floor();
            let range = if lo > hi {
                violated[i] = true;
                let r = zeta.round() as i64;
                r..=r
            } else {
                lo as i64..=hi as i64
            };
            if range.start() == range.end() {
                resolved_local.push(j);
                resolved_values.push(*range.start());
            }
            sets[i] = range;
        }
        diagnostics
            .resolved_per_iteration
            .push(resolved_local.len());
        debug!(
            "screening iteration {}: {} of {} remaining coordinates resolved",
            diagnostics.iterations,
            resolved_local.len(),
            remaining.len()
        );
        if resolved_local.is_empty() {
            break;
        }
        if resolved_local.len() < remaining.len() {
            belief = belief.condition(&resolved_local, &resolved_values)?;
        }
        let mut keep = vec![true; remaining.len()];
        for &j in &resolved_local {
            keep[j] = false;
        }
        remaining = remaining
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(&i, _)| i)
            .collect();
    }

    diagnostics.confidence_violated = (0..ell).filter(|&i| violated[i]).collect();
    if !diagnostics.confidence_violated.is_empty() {
        info!(
            "empty confidence interval on {} coordinate(s); nearest integer used",
            diagnostics.confidence_violated.len()
        );
    }
    let set = HypothesisSet::new(sets, diagnostics);
    match set.cardinality() {
        Some(c) if c <= cap as u128 => Ok(set),
        _ => Err(Error::CapExceeded {
            cap,
            set: Box::new(set),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector, DMatrix, DVector};

    fn est(mean: DVector<f64>, cov: DMatrix<f64>) -> GammaEstimate {
        GammaEstimate::new(mean, cov, None)
    }

    #[test]
    fn single_coordinate_resolves() {
        let s = integer_screening(&est(dvector![1.02], dmatrix![4e-4]), 0.99, DEFAULT_CAP).unwrap();
        assert_eq!(s.per_coordinate(), &[1..=1]);
        assert_eq!(s.diagnostics.iterations, 1);
        assert_eq!(s.diagnostics.resolved_per_iteration, vec![1]);
    }

    #[test]
    fn ambiguous_coordinate() {
        let s = integer_screening(&est(dvector![0.5], dmatrix![0.16]), 0.9, DEFAULT_CAP).unwrap();
        assert_eq!(s.per_coordinate(), &[0..=1]);
        assert_eq!(s.cardinality(), Some(2));
        assert_eq!(s.diagnostics.iterations, 1);
        assert_eq!(s.diagnostics.resolved_per_iteration, vec![0]);
    }

    #[test]
    fn conditioning_resolves_second_coordinate() {
        let e = est(dvector![0.02, 0.4], dmatrix![0.01, 0.0475; 0.0475, 0.25]);
        let s = integer_screening(&e, 0.95, DEFAULT_CAP).unwrap();
        assert_eq!(s.per_coordinate(), &[0..=0, 0..=0]);
        assert_eq!(s.diagnostics.iterations, 2);
        assert_eq!(s.diagnostics.resolved_per_iteration, vec![1, 1]);
        assert!(s.diagnostics.confidence_violated.is_empty());
    }

    #[test]
    fn conditioning_example_matches_joint_enumeration() {
        // joint density restricted to integer-free second coordinate given γ₁ = 0:
        // interval of the conditional at η = √0.95 contains only 0
        let eta: f64 = 0.95f64.sqrt();
        let b = (0.024375 * chi2_quantile_1dof(eta).unwrap()).sqrt();
        assert!(0.305 - b > -1.0 && 0.305 - b <= 0.0 && 0.305 + b < 1.0);
    }

    #[test]
    fn empty_interval_falls_back() {
        let s = integer_screening(
            &est(dvector![0.5, 0.3], dmatrix![1e-6, 0.0; 0.0, 1e-6]),
            0.99,
            10,
        )
        .unwrap();
        assert_eq!(s.per_coordinate(), &[1..=1, 0..=0]);
        assert_eq!(s.diagnostics.confidence_violated, vec![0, 1]);
    }

    #[test]
    fn cap_exceeded_keeps_set() {
        let e = est(dvector![0.5, 0.5, 0.5], DMatrix::identity(3, 3) * 4.0);
        match integer_screening(&e, 0.99, 8) {
            Err(Error::CapExceeded { cap, set }) => {
                assert_eq!(cap, 8);
                assert!(set.cardinality().unwrap() > 8);
                assert!(set.contains(&[0, 1, 0]));
            }
            other => panic!("expected CapExceeded, got {other:?}"),
        }
    }

    #[test]
    fn empty_estimate() {
        let s = integer_screening(&est(DVector::zeros(0), DMatrix::zeros(0, 0)), 0.99, 1).unwrap();
        assert_eq!(s.cardinality(), Some(1));
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![Vec::<i64>::new()]);
        assert_eq!(s.diagnostics.iterations, 0);
    }

    #[test]
    fn product_iteration_is_lexicographic() {
        let s = HypothesisSet::new(
            vec![0..=1, 3..=3, -1..=0],
            ScreeningDiagnostics {
                iterations: 1,
                resolved_per_iteration: vec![1],
                alpha: 0.9,
                basis_kind: None,
                confidence_violated: vec![],
            },
        );
        let all: Vec<_> = s.iter().collect();
        assert_eq!(
            all,
            vec![vec![0, 3, -1], vec![0, 3, 0], vec![1, 3, -1], vec![1, 3, 0]]
        );
        assert_eq!(s.cardinality(), Some(4));
        assert!((s.log10_cardinality() - 4f64.log10()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_alpha() {
        let e = est(dvector![0.0], dmatrix![1.0]);
        assert!(integer_screening(&e, 1.0, 4).is_err());
        assert!(integer_screening(&e, 0.0, 4).is_err());
    }
}
