use std::f64::consts::{PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::true_gamma;
use crate::cycles::{cycle_basis, BasisKind};
use crate::estimator::{gamma_estimator, integer_screening};
use crate::synth::{NoiseMode, TrialGenerator};
use crate::{Error, Result};

/// Derives `count` per-trial seeds from a root seed.
pub fn trial_seeds(count: usize, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.random()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageConfig {
    pub generator: TrialGenerator,
    pub noise_mode: NoiseMode,
    pub basis: BasisKind,
    pub alpha: f64,
    pub trials: usize,
    pub seed: u64,
    pub cap: usize,
}

impl CoverageConfig {
    pub fn new(alpha: f64, trials: usize, seed: u64) -> Self {
        Self {
            generator: TrialGenerator::default(),
            noise_mode: NoiseMode::Gaussian,
            basis: BasisKind::Mcb,
            alpha,
            trials,
            seed,
            cap: crate::estimator::DEFAULT_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageResult {
    pub trials: usize,
    pub covered: usize,
    pub fraction: f64,
    /// Wilson score interval at 95%.
    pub interval: (f64, f64),
    pub cap_exceeded: usize,
    pub fallback_used: usize,
}

fn wilson(successes: usize, trials: usize) -> (f64, f64) {
    let z = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Fraction of random trials whose true cycle integers land in the screened
/// set. Trials run in parallel with per-trial seeds, so the result depends
/// only on the configuration.
pub fn monte_carlo_coverage(config: &CoverageConfig) -> Result<CoverageResult> {
    if config.trials < 100 {
        return Err(Error::InvalidArgument(format!(
            "need at least 100 trials, got {}",
            config.trials
        )));
    }
    let outcomes = trial_seeds(config.trials, config.seed)
        .into_par_iter()
        .map(|s| -> Result<(bool, bool, bool)> {
            let inst = config.generator.generate(config.noise_mode, s)?;
            let basis = cycle_basis(&inst.graph, config.basis)?;
            let truth = true_gamma(&inst, &basis);
            let estimate = gamma_estimator(&inst.graph, &basis);
            let (set, capped) = match integer_screening(&estimate, config.alpha, config.cap) {
                Ok(set) => (set, false),
                Err(Error::CapExceeded { set, .. }) => (*set, true),
                Err(e) => return Err(e),
            };
            let covered = set.contains(&truth);
            let fallback = !set.diagnostics.confidence_violated.is_empty();
            Ok((covered, capped, fallback))
        })
        .collect::<Result<Vec<_>>>()?;
    let covered = outcomes.iter().filter(|o| o.0).count();
    Ok(CoverageResult {
        trials: config.trials,
        covered,
        fraction: covered as f64 / config.trials as f64,
        interval: wilson(covered, config.trials),
        cap_exceeded: outcomes.iter().filter(|o| o.1).count(),
        fallback_used: outcomes.iter().filter(|o| o.2).count(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WraparoundCheck {
    pub empirical: f64,
    pub analytic: f64,
    /// Binomial standard error at the analytic probability.
    pub standard_error: f64,
}

impl WraparoundCheck {
    pub fn within(&self, standard_errors: f64) -> bool {
        (self.empirical - self.analytic).abs() <= standard_errors * self.standard_error
    }
}

/// Empirical vs analytic probability that a `N(0, σ²)` cycle error leaves
/// `[−π, π]`.
pub fn wraparound_probability_check(
    sigma_cycle: f64,
    trials: usize,
    seed: u64,
) -> Result<WraparoundCheck> {
    if !(sigma_cycle > 0.0 && sigma_cycle.is_finite()) {
        return Err(Error::OutOfRange {
            value: sigma_cycle,
            range: "(0, inf)",
        });
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let analytic = libm::erfc(PI / (sigma_cycle * SQRT_2));
    let normal = Normal::new(0.0, sigma_cycle).expect("validated sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hits = (0..trials)
        .filter(|_| normal.sample(&mut rng).abs() > PI)
        .count();
    Ok(WraparoundCheck {
        empirical: hits as f64 / trials as f64,
        analytic,
        standard_error: (analytic * (1.0 - analytic) / trials as f64).sqrt(),
    })
}
