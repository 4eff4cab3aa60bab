//! Multi-hypothesis orientation estimation for 2D pose graphs.
//!
//! Maximum-likelihood orientation estimation on the circle is reduced to an
//! integer problem on the cycle space of the graph. Instead of committing to
//! the single most likely integer vector, [`estimator::integer_screening`]
//! builds a product set of integer candidates that contains the true cycle
//! integers with a user-chosen confidence, and [`estimator::mole2d`] turns
//! every candidate into a closed-form orientation hypothesis.
//!
//! Module map:
//!
//! - [`graph`]: pose graph model, incidence matrices, spanning trees.
//! - [`cycles`]: fundamental and minimum cycle bases, integer pseudoinverse.
//! - [`angles`]: circular arithmetic and the wrapped Gaussian.
//! - [`linalg`]: Gaussian conditioning, quantiles, sparse SPD solves.
//! - [`estimator`]: γ estimator, screening, hypothesis recovery, MOLE2D.
//! - [`oracle`]: brute-force references and Monte Carlo verification suites.
//! - [`synth`]: seeded synthetic instance generators.
//! - [`io`]: g2o / TORO ingestion, bootstrapped export, CLI.

pub mod angles;
pub mod cycles;
pub mod error;
pub mod estimator;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod synth;

pub use error::{Error, Result};
