use std::fmt::Write as _;

use crate::cycles::{BasisKind, CycleBasisMatrix};
use crate::estimator::{GammaEstimate, HypothesisSet, OrientationHypothesis};
use crate::graph::PoseGraph;
use crate::oracle::{true_gamma, GroundTruthInstance};
use crate::{Error, Result};

/// Coordinates whose candidate range is at most this wide are listed in full.
const LISTED_RANGE: i64 = 16;

/// Everything that goes into a run report.
#[derive(Debug, Clone, Copy)]
pub struct Report<'a> {
    pub input: &'a str,
    pub status: &'a str,
    pub graph: &'a PoseGraph,
    pub basis: &'a CycleBasisMatrix,
    pub estimate: &'a GammaEstimate,
    pub screening: &'a HypothesisSet,
    pub hypotheses: &'a [OrientationHypothesis],
    pub outputs: &'a [String],
}

fn join<T: ToString>(values: impl IntoIterator<Item = T>) -> String {
    values
        .into_iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Renders `key value` lines, one `gamma_set_<i>` line per coordinate, one
/// block per hypothesis and a trailing CSV of per-iteration progress.
pub fn format_report(report: &Report<'_>) -> String {
    let mut out = String::new();
    let mut kv =
        |key: &str, value: String| writeln!(out, "{key} {value}").expect("write to string");
    let graph = report.graph;
    let set = report.screening;
    let diag = &set.diagnostics;
    kv("input", report.input.to_string());
    kv("status", report.status.to_string());
    kv("basis", report.basis.kind().to_string());
    kv("alpha", diag.alpha.to_string());
    kv("nodes", graph.node_count().to_string());
    kv("edges", graph.edge_count().to_string());
    kv("cyclomatic_number", graph.cyclomatic_number().to_string());
    kv(
        "basis_weight",
        report.basis.weight(graph.variances()).to_string(),
    );
    kv("trace_p_gamma", report.estimate.trace().to_string());
    kv("iterations", diag.iterations.to_string());
    kv(
        "hypotheses",
        set.cardinality()
            .map_or_else(|| "overflow".to_string(), |c| c.to_string()),
    );
    kv(
        "log10_hypotheses",
        format!("{:.6}", set.log10_cardinality()),
    );
    kv(
        "confidence_violated",
        if diag.confidence_violated.is_empty() {
            "none".to_string()
        } else {
            join(&diag.confidence_violated)
        },
    );
    for (i, range) in set.per_coordinate().iter().enumerate() {
        let value = if range.end() - range.start() < LISTED_RANGE {
            join(range.clone())
        } else {
            format!("{}..={}", range.start(), range.end())
        };
        kv(&format!("gamma_set_{i}"), value);
    }
    for (rank, h) in report.hypotheses.iter().enumerate() {
        kv(&format!("hypothesis_{rank}_gamma"), join(&h.gamma));
        kv(&format!("hypothesis_{rank}_cost"), h.cost.to_string());
        if let Some(path) = report.outputs.get(rank) {
            kv(&format!("hypothesis_{rank}_file"), path.clone());
        }
    }
    writeln!(out, "iteration,resolved,resolved_percent").expect("write to string");
    let percent = diag.resolved_percent(set.ell());
    for (k, (count, pct)) in diag.resolved_per_iteration.iter().zip(percent).enumerate() {
        writeln!(out, "{},{count},{pct:.3}", k + 1).expect("write to string");
    }
    out
}

/// Ground truth written next to a synthetic graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub basis: BasisKind,
    /// `(vertex id, θ°)` for every vertex, node 0 included.
    pub theta: Vec<(i64, f64)>,
    pub gamma: Vec<i64>,
}

pub fn write_truth(instance: &GroundTruthInstance, basis: &CycleBasisMatrix) -> String {
    let mut out = String::new();
    writeln!(out, "# basis {}", basis.kind()).expect("write to string");
    writeln!(out, "TRUTH_THETA 0 0").expect("write to string");
    for (i, t) in instance.theta_true.iter().enumerate() {
        writeln!(out, "TRUTH_THETA {} {t}", i + 1).expect("write to string");
    }
    writeln!(out, "TRUTH_GAMMA {}", join(true_gamma(instance, basis))).expect("write to string");
    out.replace(" \n", "\n")
}

pub fn parse_truth(text: &str) -> Result<Truth> {
    let mut basis = None;
    let mut theta = Vec::new();
    let mut gamma = None;
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let bad = |message: String| Error::MalformedLine { line, message };
        let mut tokens = raw.split_whitespace();
        match tokens.next() {
            None => {}
            Some("#") => {
                if tokens.next() == Some("basis") {
                    let kind = tokens
                        .next()
                        .ok_or_else(|| bad("missing basis kind".into()))?;
                    basis = Some(
                        kind.parse()
                            .map_err(|_| bad(format!("unknown basis {kind:?}")))?,
                    );
                }
            }
            Some("TRUTH_THETA") => {
                let id = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| bad("bad vertex id".into()))?;
                let value = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| bad("bad angle".into()))?;
                theta.push((id, value));
            }
            Some("TRUTH_GAMMA") => {
                let values = tokens
                    .map(|t| t.parse().map_err(|_| bad(format!("bad integer {t:?}"))))
                    .collect::<Result<Vec<i64>>>()?;
                gamma = Some(values);
            }
            Some(other) => return Err(bad(format!("unknown record {other}"))),
        }
    }
    Ok(Truth {
        basis: basis
            .ok_or_else(|| Error::InvalidArgument("truth file has no basis line".into()))?,
        theta,
        gamma: gamma
            .ok_or_else(|| Error::InvalidArgument("truth file has no TRUTH_GAMMA line".into()))?,
    })
}
