//! `mole2d` command line.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;

use super::{
    bootstrapped, format_report, parse, write_g2o, write_truth, Format, PoseGraph2D, PositionMode,
    Report,
};
use crate::angles::{split_large_variance_edges, DEFAULT_SPLIT_THRESHOLD};
use crate::cycles::{cycle_basis, BasisKind, CycleBasisMatrix};
use crate::estimator::{
    gamma_estimator, hypothesis_order, integer_screening, GammaEstimate, HypothesisSet,
    HypothesisSolver, OrientationHypothesis, DEFAULT_ALPHA, DEFAULT_CAP,
};
use crate::graph::PoseGraph;
use crate::oracle::suites::{run_suite, SuiteOptions};
use crate::synth::{Family, GridWalkParams, NoiseMode, SynthConfig};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "mole2d",
    version,
    about = "Multi-hypothesis orientation initialization for 2D pose graphs"
)]
pub struct Cli {
    /// Worker threads; 0 uses one per core.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Screen orientation hypotheses and write one bootstrapped file per hypothesis.
    Estimate(EstimateArgs),
    /// Write the best hypothesis as a single initialized pose graph.
    Bootstrap(BootstrapArgs),
    /// Generate a synthetic pose graph with a ground-truth sidecar.
    Synth {
        #[command(subcommand)]
        family: SynthCommand,
    },
    /// Run acceptance checks.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Input pose graph.
    #[arg(long)]
    pub input: PathBuf,
    /// Input format; inferred from the extension when omitted (`.graph` is TORO).
    #[arg(long)]
    pub format: Option<Format>,
    #[arg(long, default_value_t = BasisKind::Mcb)]
    pub basis: BasisKind,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = DEFAULT_CAP)]
    pub max_hypotheses: usize,
    /// Split edges whose 3σ exceeds this many radians into serial sub-edges.
    #[arg(long, default_value_t = DEFAULT_SPLIT_THRESHOLD)]
    pub split_threshold: f64,
    #[arg(long)]
    pub no_split: bool,
    #[arg(long, default_value = "linear")]
    pub positions: PositionMode,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub solve: SolveArgs,
    /// Output prefix; defaults to the input path without its extension.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    #[command(flatten)]
    pub solve: SolveArgs,
    /// Output g2o file.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// A closed polygon with one loop.
    Circle {
        #[arg(long, default_value_t = 18)]
        steps: usize,
        /// Orientation noise in radians: the fixed offset or the standard deviation.
        #[arg(long = "noise", alias = "sigma", default_value_t = 0.2)]
        sigma: f64,
        #[arg(long = "mode", default_value = "fixed")]
        noise_mode: NoiseMode,
        #[command(flatten)]
        common: SynthCommon,
    },
    /// A random walk on a grid with loop closures.
    Grid {
        #[arg(long, default_value_t = 10)]
        rows: usize,
        #[arg(long, default_value_t = 10)]
        cols: usize,
        /// Number of moves; defaults to twice the number of cells.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value_t = 0.3)]
        chord_prob: f64,
        #[arg(long)]
        max_chords: Option<usize>,
        #[arg(long = "noise", alias = "sigma", default_value_t = 0.1)]
        sigma: f64,
        #[arg(long = "mode", default_value = "gaussian")]
        noise_mode: NoiseMode,
        #[command(flatten)]
        common: SynthCommon,
    },
}

#[derive(Debug, Args)]
pub struct SynthCommon {
    /// Extra wrapped-Gaussian noise added to every measurement after generation.
    #[arg(long, default_value_t = 0.0)]
    pub extra_sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Position information written on every edge.
    #[arg(long, default_value_t = 100.0)]
    pub position_information: f64,
    /// Output prefix; writes `<prefix>.g2o` and `<prefix>.truth.txt`.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// identity, oracle, coverage, optimality, distribution, counterexample,
    /// wraparound, scale, realdata, wrapped or all.
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Parses arguments, runs the command and returns the process exit code:
/// 0 on success, 2 when the hypothesis cap is exceeded, 1 on other errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(code) => code,
        Err(e @ Error::CapExceeded { .. }) => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Estimate(args) => estimate(args),
        Command::Bootstrap(args) => bootstrap(args),
        Command::Synth { family } => synth(family),
        Command::Verify(args) => verify(args),
    }
}

fn infer_format(path: &Path) -> Format {
    match path.extension().and_then(|e| e.to_str()) {
        Some("graph") | Some("toro") => Format::Toro,
        _ => Format::G2o,
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    info!("wrote {}", path.display());
    Ok(())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

struct Pipeline {
    input: PoseGraph2D,
    graph: PoseGraph,
    basis: CycleBasisMatrix,
    estimate: GammaEstimate,
}

type Screening = std::result::Result<HypothesisSet, Error>;

impl Pipeline {
    fn load(args: &SolveArgs) -> Result<(Self, Screening)> {
        let text = fs::read_to_string(&args.input)?;
        let input = parse(
            &text,
            args.format.unwrap_or_else(|| infer_format(&args.input)),
        )?;
        let graph = if args.no_split {
            input.orientation.clone()
        } else {
            split_large_variance_edges(&input.orientation, args.split_threshold)?
        };
        let basis = cycle_basis(&graph, args.basis)?;
        let estimate = gamma_estimator(&graph, &basis);
        let screening = match integer_screening(&estimate, args.alpha, args.max_hypotheses) {
            Ok(set) => Ok(set),
            Err(e @ Error::CapExceeded { .. }) => Err(e),
            Err(e) => return Err(e),
        };
        Ok((
            Self {
                input,
                graph,
                basis,
                estimate,
            },
            screening,
        ))
    }

    fn hypotheses(&self, set: &HypothesisSet) -> Result<Vec<OrientationHypothesis>> {
        use rayon::prelude::*;
        let solver = HypothesisSolver::new(&self.graph, &self.basis)?;
        let candidates: Vec<Vec<i64>> = set.iter().collect();
        let mut hyps = candidates
            .par_iter()
            .map(|g| solver.hypothesis(g))
            .collect::<Result<Vec<_>>>()?;
        hyps.sort_by(hypothesis_order);
        Ok(hyps)
    }

    /// Orientations of the original (unsplit) nodes.
    fn original_theta<'h>(&self, h: &'h OrientationHypothesis) -> &'h [f64] {
        &h.theta_wrapped[..self.input.orientation.free_nodes()]
    }

    fn report(
        &self,
        input: &Path,
        status: &str,
        set: &HypothesisSet,
        hyps: &[OrientationHypothesis],
        outputs: &[String],
    ) -> String {
        format_report(&Report {
            input: &input.display().to_string(),
            status,
            graph: &self.graph,
            basis: &self.basis,
            estimate: &self.estimate,
            screening: set,
            hypotheses: hyps,
            outputs,
        })
    }
}

fn estimate(args: EstimateArgs) -> Result<i32> {
    let (pipeline, screening) = Pipeline::load(&args.solve)?;
    let prefix = args
        .output
        .clone()
        .unwrap_or_else(|| args.solve.input.with_extension(""));
    let report_path = with_suffix(&prefix, ".report.txt");
    match screening {
        Err(Error::CapExceeded { cap, set }) => {
            let text = pipeline.report(&args.solve.input, "cap_exceeded", &set, &[], &[]);
            write_file(&report_path, &text)?;
            Err(Error::CapExceeded { cap, set })
        }
        Err(e) => Err(e),
        Ok(set) => {
            let hyps = pipeline.hypotheses(&set)?;
            let mut outputs = Vec::with_capacity(hyps.len());
            for (rank, h) in hyps.iter().enumerate() {
                let path = with_suffix(&prefix, &format!(".hyp{rank}.g2o"));
                let out = bootstrapped(
                    &pipeline.input,
                    pipeline.original_theta(h),
                    args.solve.positions,
                )?;
                write_file(&path, &write_g2o(&out))?;
                outputs.push(path.display().to_string());
            }
            write_file(
                &report_path,
                &pipeline.report(&args.solve.input, "ok", &set, &hyps, &outputs),
            )?;
            println!(
                "{} hypotheses; report in {}",
                hyps.len(),
                report_path.display()
            );
            Ok(0)
        }
    }
}

fn bootstrap(args: BootstrapArgs) -> Result<i32> {
    let (pipeline, screening) = Pipeline::load(&args.solve)?;
    let hyps = pipeline.hypotheses(&screening?)?;
    let best = &hyps[0];
    let out = bootstrapped(
        &pipeline.input,
        pipeline.original_theta(best),
        args.solve.positions,
    )?;
    write_file(&args.output, &write_g2o(&out))?;
    println!(
        "best of {} hypotheses, cost {}; wrote {}",
        hyps.len(),
        best.cost,
        args.output.display()
    );
    Ok(0)
}

fn synth(command: SynthCommand) -> Result<i32> {
    let (family, sigma, noise_mode, common) = match command {
        SynthCommand::Circle {
            steps,
            sigma,
            noise_mode,
            common,
        } => (Family::Circle { steps }, sigma, noise_mode, common),
        SynthCommand::Grid {
            rows,
            cols,
            steps,
            chord_prob,
            max_chords,
            sigma,
            noise_mode,
            common,
        } => {
            let mut params = GridWalkParams::new(rows, cols, chord_prob, sigma);
            params.steps = steps.unwrap_or(params.steps);
            params.max_chords = max_chords;
            (Family::GridWalk(params), sigma, noise_mode, common)
        }
    };
    let instance = SynthConfig {
        family,
        sigma_theta: sigma,
        extra_sigma: common.extra_sigma,
        seed: common.seed,
        noise_mode,
    }
    .generate()?;
    let g2 = PoseGraph2D::from_instance(&instance, common.position_information)?;
    let basis = cycle_basis(&instance.graph, BasisKind::Mcb)?;
    write_file(&with_suffix(&common.output, ".g2o"), &write_g2o(&g2))?;
    write_file(
        &with_suffix(&common.output, ".truth.txt"),
        &write_truth(&instance, &basis),
    )?;
    println!(
        "{} nodes, {} edges, cyclomatic number {}",
        instance.graph.node_count(),
        instance.graph.edge_count(),
        instance.graph.cyclomatic_number()
    );
    Ok(0)
}

fn verify(args: VerifyArgs) -> Result<i32> {
    let results = run_suite(
        &args.suite,
        &SuiteOptions {
            trials: args.trials,
            seed: args.seed,
        },
    )?;
    for r in &results {
        println!("{}", r.line());
    }
    Ok(
        if results.iter().any(|r| r.gating && !r.passed && !r.skipped) {
            1
        } else {
            0
        },
    )
}
