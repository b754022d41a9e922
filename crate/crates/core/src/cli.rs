// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line front end.
//!
//! Exit status: 0 on success, 2 for invalid input or arguments, 3 when the
//! estimator itself degenerates (`degenerate_penalty`, `all_invalid`,
//! `zero_vector`). Failures print an error document to stderr.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use misscusum::campaign::{
    fit_slopes, run_campaign, slopes_to_csv, threads_from_env, to_csv, CampaignCell, Preset,
    SlopeMetric,
};
use misscusum::detect::{DetectConfig, LambdaRule, SplitLambdaLength, Variant};
use misscusum::io::{read_csv, write_csv_to, CsvOptions, HeaderMode};
use misscusum::projection::SolverConfig;
use misscusum::report::{root_stop, DetectionReport, ErrorReport, Labels, RunInfo, SCHEMA};
use misscusum::segment::{binary_segmentation, SegmentationConfig, SigmaMode, StopReason};
use misscusum::sigma::resolve_sigma;
use misscusum::simulation::{
    simulate, theta_vector, weighted_norm, ModelSpec, RateSpec, ThetaShape,
};
use misscusum::Error;

#[derive(Debug, Parser)]
#[command(
    name = "misscusum",
    version,
    about = "Sparse changepoint estimation with missing data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate changepoints in a CSV matrix and print a JSON report.
    Detect(DetectArgs),
    /// Draw a matrix from the single-changepoint model.
    Simulate(SimulateArgs),
    /// Run a Monte Carlo campaign and print one CSV row per grid cell.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    Full,
    Split,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum HeaderArg {
    Auto,
    Yes,
    No,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ShapeArg {
    Flat,
    Harmonic,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PresetArg {
    Fig1,
    Fig2,
    Fig3,
    Table1,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Input CSV: one row per coordinate, one column per time point.
    pub input: PathBuf,
    /// Multiplier of the penalty `sigma * sqrt(n log(p n))`.
    #[arg(long, default_value_t = 0.5)]
    pub lambda_scale: f64,
    /// Noise standard deviation; estimated from the data when omitted.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, value_enum, default_value = "full")]
    pub variant: VariantArg,
    /// Compute the split estimator's penalty from `n` instead of `n / 2`.
    #[arg(long)]
    pub split_lambda_full_length: bool,
    /// Maximum number of changepoints; 0 means no limit (needs --threshold).
    #[arg(long, default_value_t = 1)]
    pub max_changepoints: usize,
    /// Segments shorter than twice this are not searched.
    #[arg(long, default_value_t = 10)]
    pub min_segment: usize,
    /// Stop a branch when its projected peak is below this value.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Re-estimate sigma on every segment.
    #[arg(long)]
    pub sigma_per_segment: bool,
    /// Recorded in the report; no current code path is randomised.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Rows of the file are time points.
    #[arg(long)]
    pub transpose: bool,
    #[arg(long, value_enum, default_value = "auto")]
    pub header: HeaderArg,
    /// The first column holds row labels.
    #[arg(long)]
    pub index_col: bool,
    #[arg(long, default_value_t = SolverConfig::default().max_iter)]
    pub max_iter: usize,
    #[arg(long, default_value_t = SolverConfig::default().tol)]
    pub tol: f64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Include wall-clock time in the report.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    /// Last pre-change time point, 1-based.
    #[arg(long)]
    pub z: usize,
    /// Number of coordinates that change.
    #[arg(long)]
    pub k: usize,
    /// Euclidean norm of the mean change.
    #[arg(long)]
    pub vartheta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Observation probability of every row.
    #[arg(long, default_value_t = 1.0, conflicts_with = "beta_nu")]
    pub q: f64,
    /// Draw row rates from Beta(10 nu, 10 (1 - nu)) instead.
    #[arg(long)]
    pub beta_nu: Option<f64>,
    #[arg(long, value_enum, default_value = "flat")]
    pub theta_shape: ShapeArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Data CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file with the true parameters.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(
        long,
        value_enum,
        conflicts_with = "grid",
        required_unless_present = "grid"
    )]
    pub preset: Option<PresetArg>,
    /// JSON array of grid cells.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub base_seed: u64,
    /// Result table; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also fit log-log error slopes against the weighted norm and write them
    /// here.
    #[arg(long)]
    pub slopes: Option<PathBuf>,
}

/// How a command failed.
#[derive(Debug)]
pub enum Failure {
    Validation(ErrorReport),
    Algorithmic(ErrorReport),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let report = ErrorReport::from_error(&e);
        if e.is_algorithmic() {
            Failure::Algorithmic(report)
        } else {
            Failure::Validation(report)
        }
    }
}

pub fn run(cli: Cli) -> ExitCode {
    let outcome = match cli.command {
        Command::Detect(a) => detect(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Benchmark(a) => benchmark(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (report, code) = match f {
                Failure::Validation(r) => (r, 2),
                Failure::Algorithmic(r) => (r, 3),
            };
            let _ = std::io::stderr().write_all(report.to_json().as_bytes());
            ExitCode::from(code)
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())).into()),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::from(e).into()),
    }
}

fn detect(a: DetectArgs) -> Result<(), Failure> {
    let start = Instant::now();
    let options = CsvOptions {
        transpose: a.transpose,
        header: match a.header {
            HeaderArg::Auto => HeaderMode::Auto,
            HeaderArg::Yes => HeaderMode::Present,
            HeaderArg::No => HeaderMode::Absent,
        },
        index_col: a.index_col,
    };
    let data = read_csv(&a.input, &options)?;
    let m = &data.matrix;
    if !(a.lambda_scale > 0.0 && a.lambda_scale.is_finite()) {
        return Err(Failure::Validation(ErrorReport::validation(format!(
            "--lambda-scale must be positive, got {}",
            a.lambda_scale
        ))));
    }
    let (sigma, sigma_source) = resolve_sigma(m, a.sigma)?;
    let variant = match a.variant {
        VariantArg::Full => Variant::FullData,
        VariantArg::Split => Variant::SampleSplit,
    };
    let detect = DetectConfig {
        variant,
        lambda: LambdaRule {
            scale: a.lambda_scale,
            split_length: if a.split_lambda_full_length {
                SplitLambdaLength::Full
            } else {
                SplitLambdaLength::Half
            },
        },
        solver: SolverConfig {
            max_iter: a.max_iter,
            tol: a.tol,
        },
    };
    let lambda_used = detect.lambda.lambda(m.n(), m.p(), sigma, variant)?;
    let config = SegmentationConfig {
        detect,
        max_changepoints: (a.max_changepoints > 0).then_some(a.max_changepoints),
        min_segment: a.min_segment,
        threshold: a.threshold,
        sigma_mode: if a.sigma_per_segment {
            SigmaMode::PerSegment
        } else {
            SigmaMode::Global
        },
    };
    let result = binary_segmentation(m, sigma, &config)?;
    if let Some(StopReason::Failed(e)) = root_stop(&result) {
        return Err(e.clone().into());
    }
    let run = RunInfo {
        variant: variant.as_str(),
        lambda_scale: a.lambda_scale,
        lambda_used,
        sigma,
        sigma_source,
        seed: a.seed,
    };
    let labels = Labels {
        time: data.time_labels.as_deref(),
        coord: data.coord_labels.as_deref(),
    };
    let mut report = DetectionReport::new(m, run, &result, labels);
    if a.timing {
        report.timing_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    emit(a.out.as_deref(), &report.to_json())
}

#[derive(Serialize)]
struct Truth<'a> {
    schema: &'static str,
    n: usize,
    p: usize,
    z: usize,
    k: usize,
    vartheta: f64,
    theta_shape: ThetaShape,
    sigma: f64,
    seed: u64,
    rates: &'a RateSpec,
    weighted_norm: f64,
    theta: &'a [f64],
    q: &'a [f64],
}

fn simulate_cmd(a: SimulateArgs) -> Result<(), Failure> {
    let shape = match a.theta_shape {
        ShapeArg::Flat => ThetaShape::Flat,
        ShapeArg::Harmonic => ThetaShape::Harmonic,
    };
    let theta = theta_vector(shape, a.p, a.k, a.vartheta)?;
    let rates = match a.beta_nu {
        Some(nu) => RateSpec::Beta { nu },
        None => RateSpec::Constant { q: a.q },
    };
    let q = rates.realize(&theta, a.seed)?;
    let spec = ModelSpec::new(a.n, a.z, theta, a.sigma, q, a.seed);
    let m = simulate(&spec)?;

    if let Some(path) = &a.truth {
        let truth = Truth {
            schema: SCHEMA,
            n: spec.n,
            p: spec.p,
            z: spec.z,
            k: a.k,
            vartheta: a.vartheta,
            theta_shape: shape,
            sigma: spec.sigma,
            seed: spec.seed,
            rates: &rates,
            weighted_norm: weighted_norm(&spec.theta, &spec.q)?,
            theta: &spec.theta,
            q: &spec.q,
        };
        let mut text = serde_json::to_string_pretty(&truth).expect("truth serialises");
        text.push('\n');
        emit(Some(path), &text)?;
    }
    let mut buf = Vec::new();
    write_csv_to(&mut buf, &m, None)?;
    emit(
        a.out.as_deref(),
        std::str::from_utf8(&buf).expect("csv is utf-8"),
    )
}

fn benchmark(a: BenchmarkArgs) -> Result<(), Failure> {
    let cells: Vec<CampaignCell> = match (&a.preset, &a.grid) {
        (Some(p), _) => match p {
            PresetArg::Fig1 => Preset::Fig1,
            PresetArg::Fig2 => Preset::Fig2,
            PresetArg::Fig3 => Preset::Fig3,
            PresetArg::Table1 => Preset::Table1,
        }
        .cells(),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: e.line(),
                message: e.to_string(),
            })?
        }
        (None, None) => unreachable!("clap requires --preset or --grid"),
    };
    let threads = threads_from_env()?;
    let result = run_campaign(&cells, a.reps, a.base_seed, threads)?;
    if let Some(path) = &a.slopes {
        let mut fits = fit_slopes(&result.summaries, SlopeMetric::LocationError, 3);
        fits.extend(fit_slopes(&result.summaries, SlopeMetric::SineAngle, 3));
        emit(Some(path), &slopes_to_csv(&fits))?;
    }
    emit(a.out.as_deref(), &to_csv(&result.summaries))
}
