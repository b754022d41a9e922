// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seeded Monte Carlo campaigns over grids of simulation settings.
//!
//! Replicate `r` of cell `c` uses seed [`derive_seed`]`(base_seed, c, r)`;
//! given the base seed every number in the output is reproducible, whatever
//! the thread count.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::detect::{detect, DetectConfig, LambdaRule, SplitLambdaLength, Variant};
use crate::error::{Error, Result};
use crate::projection::SolverConfig;
use crate::sigma::resolve_sigma;
use crate::simulation::{
    angle_degrees, oracle_direction, simulate, sine_angle, theta_vector, weighted_norm, ModelSpec,
    RateSpec, ThetaShape,
};

/// Environment variable capping worker threads; 0 or unset means automatic.
pub const THREADS_ENV: &str = "MISSCUSUM_THREADS";

/// Thread count requested through [`THREADS_ENV`].
pub fn threads_from_env() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(s) if !s.trim().is_empty() => s.trim().parse().map_err(|_| {
            Error::invalid(format!(
                "{THREADS_ENV} must be a nonnegative integer, got {s:?}"
            ))
        }),
        _ => Ok(0),
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// SplitMix64 chain over `(base_seed, cell, replicate)`. For fixed base seed
/// and cell the map from replicate to seed is a bijection.
pub fn derive_seed(base_seed: u64, cell: usize, replicate: usize) -> u64 {
    let h = splitmix64(base_seed);
    let h = splitmix64(h ^ cell as u64);
    splitmix64(h ^ replicate as u64)
}

/// Noise scale handed to the penalty rule.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SigmaChoice {
    /// The simulation's true sigma.
    Known,
    /// Estimated from the data.
    Estimated,
    Fixed {
        value: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MethodConfig {
    pub variant: Variant,
    pub lambda_scale: f64,
    #[serde(default = "default_split_length")]
    pub split_length: SplitLambdaLength,
    #[serde(default = "default_sigma_choice")]
    pub sigma: SigmaChoice,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn default_split_length() -> SplitLambdaLength {
    SplitLambdaLength::Half
}

fn default_sigma_choice() -> SigmaChoice {
    SigmaChoice::Known
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            variant: Variant::FullData,
            lambda_scale: 0.5,
            split_length: SplitLambdaLength::Half,
            sigma: SigmaChoice::Known,
            solver: SolverConfig::default(),
        }
    }
}

impl MethodConfig {
    fn detect_config(&self) -> DetectConfig {
        DetectConfig {
            variant: self.variant,
            lambda: LambdaRule {
                scale: self.lambda_scale,
                split_length: self.split_length,
            },
            solver: self.solver,
        }
    }
}

/// One grid point.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CampaignCell {
    #[serde(default)]
    pub label: String,
    pub n: usize,
    pub p: usize,
    pub z: usize,
    pub k: usize,
    pub vartheta: f64,
    pub theta_shape: ThetaShape,
    pub sigma: f64,
    pub rates: RateSpec,
    #[serde(default)]
    pub method: MethodConfig,
}

/// Result of one replicate; `error` is set when the estimator failed.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub seed: u64,
    pub z_hat: Option<usize>,
    pub abs_error: Option<f64>,
    pub sine: Option<f64>,
    pub angle_deg: Option<f64>,
    pub weighted_norm: f64,
    pub error: Option<String>,
}

/// Mean, median and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
}

impl Summary {
    /// Values are sorted before reduction so the result does not depend on the
    /// order replicates finished in. Empty input gives NaN; a single value has
    /// sd 0.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                mean: f64::NAN,
                median: f64::NAN,
                sd: f64::NAN,
            };
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let len = v.len() as f64;
        let mean = v.iter().sum::<f64>() / len;
        let mid = v.len() / 2;
        let median = if v.len() % 2 == 1 {
            v[mid]
        } else {
            0.5 * (v[mid - 1] + v[mid])
        };
        let sd = if v.len() > 1 {
            (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (len - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, median, sd }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub cell: CampaignCell,
    pub reps: usize,
    pub failures: usize,
    /// Mean over replicates of the realised weighted norm.
    pub weighted_norm: f64,
    pub angle_deg: Summary,
    pub sine: Summary,
    pub abs_error: Summary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub summaries: Vec<CellSummary>,
    /// `outcomes[c][r]` is replicate `r` of cell `c`.
    pub outcomes: Vec<Vec<ReplicateOutcome>>,
}

/// Simulates one replicate and scores the configured estimator on it.
pub fn run_replicate(cell: &CampaignCell, seed: u64) -> Result<ReplicateOutcome> {
    let theta = theta_vector(cell.theta_shape, cell.p, cell.k, cell.vartheta)?;
    let q = cell.rates.realize(&theta, seed)?;
    let wnorm = weighted_norm(&theta, &q)?;
    let oracle = oracle_direction(&theta, &q)?;
    let spec = ModelSpec::new(cell.n, cell.z, theta, cell.sigma, q, seed);
    let data = simulate(&spec)?;

    let sigma = match cell.method.sigma {
        SigmaChoice::Known => cell.sigma,
        SigmaChoice::Estimated => resolve_sigma(&data, None)?.0,
        SigmaChoice::Fixed { value } => value,
    };
    match detect(&data, sigma, &cell.method.detect_config()) {
        Ok(est) => {
            let sine = sine_angle(&est.projection.v_hat, &oracle)?;
            let angle = angle_degrees(&est.projection.v_hat, &oracle)?;
            Ok(ReplicateOutcome {
                seed,
                z_hat: Some(est.z_hat),
                abs_error: Some(est.z_hat.abs_diff(cell.z) as f64),
                sine: Some(sine),
                angle_deg: Some(angle),
                weighted_norm: wnorm,
                error: None,
            })
        }
        Err(e) if e.is_algorithmic() => Ok(ReplicateOutcome {
            seed,
            z_hat: None,
            abs_error: None,
            sine: None,
            angle_deg: None,
            weighted_norm: wnorm,
            error: Some(e.code().to_string()),
        }),
        Err(e) => Err(e),
    }
}

fn run_replicate_recorded(cell: &CampaignCell, seed: u64) -> ReplicateOutcome {
    run_replicate(cell, seed).unwrap_or_else(|e| ReplicateOutcome {
        seed,
        z_hat: None,
        abs_error: None,
        sine: None,
        angle_deg: None,
        weighted_norm: f64::NAN,
        error: Some(e.code().to_string()),
    })
}

fn summarise(cell: &CampaignCell, outcomes: &[ReplicateOutcome]) -> CellSummary {
    let collect = |f: fn(&ReplicateOutcome) -> Option<f64>| -> Vec<f64> {
        outcomes.iter().filter_map(f).collect()
    };
    let norms: Vec<f64> = outcomes
        .iter()
        .map(|o| o.weighted_norm)
        .filter(|x| x.is_finite())
        .collect();
    CellSummary {
        cell: cell.clone(),
        reps: outcomes.len(),
        failures: outcomes.iter().filter(|o| o.error.is_some()).count(),
        weighted_norm: Summary::of(&norms).mean,
        angle_deg: Summary::of(&collect(|o| o.angle_deg)),
        sine: Summary::of(&collect(|o| o.sine)),
        abs_error: Summary::of(&collect(|o| o.abs_error)),
    }
}

/// Runs every cell `reps` times on `threads` workers (0 = automatic).
///
/// Replicate failures are counted in the summary rather than aborting.
pub fn run_campaign(
    cells: &[CampaignCell],
    reps: usize,
    base_seed: u64,
    threads: usize,
) -> Result<CampaignResult> {
    if reps == 0 {
        return Err(Error::invalid("reps must be at least 1"));
    }
    if cells.is_empty() {
        return Err(Error::invalid("campaign has no cells"));
    }
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..reps).map(move |r| (c, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let flat: Vec<ReplicateOutcome> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, r)| run_replicate_recorded(&cells[c], derive_seed(base_seed, c, r)))
            .collect()
    });
    let outcomes: Vec<Vec<ReplicateOutcome>> = flat.chunks(reps).map(|c| c.to_vec()).collect();
    let summaries = cells
        .iter()
        .zip(&outcomes)
        .map(|(cell, o)| summarise(cell, o))
        .collect();
    Ok(CampaignResult {
        summaries,
        outcomes,
    })
}

pub const CSV_HEADER: &str = "cell,label,n,p,z,k,vartheta,sigma,theta_shape,rates,lambda_scale,variant,reps,failures,weighted_norm,mean_angle_deg,median_angle_deg,sd_angle_deg,mean_sine,median_sine,sd_sine,mean_abs_err,median_abs_err,sd_abs_err";

/// One row per cell. Floats use Rust's shortest round-trip formatting.
pub fn to_csv(summaries: &[CellSummary]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for (i, s) in summaries.iter().enumerate() {
        let c = &s.cell;
        let _ = writeln!(
            out,
            "{i},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            csv_field(&c.label),
            c.n,
            c.p,
            c.z,
            c.k,
            c.vartheta,
            c.sigma,
            c.theta_shape.as_str(),
            csv_field(&c.rates.describe()),
            c.method.lambda_scale,
            c.method.variant.as_str(),
            s.reps,
            s.failures,
            s.weighted_norm,
            s.angle_deg.mean,
            s.angle_deg.median,
            s.angle_deg.sd,
            s.sine.mean,
            s.sine.median,
            s.sine.sd,
            s.abs_error.mean,
            s.abs_error.median,
            s.abs_error.sd,
        );
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Named grids reproducing the published simulation studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Single illustrative setting: n=250, p=100, z=100, k=10.
    Fig1,
    /// Penalty-scale sweep, n=1000, p=500, z=400.
    Fig2,
    /// Error scaling in the weighted norm, n=1200, p=1000, z=400, k=3.
    Fig3,
    /// Beta-distributed rates, n=1200, p=2000, z=400.
    Table1,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" => Ok(Preset::Fig1),
            "fig2" => Ok(Preset::Fig2),
            "fig3" => Ok(Preset::Fig3),
            "table1" => Ok(Preset::Table1),
            other => Err(Error::invalid(format!(
                "unknown preset {other:?}; expected fig1, fig2, fig3 or table1"
            ))),
        }
    }
}

/// Penalty scales swept by the fig2 preset.
pub const FIG2_SCALES: [f64; 5] = [0.1, 0.25, 0.5, 1.0, 2.0];

fn method(scale: f64) -> MethodConfig {
    MethodConfig {
        lambda_scale: scale,
        ..MethodConfig::default()
    }
}

pub fn fig1_cells() -> Vec<CampaignCell> {
    vec![CampaignCell {
        label: "fig1".into(),
        n: 250,
        p: 100,
        z: 100,
        k: 10,
        vartheta: 2.0,
        theta_shape: ThetaShape::Flat,
        sigma: 1.0,
        rates: RateSpec::Constant { q: 0.2 },
        method: MethodConfig::default(),
    }]
}

/// Left panel (q = 0.2, varying k and vartheta) then right panel (k = 3,
/// vartheta = 2, varying signal and noise rates), each at every scale.
pub fn fig2_cells() -> Vec<CampaignCell> {
    let base = |label: String, k, vartheta, rates, scale| CampaignCell {
        label,
        n: 1000,
        p: 500,
        z: 400,
        k,
        vartheta,
        theta_shape: ThetaShape::Flat,
        sigma: 1.0,
        rates,
        method: method(scale),
    };
    let mut cells = Vec::new();
    for k in [3, 10, 50] {
        for vartheta in [1.0, 1.5, 2.0, 2.5, 3.0] {
            for scale in FIG2_SCALES {
                cells.push(base(
                    "fig2-left".into(),
                    k,
                    vartheta,
                    RateSpec::Constant { q: 0.2 },
                    scale,
                ));
            }
        }
    }
    let rates = [0.1, 0.2, 0.3, 0.4, 0.5];
    for signal in rates {
        for noise in rates {
            for scale in FIG2_SCALES {
                cells.push(base(
                    "fig2-right".into(),
                    3,
                    2.0,
                    RateSpec::SignalNoise { signal, noise },
                    scale,
                ));
            }
        }
    }
    cells
}

pub const FIG3_VARTHETAS: [f64; 3] = [0.5, 1.0, 2.0];
pub const FIG3_SIGMAS: [f64; 4] = [0.2, 0.4, 0.8, 1.6];
pub const FIG3_RATES: [f64; 4] = [0.1, 0.2, 0.4, 0.8];

pub fn fig3_cells() -> Vec<CampaignCell> {
    let mut cells = Vec::new();
    for vartheta in FIG3_VARTHETAS {
        for sigma in FIG3_SIGMAS {
            for q in FIG3_RATES {
                cells.push(CampaignCell {
                    label: "fig3".into(),
                    n: 1200,
                    p: 1000,
                    z: 400,
                    k: 3,
                    vartheta,
                    theta_shape: ThetaShape::Flat,
                    sigma,
                    rates: RateSpec::Constant { q },
                    method: MethodConfig::default(),
                });
            }
        }
    }
    cells
}

pub fn table1_cells() -> Vec<CampaignCell> {
    let mut cells = Vec::new();
    for nu in [0.1, 0.5] {
        for k in [3, 44, 2000] {
            for vartheta in [1.0, 2.0, 3.0] {
                cells.push(CampaignCell {
                    label: "table1".into(),
                    n: 1200,
                    p: 2000,
                    z: 400,
                    k,
                    vartheta,
                    theta_shape: ThetaShape::Harmonic,
                    sigma: 1.0,
                    rates: RateSpec::Beta { nu },
                    method: MethodConfig::default(),
                });
            }
        }
    }
    cells
}

impl Preset {
    pub fn cells(&self) -> Vec<CampaignCell> {
        match self {
            Preset::Fig1 => fig1_cells(),
            Preset::Fig2 => fig2_cells(),
            Preset::Fig3 => fig3_cells(),
            Preset::Table1 => table1_cells(),
        }
    }
}

/// Which summary statistic a slope is fitted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlopeMetric {
    /// Mean `|z_hat - z|`.
    LocationError,
    /// Mean sine angle to the oracle direction.
    SineAngle,
}

impl SlopeMetric {
    pub fn as_str(&self) -> &'static str {
        match self {
            SlopeMetric::LocationError => "location_error",
            SlopeMetric::SineAngle => "sine_angle",
        }
    }

    fn value(&self, s: &CellSummary) -> f64 {
        match self {
            SlopeMetric::LocationError => s.abs_error.mean,
            SlopeMetric::SineAngle => s.sine.mean,
        }
    }

    /// Range of mean errors treated as the scaling regime. Below it the error
    /// is at its floor (location errors under one time step; angle errors
    /// dominated by the missingness term), above it the estimator has broken
    /// down (location error beyond a tenth of the shorter segment, sine above
    /// that of 45 degrees).
    pub fn window(&self, cell: &CampaignCell) -> (f64, f64) {
        match self {
            SlopeMetric::LocationError => {
                let shorter = cell.z.min(cell.n - cell.z) as f64;
                (1.0, 0.1 * shorter)
            }
            SlopeMetric::SineAngle => (0.05, std::f64::consts::FRAC_1_SQRT_2),
        }
    }
}

/// Least-squares fit of one curve, or of all curves with a shared slope.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub metric: SlopeMetric,
    /// `None` for the pooled fit.
    pub vartheta: Option<f64>,
    pub sigma: Option<f64>,
    pub points: usize,
    pub slope: f64,
}

fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// `(vartheta, sigma, points)` with points as `(ln norm, ln error)`.
type Curve = (f64, f64, Vec<(f64, f64)>);

/// Slopes of log mean error against log weighted norm for each
/// `(vartheta, sigma)` curve, using only points inside the metric's window
/// and only curves with at least `min_points` such points; plus a pooled
/// within-curve slope over all qualifying curves (last entry, if any).
pub fn fit_slopes(
    summaries: &[CellSummary],
    metric: SlopeMetric,
    min_points: usize,
) -> Vec<SlopeFit> {
    let mut curves: Vec<Curve> = Vec::new();
    for s in summaries {
        let c = &s.cell;
        let y = metric.value(s);
        let (lo, hi) = metric.window(c);
        if !(y.is_finite() && y >= lo && y <= hi && s.weighted_norm > 0.0) {
            continue;
        }
        let point = (s.weighted_norm.ln(), y.ln());
        match curves
            .iter_mut()
            .find(|(v, sg, _)| *v == c.vartheta && *sg == c.sigma)
        {
            Some(curve) => curve.2.push(point),
            None => curves.push((c.vartheta, c.sigma, vec![point])),
        }
    }
    let mut fits = Vec::new();
    let mut pooled_x = Vec::new();
    let mut pooled_y = Vec::new();
    for (vartheta, sigma, pts) in &curves {
        if pts.len() < min_points.max(2) {
            continue;
        }
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        if xs.iter().all(|&x| x == xs[0]) {
            continue;
        }
        fits.push(SlopeFit {
            metric,
            vartheta: Some(*vartheta),
            sigma: Some(*sigma),
            points: pts.len(),
            slope: ols_slope(&xs, &ys),
        });
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        pooled_x.extend(xs.iter().map(|x| x - mx));
        pooled_y.extend(ys.iter().map(|y| y - my));
    }
    if !pooled_x.is_empty() {
        let sxy: f64 = pooled_x.iter().zip(&pooled_y).map(|(x, y)| x * y).sum();
        let sxx: f64 = pooled_x.iter().map(|x| x * x).sum();
        fits.push(SlopeFit {
            metric,
            vartheta: None,
            sigma: None,
            points: pooled_x.len(),
            slope: sxy / sxx,
        });
    }
    fits
}

pub const SLOPES_CSV_HEADER: &str = "metric,vartheta,sigma,points,slope";

pub fn slopes_to_csv(fits: &[SlopeFit]) -> String {
    let mut out = String::from(SLOPES_CSV_HEADER);
    out.push('\n');
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_else(|| "pooled".into());
    for f in fits {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            f.metric.as_str(),
            opt(f.vartheta),
            opt(f.sigma),
            f.points,
            f.slope
        );
    }
    out
}
