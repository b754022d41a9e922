// SPDX-License-Identifier: MIT OR Apache-2.0

//! Single-changepoint estimation.
//!
//! The full-data estimator projects the MissCUSUM matrix onto the sparse
//! direction and takes the median of the maximisers of the absolute projected
//! series. The sample-splitting estimator learns the direction on the odd
//! columns and locates the change on the even ones.

use crate::cusum::{miss_cusum, CusumMatrix};
use crate::data::MaskedMatrix;
use crate::error::{Error, Result};
use crate::linalg::mat_t_vec;
use crate::projection::{default_lambda, estimate_projection, ProjectionEstimate, SolverConfig};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize,
)]
pub enum Variant {
    #[default]
    #[serde(rename = "full")]
    FullData,
    #[serde(rename = "split")]
    SampleSplit,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::FullData => "full",
            Variant::SampleSplit => "split",
        }
    }
}

/// Result of one single-changepoint run.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangepointEstimate {
    /// 1-based; the change happens between `z_hat` and `z_hat + 1`.
    pub z_hat: usize,
    /// `v_hat^T T`. For the split variant this is the projection of the
    /// even-column transform and has length `floor(n/2) - 1`.
    pub projected: Vec<f64>,
    /// `max_t |projected[t]|`.
    pub peak_value: f64,
    pub projection: ProjectionEstimate,
    pub variant: Variant,
}

/// Lower median of the set of maximisers of `|series|`, as a 1-based index.
pub fn median_argmax(series: &[f64]) -> Result<usize> {
    if series.is_empty() {
        return Err(Error::invalid("median_argmax of an empty series"));
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("median_argmax needs finite values"));
    }
    let peak = series.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let maximisers: Vec<usize> = series
        .iter()
        .enumerate()
        .filter(|(_, x)| x.abs() == peak)
        .map(|(i, _)| i + 1)
        .collect();
    Ok(maximisers[maximisers.len().div_ceil(2) - 1])
}

fn peak_abs(series: &[f64]) -> f64 {
    series.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn project(t: &CusumMatrix, lambda: f64, solver: &SolverConfig) -> Result<ProjectionEstimate> {
    if !t.any_valid() {
        return Err(Error::AllInvalid);
    }
    estimate_projection(t.stats(), lambda, solver)
}

/// Full-data estimator.
pub fn miss_inspect(
    m: &MaskedMatrix,
    lambda: f64,
    solver: &SolverConfig,
) -> Result<ChangepointEstimate> {
    let t = miss_cusum(m);
    let projection = project(&t, lambda, solver)?;
    let projected = mat_t_vec(t.stats(), &projection.v_hat);
    let z_hat = median_argmax(&projected)?;
    Ok(ChangepointEstimate {
        z_hat,
        peak_value: peak_abs(&projected),
        projected,
        projection,
        variant: Variant::FullData,
    })
}

/// The first `floor(n/2)` odd columns and the first `floor(n/2)` even columns
/// (1-based), in that order. A trailing odd column is dropped.
pub fn split_columns(m: &MaskedMatrix) -> Result<(MaskedMatrix, MaskedMatrix)> {
    let n = m.n();
    if n < 4 {
        return Err(Error::TooShort { n, min: 4 });
    }
    let half = n / 2;
    let odd: Vec<usize> = (0..half).map(|i| 2 * i).collect();
    let even: Vec<usize> = (0..half).map(|i| 2 * i + 1).collect();
    Ok((m.select_columns(&odd)?, m.select_columns(&even)?))
}

/// Sample-splitting estimator. `lambda` is used as given on the odd half.
pub fn miss_inspect_split(
    m: &MaskedMatrix,
    lambda: f64,
    solver: &SolverConfig,
) -> Result<ChangepointEstimate> {
    let (odd, even) = split_columns(m)?;
    let t_odd = miss_cusum(&odd);
    let t_even = miss_cusum(&even);
    let projection = project(&t_odd, lambda, solver)?;
    let projected = mat_t_vec(t_even.stats(), &projection.v_hat);
    let z_half = median_argmax(&projected)?;
    Ok(ChangepointEstimate {
        z_hat: 2 * z_half,
        peak_value: peak_abs(&projected),
        projected,
        projection,
        variant: Variant::SampleSplit,
    })
}

/// Which series length the split estimator's penalty is computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitLambdaLength {
    /// `floor(n/2)`, the length the solver actually sees.
    Half,
    /// The original `n`.
    Full,
}

/// `lambda = scale * sigma * sqrt(len * log(p * len))`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LambdaRule {
    pub scale: f64,
    pub split_length: SplitLambdaLength,
}

impl Default for LambdaRule {
    fn default() -> Self {
        Self {
            scale: 0.5,
            split_length: SplitLambdaLength::Half,
        }
    }
}

impl LambdaRule {
    pub fn with_scale(scale: f64) -> Self {
        Self {
            scale,
            ..Self::default()
        }
    }

    /// Penalty for a `p x n` input run with `variant`.
    pub fn lambda(&self, n: usize, p: usize, sigma: f64, variant: Variant) -> Result<f64> {
        let len = match (variant, self.split_length) {
            (Variant::SampleSplit, SplitLambdaLength::Half) => n / 2,
            _ => n,
        };
        default_lambda(len, p, sigma, self.scale)
    }
}

/// Everything needed to run one estimator on a matrix with known noise scale.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct DetectConfig {
    pub variant: Variant,
    pub lambda: LambdaRule,
    pub solver: SolverConfig,
}

/// Runs the configured estimator with the penalty implied by `sigma`.
pub fn detect(m: &MaskedMatrix, sigma: f64, config: &DetectConfig) -> Result<ChangepointEstimate> {
    let lambda = config.lambda.lambda(m.n(), m.p(), sigma, config.variant)?;
    detect_with_lambda(m, lambda, config)
}

pub fn detect_with_lambda(
    m: &MaskedMatrix,
    lambda: f64,
    config: &DetectConfig,
) -> Result<ChangepointEstimate> {
    match config.variant {
        Variant::FullData => miss_inspect(m, lambda, &config.solver),
        Variant::SampleSplit => miss_inspect_split(m, lambda, &config.solver),
    }
}
