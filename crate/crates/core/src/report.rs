// SPDX-License-Identifier: MIT OR Apache-2.0

//! JSON documents written by the command-line tool.
//!
//! Every document carries `"schema": "misscusum/1"`. Fields are always
//! present; a value that does not apply is `null` rather than omitted. Time
//! indices are 1-based.

use serde::Serialize;

use crate::data::MaskedMatrix;
use crate::error::Error;
use crate::segment::{SegmentationResult, StopReason};
use crate::sigma::SigmaSource;

pub const SCHEMA: &str = "misscusum/1";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputSummary {
    pub p: usize,
    pub n: usize,
    pub observed_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaUsed {
    pub value: f64,
    pub source: SigmaSource,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChangepointEntry {
    pub z_hat: usize,
    /// Time label of column `z_hat`, when the input had labels.
    pub label: Option<String>,
    pub prominence: f64,
    pub depth: usize,
    /// Inclusive 1-based bounds of the segment searched.
    pub segment: [usize; 2],
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Loading {
    /// 1-based coordinate index.
    pub index: usize,
    pub label: Option<String>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoppedEntry {
    pub segment: [usize; 2],
    pub depth: usize,
    pub reason: &'static str,
    pub message: String,
}

/// Output of `misscusum detect`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionReport {
    pub schema: &'static str,
    pub input: InputSummary,
    pub variant: &'static str,
    pub lambda_scale: f64,
    /// Penalty on the full series.
    pub lambda_used: f64,
    pub sigma_used: SigmaUsed,
    pub seed: u64,
    /// By descending prominence.
    pub z_hats: Vec<usize>,
    pub prominences: Vec<f64>,
    /// Same order as `z_hats`.
    pub changepoints: Vec<ChangepointEntry>,
    /// Nonzero entries of the projection direction on the full series.
    pub v_hat: Vec<Loading>,
    /// Solver run on the full series; `null` if it failed there.
    pub solver: Option<SolverDiagnostics>,
    pub stopped_branches: Vec<StoppedEntry>,
    /// Wall-clock time, only when requested, so that reports are otherwise
    /// byte-stable.
    pub timing_ms: Option<f64>,
}

/// Labels for report entries.
#[derive(Debug, Clone, Copy, Default)]
pub struct Labels<'a> {
    pub time: Option<&'a [String]>,
    pub coord: Option<&'a [String]>,
}

fn label(labels: Option<&[String]>, one_based: usize) -> Option<String> {
    labels.and_then(|l| l.get(one_based - 1)).cloned()
}

/// Parameters of a detection run that are echoed in the report.
#[derive(Debug, Clone, Copy)]
pub struct RunInfo {
    pub variant: &'static str,
    pub lambda_scale: f64,
    pub lambda_used: f64,
    pub sigma: f64,
    pub sigma_source: SigmaSource,
    pub seed: u64,
}

impl DetectionReport {
    pub fn new(
        m: &MaskedMatrix,
        run: RunInfo,
        result: &SegmentationResult,
        labels: Labels<'_>,
    ) -> Self {
        let changepoints: Vec<ChangepointEntry> = result
            .ranked()
            .map(|c| ChangepointEntry {
                z_hat: c.z_hat,
                label: label(labels.time, c.z_hat),
                prominence: c.prominence,
                depth: c.depth,
                segment: [c.segment.0, c.segment.1],
                lambda: c.lambda,
            })
            .collect();
        let root = result.root_estimate();
        let v_hat = root
            .map(|r| {
                r.estimate
                    .projection
                    .v_hat
                    .iter()
                    .enumerate()
                    .filter(|(_, &w)| w != 0.0)
                    .map(|(j, &weight)| Loading {
                        index: j + 1,
                        label: label(labels.coord, j + 1),
                        weight,
                    })
                    .collect()
            })
            .unwrap_or_default();
        let solver = root.map(|r| SolverDiagnostics {
            iterations: r.estimate.projection.iterations,
            converged: r.estimate.projection.converged,
        });
        let stopped_branches = result
            .stopped
            .iter()
            .map(|s| StoppedEntry {
                segment: [s.segment.0, s.segment.1],
                depth: s.depth,
                reason: s.reason.code(),
                message: s.reason.message(),
            })
            .collect();
        Self {
            schema: SCHEMA,
            input: InputSummary {
                p: m.p(),
                n: m.n(),
                observed_fraction: m.observed_fraction(),
            },
            variant: run.variant,
            lambda_scale: run.lambda_scale,
            lambda_used: run.lambda_used,
            sigma_used: SigmaUsed {
                value: run.sigma,
                source: run.sigma_source,
            },
            seed: run.seed,
            z_hats: changepoints.iter().map(|c| c.z_hat).collect(),
            prominences: changepoints.iter().map(|c| c.prominence).collect(),
            changepoints,
            v_hat,
            solver,
            stopped_branches,
            timing_ms: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
    /// Set for `degenerate_penalty`.
    pub lambda: Option<f64>,
    /// Set for `degenerate_penalty`: the largest row norm of the CUSUM matrix.
    pub two_to_inf_norm: Option<f64>,
}

/// Output of any command that fails.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub schema: &'static str,
    pub error: ErrorBody,
}

impl ErrorReport {
    pub fn from_error(e: &Error) -> Self {
        let (lambda, two_to_inf_norm) = match e {
            Error::DegeneratePenalty {
                lambda,
                two_to_inf_norm,
            } => (Some(*lambda), Some(*two_to_inf_norm)),
            _ => (None, None),
        };
        Self {
            schema: SCHEMA,
            error: ErrorBody {
                code: e.code(),
                message: e.to_string(),
                lambda,
                two_to_inf_norm,
            },
        }
    }

    /// Generic validation failure not tied to a library error, such as a
    /// command-line conflict.
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            schema: SCHEMA,
            error: ErrorBody {
                code: "invalid_input",
                message: message.into(),
                lambda: None,
                two_to_inf_norm: None,
            },
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("error report serialises");
        s.push('\n');
        s
    }
}

/// Why the full series yielded nothing, when no changepoint was accepted.
pub fn root_stop(result: &SegmentationResult) -> Option<&StopReason> {
    if !result.changepoints.is_empty() {
        return None;
    }
    result
        .stopped
        .iter()
        .find(|s| s.depth == 0)
        .map(|s| &s.reason)
}
