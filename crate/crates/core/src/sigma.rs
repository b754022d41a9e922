// SPDX-License-Identifier: MIT OR Apache-2.0

//! Robust noise-scale estimation from partially observed rows.
//!
//! Differencing consecutive observed values removes the piecewise-constant
//! mean apart from a single jump per change, and the median absolute
//! deviation of the differences ignores those few jumps.

use crate::data::MaskedMatrix;
use crate::error::{Error, Result};

/// Gaussian consistency factor for the MAD, `1 / Phi^{-1}(3/4)`.
pub const MAD_CONSISTENCY: f64 = 1.4826;

/// Median of a nonempty slice; averages the two middle values for even length.
pub fn median(values: &[f64]) -> f64 {
    debug_assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Differences between consecutive observed values of row `j`.
fn observed_differences(m: &MaskedMatrix, j: usize) -> Vec<f64> {
    let mut prev = None;
    let mut out = Vec::new();
    for (&x, &o) in m.row_values(j).iter().zip(m.row_mask(j).iter()) {
        if !o {
            continue;
        }
        if let Some(p) = prev {
            out.push(x - p);
        }
        prev = Some(x);
    }
    out
}

/// Noise scale of one row, or `None` with fewer than two observations.
pub fn row_sigma(m: &MaskedMatrix, j: usize) -> Option<f64> {
    let diffs = observed_differences(m, j);
    if diffs.is_empty() {
        return None;
    }
    let centre = median(&diffs);
    let deviations: Vec<f64> = diffs.iter().map(|d| (d - centre).abs()).collect();
    Some(MAD_CONSISTENCY * median(&deviations) / std::f64::consts::SQRT_2)
}

/// Median over rows of the per-row MAD estimate of first differences.
pub fn estimate_sigma(m: &MaskedMatrix) -> Result<f64> {
    let per_row: Vec<f64> = (0..m.p()).filter_map(|j| row_sigma(m, j)).collect();
    if per_row.is_empty() {
        return Err(Error::invalid(
            "cannot estimate sigma: no row has two or more observations",
        ));
    }
    Ok(median(&per_row))
}

/// Root mean square of all observed first differences, divided by `sqrt(2)`.
///
/// Not robust; used only when the MAD estimate collapses to zero, as it does
/// on exactly piecewise-constant data.
pub fn rms_difference_sigma(m: &MaskedMatrix) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for j in 0..m.p() {
        for d in observed_differences(m, j) {
            sum += d * d;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::invalid(
            "cannot estimate sigma: no row has two or more observations",
        ));
    }
    Ok((sum / count as f64 / 2.0).sqrt())
}

/// Where the noise scale used for a run came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaSource {
    Supplied,
    Estimated,
    /// MAD was zero; the RMS of differences was used instead.
    EstimatedFallback,
}

/// Returns `supplied` if given, otherwise the MAD estimate, falling back to the
/// RMS estimate when the MAD is zero. Fails if the result is not positive.
pub fn resolve_sigma(m: &MaskedMatrix, supplied: Option<f64>) -> Result<(f64, SigmaSource)> {
    if let Some(s) = supplied {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::invalid(format!("sigma must be positive, got {s}")));
        }
        return Ok((s, SigmaSource::Supplied));
    }
    let mad = estimate_sigma(m)?;
    if mad > 0.0 {
        return Ok((mad, SigmaSource::Estimated));
    }
    let rms = rms_difference_sigma(m)?;
    if rms > 0.0 {
        Ok((rms, SigmaSource::EstimatedFallback))
    } else {
        Err(Error::invalid(
            "cannot estimate sigma: all observed rows are constant",
        ))
    }
}
