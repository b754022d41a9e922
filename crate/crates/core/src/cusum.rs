// SPDX-License-Identifier: MIT OR Apache-2.0

//! CUSUM and MissCUSUM transformations.
//!
//! For row `j` and split `t` (1-based, `t` in `1..n`), the MissCUSUM statistic
//! contrasts the mean of the observed entries right of the split with the mean
//! of the observed entries left of it:
//!
//! ```text
//! sqrt(L * R / N) * (right_sum / R - left_sum / L)
//! ```
//!
//! where `L = L[j][t]`, `R = R[j][n - t] = N[j] - L[j][t]` and `N = N[j]`.
//! Entries with no observation on one side are zero and flagged invalid.

use ndarray::{Array2, ArrayView2};

use crate::data::{MaskedMatrix, ObservationCounts};
use crate::error::{Error, Result};

/// `p x (n - 1)` matrix of MissCUSUM statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct CusumMatrix {
    stats: Array2<f64>,
    valid: Array2<bool>,
}

impl CusumMatrix {
    pub fn stats(&self) -> ArrayView2<'_, f64> {
        self.stats.view()
    }

    /// True where both sides of the split contain an observation.
    pub fn valid(&self) -> ArrayView2<'_, bool> {
        self.valid.view()
    }

    pub fn p(&self) -> usize {
        self.stats.nrows()
    }

    /// Number of splits, `n - 1`.
    pub fn splits(&self) -> usize {
        self.stats.ncols()
    }

    pub fn any_valid(&self) -> bool {
        self.valid.iter().any(|&v| v)
    }

    pub fn into_stats(self) -> Array2<f64> {
        self.stats
    }
}

/// MissCUSUM transformation of a masked matrix. Each row is handled with
/// running sums, so the cost is `O(p n)`.
pub fn miss_cusum(m: &MaskedMatrix) -> CusumMatrix {
    let (p, n) = (m.p(), m.n());
    let mut stats = Array2::zeros((p, n - 1));
    let mut valid = Array2::from_elem((p, n - 1), false);
    for j in 0..p {
        let values = m.row_values(j);
        let mask = m.row_mask(j);

        let mut total_count = 0usize;
        let mut total_sum = 0.0;
        for (&x, &o) in values.iter().zip(mask.iter()) {
            if o {
                total_count += 1;
                total_sum += x;
            }
        }
        if total_count < 2 {
            continue;
        }
        let n_obs = total_count as f64;

        let mut left_count = 0usize;
        let mut left_sum = 0.0;
        for t in 0..n - 1 {
            if mask[t] {
                left_count += 1;
                left_sum += values[t];
            }
            let right_count = total_count - left_count;
            if left_count == 0 || right_count == 0 {
                continue;
            }
            let (l, r) = (left_count as f64, right_count as f64);
            let right_sum = total_sum - left_sum;
            stats[[j, t]] = (l * r / n_obs).sqrt() * (right_sum / r - left_sum / l);
            valid[[j, t]] = true;
        }
    }
    CusumMatrix { stats, valid }
}

/// Standard CUSUM transformation of a fully observed matrix.
pub fn cusum(values: ArrayView2<'_, f64>) -> Result<CusumMatrix> {
    let m = MaskedMatrix::fully_observed(values.to_owned())?;
    Ok(miss_cusum(&m))
}

/// The CUSUM transformation of a unit mean change at `z`, so that a mean
/// matrix with change vector `theta` has CUSUM `theta * gamma^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaVector {
    entries: Vec<f64>,
    z: usize,
    n: usize,
}

impl GammaVector {
    /// Entry `t - 1` corresponds to split `t`.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn z(&self) -> usize {
        self.z
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Value at 1-based split `t`.
    pub fn at(&self, t: usize) -> f64 {
        self.entries[t - 1]
    }
}

/// `gamma_t = n^{-1/2} sqrt(t/(n-t)) (n-z)` for `t <= z`, and
/// `n^{-1/2} sqrt((n-t)/t) z` otherwise.
pub fn gamma_vector(n: usize, z: usize) -> Result<GammaVector> {
    if n < 2 {
        return Err(Error::TooShort { n, min: 2 });
    }
    if z == 0 || z >= n {
        return Err(Error::invalid(format!(
            "changepoint z = {z} outside 1..={}",
            n - 1
        )));
    }
    let nf = n as f64;
    let scale = nf.sqrt().recip();
    let entries = (1..n)
        .map(|t| {
            let (tf, zf) = (t as f64, z as f64);
            if t <= z {
                scale * (tf / (nf - tf)).sqrt() * (nf - zf)
            } else {
                scale * ((nf - tf) / tf).sqrt() * zf
            }
        })
        .collect();
    Ok(GammaVector { entries, z, n })
}

/// Peak of the absolute noiseless MissCUSUM in row `j` for a change of size
/// `theta_j` at `z`: `|theta_j| sqrt(L[j][z] R[j][n-z] / N[j])`.
pub fn noiseless_peak(theta_j: f64, counts: &ObservationCounts, j: usize, z: usize) -> Result<f64> {
    let n = counts.n();
    if j >= counts.p() {
        return Err(Error::invalid(format!("row {j} out of range")));
    }
    if z == 0 || z >= n {
        return Err(Error::invalid(format!(
            "changepoint z = {z} outside 1..={}",
            n - 1
        )));
    }
    let total = counts.total(j);
    if total == 0 {
        return Err(Error::invalid(format!("row {j} has no observations")));
    }
    let l = counts.left(j, z) as f64;
    let r = counts.right(j, n - z) as f64;
    Ok(theta_j.abs() * (l * r / total as f64).sqrt())
}
