// SPDX-License-Identifier: MIT OR Apache-2.0

//! Partially observed data matrices.
//!
//! A [`MaskedMatrix`] holds `p` coordinates observed over `n` time points
//! together with a revelation mask. Unobserved entries are stored as zero so
//! that the values matrix is always `X ∘ Ω`; the mask is the only record of
//! which entries were seen.
//!
//! Internally every index is 0-based. Accessors that take a time index `t`
//! in the counting sense (number of leading columns) say so explicitly.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// A `p x n` matrix paired with its `p x n` revelation mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedMatrix {
    values: Array2<f64>,
    mask: Array2<bool>,
}

impl MaskedMatrix {
    /// Validates dimensions and observed values, then zeroes every unobserved
    /// entry.
    pub fn new(mut values: Array2<f64>, mask: Array2<bool>) -> Result<Self> {
        if values.dim() != mask.dim() {
            return Err(Error::DimensionMismatch {
                values_rows: values.nrows(),
                values_cols: values.ncols(),
                mask_rows: mask.nrows(),
                mask_cols: mask.ncols(),
            });
        }
        let (p, n) = values.dim();
        if p == 0 {
            return Err(Error::invalid("matrix must have at least one row"));
        }
        if n < 2 {
            return Err(Error::TooShort { n, min: 2 });
        }
        for ((row, time), v) in values.indexed_iter_mut() {
            if mask[[row, time]] {
                if !v.is_finite() {
                    return Err(Error::NonFinite { row, time });
                }
            } else {
                *v = 0.0;
            }
        }
        Ok(Self { values, mask })
    }

    /// Every entry observed.
    pub fn fully_observed(values: Array2<f64>) -> Result<Self> {
        let mask = Array2::from_elem(values.dim(), true);
        Self::new(values, mask)
    }

    /// Builds from nested row vectors; a convenience for tests and small inputs.
    pub fn from_rows(values: &[Vec<f64>], mask: &[Vec<bool>]) -> Result<Self> {
        let values = rows_to_array(values)?;
        let mask = rows_to_array(mask)?;
        Self::new(values, mask)
    }

    /// Number of coordinates.
    pub fn p(&self) -> usize {
        self.values.nrows()
    }

    /// Number of time points.
    pub fn n(&self) -> usize {
        self.values.ncols()
    }

    /// `X ∘ Ω`.
    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn mask(&self) -> ArrayView2<'_, bool> {
        self.mask.view()
    }

    pub fn row_values(&self, j: usize) -> ArrayView1<'_, f64> {
        self.values.row(j)
    }

    pub fn row_mask(&self, j: usize) -> ArrayView1<'_, bool> {
        self.mask.row(j)
    }

    pub fn is_observed(&self, j: usize, t: usize) -> bool {
        self.mask[[j, t]]
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Fraction of entries that are observed.
    pub fn observed_fraction(&self) -> f64 {
        self.observed_count() as f64 / self.mask.len() as f64
    }

    /// Submatrix made of the given (0-based) columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.n()) {
            return Err(Error::invalid(format!(
                "column {bad} out of range for n = {}",
                self.n()
            )));
        }
        let values = self.values.select(Axis(1), columns);
        let mask = self.mask.select(Axis(1), columns);
        Self::new(values, mask)
    }

    /// Contiguous block of columns `start..end` (0-based, end exclusive).
    pub fn column_range(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n() {
            return Err(Error::invalid(format!(
                "column range {start}..{end} invalid for n = {}",
                self.n()
            )));
        }
        let cols: Vec<usize> = (start..end).collect();
        self.select_columns(&cols)
    }

    /// Same matrix with values multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(&self.values * factor, self.mask.clone())
    }

    /// Rows reordered so that output row `i` is input row `order[i]`.
    pub fn permute_rows(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.p() {
            return Err(Error::invalid("permutation length must equal p"));
        }
        Self::new(
            self.values.select(Axis(0), order),
            self.mask.select(Axis(0), order),
        )
    }

    /// Prefix and suffix observation counts for every row.
    pub fn observation_counts(&self) -> ObservationCounts {
        let (p, n) = self.values.dim();
        let mut left = Array2::zeros((p, n));
        let mut right = Array2::zeros((p, n));
        let mut total = Vec::with_capacity(p);
        for (j, mask_row) in self.mask.outer_iter().enumerate() {
            let mut acc = 0usize;
            for (t, &m) in mask_row.iter().enumerate() {
                acc += usize::from(m);
                left[[j, t]] = acc;
            }
            let mut acc = 0usize;
            for (t, &m) in mask_row.iter().rev().enumerate() {
                acc += usize::from(m);
                right[[j, t]] = acc;
            }
            total.push(left[[j, n - 1]]);
        }
        ObservationCounts { left, right, total }
    }
}

fn rows_to_array<T: Clone>(rows: &[Vec<T>]) -> Result<Array2<T>> {
    let n_rows = rows.len();
    if n_rows == 0 {
        return Err(Error::invalid("matrix must have at least one row"));
    }
    let n_cols = rows[0].len();
    if let Some(i) = rows.iter().position(|r| r.len() != n_cols) {
        return Err(Error::invalid(format!(
            "row {i} has {} entries, expected {n_cols}",
            rows[i].len()
        )));
    }
    let flat: Vec<T> = rows.iter().flatten().cloned().collect();
    Array2::from_shape_vec((n_rows, n_cols), flat).map_err(|e| Error::invalid(e.to_string()))
}

/// Running observation counts.
///
/// With 1-based `t`, `L[j][t]` counts observations among the first `t`
/// columns of row `j`, `R[j][t]` among the last `t` columns, and `N[j]` is the
/// row total.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationCounts {
    left: Array2<usize>,
    right: Array2<usize>,
    total: Vec<usize>,
}

impl ObservationCounts {
    /// `L[j][t]` for `t` in `1..=n`.
    pub fn left(&self, j: usize, t: usize) -> usize {
        debug_assert!(t >= 1);
        self.left[[j, t - 1]]
    }

    /// `R[j][t]` for `t` in `1..=n`.
    pub fn right(&self, j: usize, t: usize) -> usize {
        debug_assert!(t >= 1);
        self.right[[j, t - 1]]
    }

    pub fn total(&self, j: usize) -> usize {
        self.total[j]
    }

    pub fn totals(&self) -> &[usize] {
        &self.total
    }

    pub fn p(&self) -> usize {
        self.total.len()
    }

    pub fn n(&self) -> usize {
        self.left.ncols()
    }

    /// Row `j` of `L`, indexed from `t = 1` at position 0.
    pub fn left_row(&self, j: usize) -> ArrayView1<'_, usize> {
        self.left.row(j)
    }

    /// Row `j` of `R`, indexed from `t = 1` at position 0.
    pub fn right_row(&self, j: usize) -> ArrayView1<'_, usize> {
        self.right.row(j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn unobserved_values_are_zeroed() {
        let m = MaskedMatrix::new(
            array![[1.0, 5.0], [2.0, 3.0]],
            array![[true, false], [true, true]],
        )
        .unwrap();
        assert_eq!(m.values(), array![[1.0, 0.0], [2.0, 3.0]]);
    }

    #[test]
    fn unobserved_non_finite_is_accepted() {
        let m = MaskedMatrix::new(array![[f64::NAN, 1.0]], array![[false, true]]).unwrap();
        assert_eq!(m.values(), array![[0.0, 1.0]]);
    }

    #[test]
    fn rejects_single_time_point() {
        let err = MaskedMatrix::new(array![[1.0]], array![[true]]).unwrap_err();
        assert_eq!(err, Error::TooShort { n: 1, min: 2 });
    }

    #[test]
    fn rejects_non_finite_observed() {
        let err =
            MaskedMatrix::new(array![[f64::INFINITY, 0.0]], array![[true, true]]).unwrap_err();
        assert_eq!(err, Error::NonFinite { row: 0, time: 0 });
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let err = MaskedMatrix::new(array![[1.0, 2.0]], array![[true, true, true]]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn rejects_ragged_rows() {
        let err = MaskedMatrix::from_rows(
            &[vec![1.0, 2.0], vec![1.0]],
            &[vec![true, true], vec![true]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn counts_for_partial_row() {
        let m = MaskedMatrix::from_rows(&[vec![0.0; 4]], &[vec![true, false, true, true]]).unwrap();
        let c = m.observation_counts();
        let left: Vec<usize> = (1..=4).map(|t| c.left(0, t)).collect();
        let right: Vec<usize> = (1..=4).map(|t| c.right(0, t)).collect();
        assert_eq!(left, vec![1, 1, 2, 3]);
        assert_eq!(right, vec![1, 2, 2, 3]);
        assert_eq!(c.total(0), 3);
    }

    #[test]
    fn counts_for_full_and_empty_rows() {
        let m = MaskedMatrix::from_rows(
            &[vec![0.0; 4], vec![0.0; 4]],
            &[vec![true; 4], vec![false; 4]],
        )
        .unwrap();
        let c = m.observation_counts();
        for t in 1..=4 {
            assert_eq!(c.left(0, t), t);
            assert_eq!(c.right(0, t), t);
            assert_eq!(c.left(1, t), 0);
            assert_eq!(c.right(1, t), 0);
        }
        assert_eq!(c.totals(), &[4, 0]);
    }

    #[test]
    fn column_selection_keeps_mask() {
        let m = MaskedMatrix::from_rows(
            &[vec![1.0, 2.0, 3.0, 4.0]],
            &[vec![true, false, true, true]],
        )
        .unwrap();
        let sub = m.select_columns(&[1, 3]).unwrap();
        assert_eq!(sub.values(), array![[0.0, 4.0]]);
        assert_eq!(sub.mask(), array![[false, true]]);
        assert!(m.column_range(2, 2).is_err());
    }
}
