// SPDX-License-Identifier: MIT OR Apache-2.0

//! Small dense kernels with a fixed summation order, so results do not depend
//! on thread count or call site.

use ndarray::ArrayView2;

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

/// Scales `a` to unit length; returns the original norm, leaving `a` untouched
/// when that norm is zero.
pub fn normalize(a: &mut [f64]) -> f64 {
    let nrm = norm2(a);
    if nrm > 0.0 {
        a.iter_mut().for_each(|x| *x /= nrm);
    }
    nrm
}

/// `M w` for a row-major `M`.
pub fn mat_vec(m: ArrayView2<'_, f64>, w: &[f64]) -> Vec<f64> {
    debug_assert_eq!(m.ncols(), w.len());
    m.outer_iter()
        .map(|row| match row.as_slice() {
            Some(r) => dot(r, w),
            None => dot(&row.to_vec(), w),
        })
        .collect()
}

/// `M^T v`; rows with `v_j = 0` are skipped, which makes sparse `v` cheap.
pub fn mat_t_vec(m: ArrayView2<'_, f64>, v: &[f64]) -> Vec<f64> {
    debug_assert_eq!(m.nrows(), v.len());
    let mut out = vec![0.0; m.ncols()];
    for (row, &vj) in m.outer_iter().zip(v) {
        if vj == 0.0 {
            continue;
        }
        match row.as_slice() {
            Some(r) => out.iter_mut().zip(r).for_each(|(o, &x)| *o += vj * x),
            None => out
                .iter_mut()
                .zip(row.iter())
                .for_each(|(o, &x)| *o += vj * x),
        }
    }
    out
}

/// Sine of the acute angle between two nonzero vectors.
///
/// Computed from the distance between the normalised vectors rather than from
/// `1 - cos^2`, which loses all precision below about `1e-8`.
pub fn sine_angle(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::invalid(format!(
            "vector lengths differ: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let (nu, nv) = (norm2(u), norm2(v));
    if nu == 0.0 || nv == 0.0 || !nu.is_finite() || !nv.is_finite() {
        return Err(Error::invalid("sine angle needs nonzero finite vectors"));
    }
    let mut diff = 0.0;
    let mut sum = 0.0;
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (a / nu, b / nv);
        diff += (a - b) * (a - b);
        sum += (a + b) * (a + b);
    }
    // half-chord of the acute angle is sin(phi / 2)
    let half = 0.5 * diff.min(sum).sqrt();
    let half = half.min(std::f64::consts::FRAC_1_SQRT_2);
    Ok((2.0 * half * (1.0 - half * half).sqrt()).clamp(0.0, 1.0))
}

/// Acute angle in degrees, `acos(|<u,v>| / (|u| |v|))` with the ratio clamped
/// to `[0, 1]`.
pub fn angle_degrees(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::invalid("vector lengths differ"));
    }
    let (nu, nv) = (norm2(u), norm2(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::invalid("angle needs nonzero vectors"));
    }
    let c = (dot(u, v).abs() / (nu * nv)).clamp(0.0, 1.0);
    Ok(c.acos().to_degrees())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_angle_known_values() {
        assert_eq!(sine_angle(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((sine_angle(&[1.0, 0.0], &[0.0, 3.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((sine_angle(&[1.0, 0.0], &[1.0, 1.0]).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((sine_angle(&[1.0, 0.0], &[-1.0, 1.0]).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(sine_angle(&[0.0, 0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn sine_angle_resolves_tiny_angles() {
        let eps = 1e-11;
        let s = sine_angle(&[1.0, 0.0], &[1.0, eps]).unwrap();
        assert!((s - eps).abs() < 1e-20, "{s}");
    }

    #[test]
    fn angle_degrees_matches_sine() {
        let a = angle_degrees(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((a - 45.0).abs() < 1e-12);
        assert!((angle_degrees(&[1.0, 0.0], &[-2.0, 0.0]).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn products_match_naive() {
        let m = ndarray::array![[1.0, 2.0, 3.0, 4.0, 5.0], [0.5, -1.0, 0.0, 2.0, 1.0]];
        let w = [1.0, 0.0, -1.0, 2.0, 0.5];
        assert_eq!(
            mat_vec(m.view(), &w),
            vec![1.0 - 3.0 + 8.0 + 2.5, 0.5 + 4.0 + 0.5]
        );
        assert_eq!(
            mat_t_vec(m.view(), &[2.0, 0.0]),
            vec![2.0, 4.0, 6.0, 8.0, 10.0]
        );
    }
}
