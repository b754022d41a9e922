// SPDX-License-Identifier: MIT OR Apache-2.0

//! Helpers shared by the integration tests.

#![allow(dead_code)]

use misscusum::MaskedMatrix;
use ndarray::Array2;
use rand::Rng;

/// Textbook CUSUM, `sqrt(t (n - t) / n) * (mean(x[t+1..n]) - mean(x[1..t]))`,
/// written out with explicit sums so it shares no code with the library.
pub fn naive_cusum(values: &Array2<f64>) -> Array2<f64> {
    let (p, n) = values.dim();
    Array2::from_shape_fn((p, n - 1), |(j, t0)| {
        let t = t0 + 1;
        let left: f64 = (0..t).map(|r| values[[j, r]]).sum::<f64>() / t as f64;
        let right: f64 = (t..n).map(|r| values[[j, r]]).sum::<f64>() / (n - t) as f64;
        ((t * (n - t)) as f64 / n as f64).sqrt() * (right - left)
    })
}

/// Naive MissCUSUM over observed entries only, quadratic in `n`.
pub fn naive_miss_cusum(m: &MaskedMatrix) -> (Array2<f64>, Array2<bool>) {
    let (p, n) = (m.p(), m.n());
    let mut stats = Array2::zeros((p, n - 1));
    let mut valid = Array2::from_elem((p, n - 1), false);
    for j in 0..p {
        for t in 1..n {
            let left: Vec<f64> = (0..t)
                .filter(|&r| m.is_observed(j, r))
                .map(|r| m.values()[[j, r]])
                .collect();
            let right: Vec<f64> = (t..n)
                .filter(|&r| m.is_observed(j, r))
                .map(|r| m.values()[[j, r]])
                .collect();
            if left.is_empty() || right.is_empty() {
                continue;
            }
            let (l, r) = (left.len() as f64, right.len() as f64);
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            stats[[j, t - 1]] = (l * r / (l + r)).sqrt() * (mean(&right) - mean(&left));
            valid[[j, t - 1]] = true;
        }
    }
    (stats, valid)
}

/// Mean matrix with pre-change mean `mu1` and change `theta` after `z`.
pub fn step_means(mu1: &[f64], theta: &[f64], n: usize, z: usize) -> Array2<f64> {
    Array2::from_shape_fn((theta.len(), n), |(j, t)| {
        if t < z {
            mu1[j]
        } else {
            mu1[j] + theta[j]
        }
    })
}

pub fn random_values<R: Rng>(rng: &mut R, p: usize, n: usize) -> Array2<f64> {
    Array2::from_shape_fn((p, n), |_| rng.random_range(-5.0..5.0))
}

pub fn random_mask<R: Rng>(rng: &mut R, p: usize, n: usize, q: f64) -> Array2<bool> {
    Array2::from_shape_fn((p, n), |_| rng.random::<f64>() < q)
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Relative gap between two directions after normalising, up to sign.
pub fn direction_gap(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let plus: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x / na - y / nb).powi(2))
        .sum::<f64>()
        .sqrt();
    let minus: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x / na + y / nb).powi(2))
        .sum::<f64>()
        .sqrt();
    plus.min(minus)
}
