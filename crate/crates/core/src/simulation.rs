// SPDX-License-Identifier: MIT OR Apache-2.0

//! Data from the single-changepoint model with row-homogeneous missingness,
//! and the metrics used to score estimators on it.
//!
//! # Random number generation
//!
//! Every replicate owns a [`ChaCha8Rng`] seeded with
//! `ChaCha8Rng::seed_from_u64(seed)`. Independent quantities use separate
//! ChaCha streams of that generator:
//!
//! | stream | content |
//! |--------|---------|
//! | 0 | Gaussian noise, row-major, via the `rand_distr` ziggurat `StandardNormal` |
//! | 1 | mask uniforms, row-major; `omega = u < q_j` with `u` in `[0, 1)` |
//! | 2 | random observation rates (Beta draws) |
//!
//! Changing the noise stream therefore never changes the mask.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::data::MaskedMatrix;
use crate::error::{Error, Result};
use crate::linalg::norm2;

pub use crate::linalg::{angle_degrees, sine_angle};

pub const NOISE_STREAM: u64 = 0;
pub const MASK_STREAM: u64 = 1;
pub const RATE_STREAM: u64 = 2;

/// Generator for one stream of a seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Parameters of one draw from the single-changepoint model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub n: usize,
    pub p: usize,
    /// Last pre-change time point, 1-based.
    pub z: usize,
    /// Mean change `mu2 - mu1`.
    pub theta: Vec<f64>,
    /// Pre-change mean.
    pub mu1: Vec<f64>,
    pub sigma: f64,
    /// Per-row observation probabilities.
    pub q: Vec<f64>,
    pub seed: u64,
}

impl ModelSpec {
    /// Spec with zero pre-change mean.
    pub fn new(n: usize, z: usize, theta: Vec<f64>, sigma: f64, q: Vec<f64>, seed: u64) -> Self {
        let p = theta.len();
        Self {
            n,
            p,
            z,
            theta,
            mu1: vec![0.0; p],
            sigma,
            q,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::TooShort { n: self.n, min: 2 });
        }
        if self.p == 0 {
            return Err(Error::invalid("p must be at least 1"));
        }
        if self.z == 0 || self.z >= self.n {
            return Err(Error::invalid(format!(
                "z = {} outside 1..={}",
                self.z,
                self.n - 1
            )));
        }
        for (name, v) in [("theta", &self.theta), ("mu1", &self.mu1), ("q", &self.q)] {
            if v.len() != self.p {
                return Err(Error::invalid(format!(
                    "{name} has length {}, expected p = {}",
                    v.len(),
                    self.p
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("{name} has non-finite entries")));
            }
        }
        if self.theta.iter().all(|&x| x == 0.0) {
            return Err(Error::invalid("theta must be nonzero"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!(
                "sigma must be >= 0, got {}",
                self.sigma
            )));
        }
        if let Some(q) = self.q.iter().find(|&&q| !(q > 0.0 && q <= 1.0)) {
            return Err(Error::invalid(format!(
                "observation rate {q} outside (0, 1]"
            )));
        }
        Ok(())
    }

    /// Number of coordinates that change.
    pub fn sparsity(&self) -> usize {
        self.theta.iter().filter(|&&x| x != 0.0).count()
    }

    /// `min(z, n - z) / n`.
    pub fn boundary_fraction(&self) -> f64 {
        self.z.min(self.n - self.z) as f64 / self.n as f64
    }

    /// The `p x n` mean matrix.
    pub fn mean_matrix(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.p, self.n), |(j, t)| {
            if t < self.z {
                self.mu1[j]
            } else {
                self.mu1[j] + self.theta[j]
            }
        })
    }
}

/// Draws `(X ∘ Ω, Ω)`.
pub fn simulate(spec: &ModelSpec) -> Result<MaskedMatrix> {
    spec.validate()?;
    let mut values = spec.mean_matrix();
    let mut noise = stream_rng(spec.seed, NOISE_STREAM);
    for x in values.iter_mut() {
        let e: f64 = StandardNormal.sample(&mut noise);
        *x += spec.sigma * e;
    }
    let mut coin = stream_rng(spec.seed, MASK_STREAM);
    let mut mask = Array2::from_elem((spec.p, spec.n), false);
    for (j, mut row) in mask.outer_iter_mut().enumerate() {
        let q = spec.q[j];
        for o in row.iter_mut() {
            *o = coin.random::<f64>() < q;
        }
    }
    MaskedMatrix::new(values, mask)
}

/// Shape of the mean-change vector over its `k` leading coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaShape {
    /// Equal entries, `vartheta / sqrt(k)`.
    Flat,
    /// Proportional to `(1, 2^{-1/2}, ..., k^{-1/2})`.
    Harmonic,
}

impl ThetaShape {
    pub fn as_str(&self) -> &'static str {
        match self {
            ThetaShape::Flat => "flat",
            ThetaShape::Harmonic => "harmonic",
        }
    }
}

/// `k`-sparse mean change of Euclidean norm `vartheta`.
pub fn theta_vector(shape: ThetaShape, p: usize, k: usize, vartheta: f64) -> Result<Vec<f64>> {
    if k == 0 || k > p {
        return Err(Error::invalid(format!("sparsity k = {k} outside 1..={p}")));
    }
    let mut theta = vec![0.0; p];
    match shape {
        ThetaShape::Flat => {
            let v = vartheta / (k as f64).sqrt();
            theta[..k].iter_mut().for_each(|x| *x = v);
        }
        ThetaShape::Harmonic => {
            for (i, x) in theta[..k].iter_mut().enumerate() {
                *x = ((i + 1) as f64).sqrt().recip();
            }
            let nrm = norm2(&theta);
            theta.iter_mut().for_each(|x| *x *= vartheta / nrm);
        }
    }
    Ok(theta)
}

/// Unit vector along `theta ∘ sqrt(q)`.
pub fn oracle_direction(theta: &[f64], q: &[f64]) -> Result<Vec<f64>> {
    if theta.len() != q.len() {
        return Err(Error::invalid("theta and q lengths differ"));
    }
    let mut v: Vec<f64> = theta.iter().zip(q).map(|(t, q)| t * q.sqrt()).collect();
    let nrm = norm2(&v);
    if nrm == 0.0 || !nrm.is_finite() {
        return Err(Error::invalid("theta ∘ sqrt(q) is zero"));
    }
    v.iter_mut().for_each(|x| *x /= nrm);
    Ok(v)
}

/// `sqrt(sum_j theta_j^2 q_j)`.
pub fn weighted_norm(theta: &[f64], q: &[f64]) -> Result<f64> {
    if theta.len() != q.len() {
        return Err(Error::invalid("theta and q lengths differ"));
    }
    Ok(theta
        .iter()
        .zip(q)
        .map(|(t, q)| t * t * q)
        .sum::<f64>()
        .sqrt())
}

/// How observation rates are assigned to rows.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateSpec {
    /// Same rate for every row.
    Constant {
        q: f64,
    },
    /// `signal` on rows where theta is nonzero, `noise` elsewhere.
    SignalNoise {
        signal: f64,
        noise: f64,
    },
    /// Independent `Beta(10 nu, 10 (1 - nu))` rates, redrawn per replicate.
    Beta {
        nu: f64,
    },
    Explicit {
        q: Vec<f64>,
    },
}

impl RateSpec {
    /// Observation rates for a replicate with the given seed.
    pub fn realize(&self, theta: &[f64], seed: u64) -> Result<Vec<f64>> {
        let p = theta.len();
        let q = match self {
            RateSpec::Constant { q } => vec![*q; p],
            RateSpec::SignalNoise { signal, noise } => theta
                .iter()
                .map(|&t| if t != 0.0 { *signal } else { *noise })
                .collect(),
            RateSpec::Beta { nu } => {
                if !(*nu > 0.0 && *nu < 1.0) {
                    return Err(Error::invalid(format!(
                        "Beta rate mean nu = {nu} outside (0, 1)"
                    )));
                }
                let beta = Beta::new(10.0 * nu, 10.0 * (1.0 - nu))
                    .map_err(|e| Error::invalid(e.to_string()))?;
                let mut rng = stream_rng(seed, RATE_STREAM);
                (0..p)
                    .map(|_| beta.sample(&mut rng).clamp(f64::MIN_POSITIVE, 1.0))
                    .collect()
            }
            RateSpec::Explicit { q } => {
                if q.len() != p {
                    return Err(Error::invalid("explicit rate vector has wrong length"));
                }
                q.clone()
            }
        };
        if let Some(bad) = q.iter().find(|&&x| !(x > 0.0 && x <= 1.0)) {
            return Err(Error::invalid(format!(
                "observation rate {bad} outside (0, 1]"
            )));
        }
        Ok(q)
    }

    /// Short human-readable description used in tables.
    pub fn describe(&self) -> String {
        match self {
            RateSpec::Constant { q } => format!("{q}"),
            RateSpec::SignalNoise { signal, noise } => format!("s{signal}/n{noise}"),
            RateSpec::Beta { nu } => format!("beta({nu})"),
            RateSpec::Explicit { .. } => "explicit".to_string(),
        }
    }
}
