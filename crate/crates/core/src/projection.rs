// SPDX-License-Identifier: MIT OR Apache-2.0

//! Sparse projection direction from the penalised rank-one problem
//!
//! ```text
//! maximise  <T, v w^T> - lambda * |v|_1   over |v|_2 <= 1, |w|_2 <= 1
//! ```
//!
//! solved by alternating the two closed-form partial maximisers:
//! `w = T^T v / |T^T v|` and `v = soft(T w, lambda) / |soft(T w, lambda)|`.
//! Each half-step maximises the objective over one block, so the objective
//! never decreases.

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::linalg::{dot, mat_t_vec, mat_vec, norm1, norm2, normalize, sine_angle};

const INIT_MAX_ITER: usize = 200;
const INIT_REL_TOL: f64 = 1e-10;
const INIT_DEGENERATE_TOL: f64 = 1e-12;
const INIT_PERTURBATION: f64 = 1e-6;

/// Stopping rule for the alternating maximisation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    /// Hard cap on iterations; hitting it is reported, not an error.
    pub max_iter: usize,
    /// Stop once the sine of the angle between successive `v` iterates is
    /// below this.
    pub tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-8,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::invalid(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

/// Output of [`estimate_projection`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionEstimate {
    /// Unit-length sparse direction in coordinate space (length `p`).
    pub v_hat: Vec<f64>,
    /// Unit-length companion direction in time space (length `n - 1`).
    pub w_hat: Vec<f64>,
    pub lambda: f64,
    pub iterations: usize,
    /// Objective value after every full iteration.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

impl ProjectionEstimate {
    /// Indices and weights of the nonzero coordinates of `v_hat`.
    pub fn support(&self) -> Vec<(usize, f64)> {
        self.v_hat
            .iter()
            .enumerate()
            .filter(|(_, &x)| x != 0.0)
            .map(|(i, &x)| (i, x))
            .collect()
    }
}

/// Componentwise `sgn(v) max(|v| - lambda, 0)`.
pub fn soft_threshold(v: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::invalid(format!(
            "soft-threshold level must be nonnegative, got {lambda}"
        )));
    }
    Ok(v.iter().map(|&x| soft(x, lambda)).collect())
}

#[inline]
fn soft(x: f64, lambda: f64) -> f64 {
    let a = x.abs() - lambda;
    if a > 0.0 {
        a.copysign(x)
    } else {
        0.0
    }
}

/// Largest row Euclidean norm.
pub fn two_to_inf_norm(t: ArrayView2<'_, f64>) -> f64 {
    t.outer_iter()
        .map(|row| match row.as_slice() {
            Some(r) => norm2(r),
            None => norm2(&row.to_vec()),
        })
        .fold(0.0, f64::max)
}

/// `scale * sigma * sqrt(n log(p n))`. A scale of 0.5 works well in practice;
/// 2 is the conservative value used in the theory.
pub fn default_lambda(n: usize, p: usize, sigma: f64, scale: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::TooShort { n, min: 2 });
    }
    if p == 0 {
        return Err(Error::invalid("p must be at least 1"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::invalid(format!(
            "lambda scale must be positive, got {scale}"
        )));
    }
    let (n, p) = (n as f64, p as f64);
    Ok(scale * sigma * (n * (p * n).ln()).sqrt())
}

/// Leading left singular vector of `t` by power iteration on `t t^T`, started
/// from the normalised all-ones vector.
///
/// Returns `None` for a zero matrix.
pub fn leading_left_singular_vector(t: ArrayView2<'_, f64>) -> Option<Vec<f64>> {
    let p = t.nrows();
    let frob_sq: f64 = t.iter().map(|x| x * x).sum();
    if p == 0 || frob_sq == 0.0 {
        return None;
    }
    let threshold = INIT_DEGENERATE_TOL * frob_sq;
    let apply = |x: &[f64]| mat_vec(t, &mat_t_vec(t, x));

    let mut x = vec![1.0 / (p as f64).sqrt(); p];
    if norm2(&apply(&x)) <= threshold {
        x[0] += INIT_PERTURBATION;
        normalize(&mut x);
        if norm2(&apply(&x)) <= threshold {
            // start on the heaviest row; t t^T e_j has j-th entry |row_j|^2 > 0
            let j = heaviest_row(t);
            x = vec![0.0; p];
            x[j] = 1.0;
        }
    }

    let mut previous = f64::NAN;
    for _ in 0..INIT_MAX_ITER {
        let u = mat_t_vec(t, &x);
        let eigenvalue = dot(&u, &u);
        let mut y = mat_vec(t, &u);
        if normalize(&mut y) == 0.0 {
            break;
        }
        x = y;
        if (eigenvalue - previous).abs() <= INIT_REL_TOL * eigenvalue {
            break;
        }
        previous = eigenvalue;
    }
    Some(x)
}

fn heaviest_row(t: ArrayView2<'_, f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (j, row) in t.outer_iter().enumerate() {
        let s: f64 = row.iter().map(|x| x * x).sum();
        if s > best.1 {
            best = (j, s);
        }
    }
    best.0
}

/// Runs the alternating maximisation from the leading left singular vector.
///
/// Fails with [`Error::DegeneratePenalty`] when `lambda` is at least the
/// largest row norm of `t`, since the maximiser is then `v = 0`.
pub fn estimate_projection(
    t: ArrayView2<'_, f64>,
    lambda: f64,
    config: &SolverConfig,
) -> Result<ProjectionEstimate> {
    let norm = check_penalty(t, lambda, config)?;
    let init = leading_left_singular_vector(t).ok_or(Error::DegeneratePenalty {
        lambda,
        two_to_inf_norm: norm,
    })?;
    solve(t, lambda, config, init, true)
}

/// As [`estimate_projection`] but from a caller-supplied starting direction.
pub fn estimate_projection_from(
    t: ArrayView2<'_, f64>,
    lambda: f64,
    config: &SolverConfig,
    init: &[f64],
) -> Result<ProjectionEstimate> {
    check_penalty(t, lambda, config)?;
    if init.len() != t.nrows() {
        return Err(Error::invalid(format!(
            "initial direction has length {}, expected {}",
            init.len(),
            t.nrows()
        )));
    }
    let mut v = init.to_vec();
    if normalize(&mut v) == 0.0 || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(
            "initial direction must be nonzero and finite",
        ));
    }
    solve(t, lambda, config, v, true)
}

fn check_penalty(t: ArrayView2<'_, f64>, lambda: f64, config: &SolverConfig) -> Result<f64> {
    config.validate()?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if t.nrows() == 0 || t.ncols() == 0 {
        return Err(Error::invalid("empty CUSUM matrix"));
    }
    let norm = two_to_inf_norm(t);
    if lambda >= norm {
        return Err(Error::DegeneratePenalty {
            lambda,
            two_to_inf_norm: norm,
        });
    }
    Ok(norm)
}

fn solve(
    t: ArrayView2<'_, f64>,
    lambda: f64,
    config: &SolverConfig,
    mut v: Vec<f64>,
    allow_restart: bool,
) -> Result<ProjectionEstimate> {
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=config.max_iter {
        iterations = it;
        let mut w = mat_t_vec(t, &v);
        if normalize(&mut w) == 0.0 {
            return Err(Error::ZeroVector { iteration: it });
        }
        let tw = mat_vec(t, &w);
        let mut next: Vec<f64> = tw.iter().map(|&x| soft(x, lambda)).collect();
        if normalize(&mut next) == 0.0 {
            if it == 1 && allow_restart {
                // The starting direction gave no coordinate above the penalty.
                // A unit vector on the heaviest row always does, since its
                // norm exceeds lambda. Its sign follows T w so that negating
                // the start negates the result.
                let j = heaviest_row(t);
                let mut e = vec![0.0; t.nrows()];
                e[j] = if tw[j] < 0.0 { -1.0 } else { 1.0 };
                return solve(t, lambda, config, e, false);
            }
            return Err(Error::ZeroVector { iteration: it });
        }
        trace.push(dot(&next, &tw) - lambda * norm1(&next));
        let change = sine_angle(&next, &v).unwrap_or(1.0);
        v = next;
        if change < config.tol {
            converged = true;
            break;
        }
    }

    let mut w = mat_t_vec(t, &v);
    if normalize(&mut w) == 0.0 {
        return Err(Error::ZeroVector {
            iteration: iterations,
        });
    }
    Ok(ProjectionEstimate {
        v_hat: v,
        w_hat: w,
        lambda,
        iterations,
        objective_trace: trace,
        converged,
    })
}
