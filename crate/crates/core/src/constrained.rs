//! Closed-form maximizers of cross-covariance functionals over the couplings
//! of two fixed marginal covariances.
//!
//! The feasible set in all three problems is the set of cross blocks `K`
//! keeping the joint covariance `[[diag(d0), K], [K^T, diag(d1)]]` positive
//! semi-definite, i.e. `schur_feasible(diag(d0), diag(d1), K)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{GwError, Result};

fn check_sorted_desc(name: &str, v: &[f64]) -> Result<()> {
    if v.windows(2).any(|w| w[0] < w[1]) {
        return Err(GwError::InvalidMatrix(format!(
            "{name} must be sorted in non-increasing order"
        )));
    }
    Ok(())
}

fn check_signs(signs: &[f64], expected_len: usize) -> Result<()> {
    if signs.len() != expected_len {
        return Err(GwError::DimError(format!(
            "expected {expected_len} signs, got {}",
            signs.len()
        )));
    }
    if signs.iter().any(|&s| s != 1.0 && s != -1.0) {
        return Err(GwError::InvalidMatrix("signs must be +1 or -1".into()));
    }
    Ok(())
}

/// Maximum of `||K||_F^2` over the feasible cross blocks, for diagonal
/// marginals `diag(d0)` (strictly positive, length `m`) and `diag(d1)`
/// (non-negative, length `n <= m`), both sorted non-increasing.
///
/// The maximum is `sum_i d0[i] * d1[i]` over the top `n` pairs, attained at
/// the block matrix with `diag(signs) * sqrt(d0[i] d1[i])` on top and zeros
/// below. Any sign choice attains the same value.
pub fn max_cross_cov_frobenius(
    d0: &[f64],
    d1: &[f64],
    signs: &[f64],
) -> Result<(f64, DMatrix<f64>)> {
    let m = d0.len();
    let n = d1.len();
    if n > m {
        return Err(GwError::DimError(format!(
            "target spectrum longer than source ({n} > {m})"
        )));
    }
    if d0.iter().any(|&v| v <= 0.0) {
        return Err(GwError::NotPositiveDefinite(
            "source spectrum must be strictly positive".into(),
        ));
    }
    if d1.iter().any(|&v| v < 0.0) {
        return Err(GwError::NotPsd("target spectrum must be non-negative".into()));
    }
    check_sorted_desc("d0", d0)?;
    check_sorted_desc("d1", d1)?;
    check_signs(signs, n)?;

    let value: f64 = (0..n).map(|i| d0[i] * d1[i]).sum();
    let mut kstar = DMatrix::zeros(m, n);
    for i in 0..n {
        kstar[(i, i)] = signs[i] * (d0[i] * d1[i]).sqrt();
    }
    Ok((value, kstar))
}

/// Maximum of the entrywise sum of `K` over the feasible cross blocks of
/// `diag(alpha)` and `diag(beta)`: the value is `sqrt(sum(alpha) *
/// sum(beta))`, attained at the rank-one block `alpha beta^T / value`,
/// which sits exactly on the feasibility boundary (smallest Schur
/// eigenvalue zero).
pub fn max_trace_rank_one(alpha: &[f64], beta: &[f64]) -> Result<(f64, DMatrix<f64>)> {
    let m = alpha.len();
    let n = beta.len();
    if n > m {
        return Err(GwError::DimError(format!(
            "target spectrum longer than source ({n} > {m})"
        )));
    }
    if alpha.iter().any(|&v| v <= 0.0) {
        return Err(GwError::NotPositiveDefinite(
            "alpha must be strictly positive".into(),
        ));
    }
    if beta.iter().any(|&v| v < 0.0) {
        return Err(GwError::NotPsd("beta must be non-negative".into()));
    }
    if beta.iter().all(|&v| v == 0.0) {
        return Err(GwError::DegenerateInput("beta must not be all zero".into()));
    }
    check_sorted_desc("alpha", alpha)?;
    check_sorted_desc("beta", beta)?;

    let value = (alpha.iter().sum::<f64>() * beta.iter().sum::<f64>()).sqrt();
    let kstar = DMatrix::from_fn(m, n, |i, j| alpha[i] * beta[j] / value);
    Ok((value, kstar))
}

/// Minimum inner product of two unit vectors with non-negative coordinates
/// sorted non-increasing, in dimension `m`: the value is `1/sqrt(m)`,
/// attained by `u = (1/sqrt(m), ..., 1/sqrt(m))` against `v = (1, 0, ...)`.
pub fn min_decreasing_unit_inner_product(m: usize) -> Result<(f64, DVector<f64>, DVector<f64>)> {
    if m == 0 {
        return Err(GwError::DimError("dimension must be at least 1".into()));
    }
    let value = 1.0 / (m as f64).sqrt();
    let u = DVector::from_element(m, value);
    let mut v = DVector::zeros(m);
    v[0] = 1.0;
    Ok((value, u, v))
}
