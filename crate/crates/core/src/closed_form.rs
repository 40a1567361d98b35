//! Closed-form transport quantities between Gaussian measures: the
//! quadratic Wasserstein distance with its affine map, the Gaussian-coupling
//! Gromov-Wasserstein value `GGW2^2` with its affine map, the lower bound
//! `LGW2^2`, the gap between them with its a-priori cap, the
//! proportional-spectrum case where everything collapses to an exact value,
//! and the reduction of degenerate measures onto their support.
//!
//! All Gromov-type quantities depend on the two covariance spectra only:
//! means cancel, rotations are quotiented out. The implementation therefore
//! funnels every input through a single canonical form (sorted spectra with
//! zero eigenvalues dropped, the longer spectrum first).

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{GwError, Result};
use crate::gaussian::{pca_align, AffineMap, GaussianMeasure};
use crate::spectral::{
    psd_classify, sorted_eig, sym_sqrt, PsdClass, SymmetricMatrix, DEFAULT_PSD_TOL, RANK_EPS,
};

/// Relative tolerance for detecting proportional spectra.
const PROPORTIONAL_TOL: f64 = 1e-9;

/// Lower and upper Gromov-Wasserstein bounds for a pair of Gaussians.
///
/// `lower <= GW2^2 <= upper` always holds; `exact` is populated only when
/// the sorted spectra are proportional, in which case all three coincide.
/// `gap_cap` is the a-priori bound `8 |D0|_F |D1|_F (1 - 1/sqrt(m))` on the
/// gap, evaluated on the reduced pair. `swapped` records whether the
/// arguments were reordered to put the higher-dimensional measure first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GwBounds {
    pub lower: f64,
    pub upper: f64,
    pub exact: Option<f64>,
    pub gap: f64,
    pub gap_cap: f64,
    pub swapped: bool,
}

/// Sorted positive spectrum of a measure after dropping directions with
/// eigenvalues at or below `RANK_EPS * lambda_max`.
fn reduced_spectrum(g: &GaussianMeasure) -> Vec<f64> {
    let dec = sorted_eig(g.covariance());
    let lmax = dec.eigenvalues()[0].max(0.0);
    if lmax <= 0.0 {
        return Vec::new();
    }
    dec.eigenvalues()
        .iter()
        .copied()
        .filter(|&l| l > RANK_EPS * lmax)
        .collect()
}

/// Canonical pair of reduced spectra with the longer one first.
struct OrientedSpectra {
    d0: Vec<f64>,
    d1: Vec<f64>,
    swapped: bool,
}

fn orient(g0: &GaussianMeasure, g1: &GaussianMeasure) -> OrientedSpectra {
    let s0 = reduced_spectrum(g0);
    let s1 = reduced_spectrum(g1);
    if s1.len() > s0.len() {
        OrientedSpectra {
            d0: s1,
            d1: s0,
            swapped: true,
        }
    } else {
        OrientedSpectra {
            d0: s0,
            d1: s1,
            swapped: false,
        }
    }
}

fn trace(d: &[f64]) -> f64 {
    d.iter().sum()
}

fn frob_sq(d: &[f64]) -> f64 {
    d.iter().map(|l| l * l).sum()
}

/// `GGW2^2` from sorted spectra with `d1.len() <= d0.len()`:
/// `4 (tr D0 - tr D1)^2 + 8 |D0^(n) - D1|_F^2 + 8 (|D0|_F^2 - |D0^(n)|_F^2)`.
fn ggw_from_spectra(d0: &[f64], d1: &[f64]) -> f64 {
    let n = d1.len();
    let top: f64 = (0..n).map(|i| (d0[i] - d1[i]).powi(2)).sum();
    let tail: f64 = d0[n..].iter().map(|l| l * l).sum();
    4.0 * (trace(d0) - trace(d1)).powi(2) + 8.0 * top + 8.0 * tail
}

/// `LGW2^2` from sorted spectra with `d1.len() <= d0.len()`:
/// `4 (tr D0 - tr D1)^2 + 4 (|D0|_F - |D1|_F)^2 + 4 |D0^(n) - D1|_F^2
///  + 4 (|D0|_F^2 - |D0^(n)|_F^2)`.
fn lgw_from_spectra(d0: &[f64], d1: &[f64]) -> f64 {
    let n = d1.len();
    let top: f64 = (0..n).map(|i| (d0[i] - d1[i]).powi(2)).sum();
    let tail: f64 = d0[n..].iter().map(|l| l * l).sum();
    let f0 = frob_sq(d0).sqrt();
    let f1 = frob_sq(d1).sqrt();
    4.0 * (trace(d0) - trace(d1)).powi(2) + 4.0 * (f0 - f1).powi(2) + 4.0 * top + 4.0 * tail
}

/// Gap `upper - lower` in its Cauchy-Schwarz form
/// `8 (|D0|_F |D1|_F - tr(D0^(n) D1))`.
fn gap_from_spectra(d0: &[f64], d1: &[f64]) -> f64 {
    let n = d1.len();
    let dot: f64 = (0..n).map(|i| d0[i] * d1[i]).sum();
    8.0 * (frob_sq(d0).sqrt() * frob_sq(d1).sqrt() - dot)
}

/// Exact value when the reduced spectra are proportional (`d1 = lambda d0`
/// elementwise within relative tolerance): `(lambda - 1)^2 (4 tr(D0)^2 +
/// 8 |D0|_F^2)`. Two point masses count as proportional with value 0.
fn proportional_from_spectra(d0: &[f64], d1: &[f64]) -> Option<f64> {
    if d0.is_empty() && d1.is_empty() {
        return Some(0.0);
    }
    if d0.len() != d1.len() || d0.is_empty() {
        return None;
    }
    let lambda = trace(d1) / trace(d0);
    for i in 0..d0.len() {
        let expected = lambda * d0[i];
        if (d1[i] - expected).abs() > PROPORTIONAL_TOL * expected.abs().max(d1[i].abs()) {
            return None;
        }
    }
    Some((lambda - 1.0).powi(2) * (4.0 * trace(d0).powi(2) + 8.0 * frob_sq(d0)))
}

/// Gaussian-coupling Gromov-Wasserstein squared value. Symmetric in its
/// arguments, blind to means, and total on valid Gaussians: degenerate
/// covariances are reduced onto their support first.
pub fn ggw2_squared(g0: &GaussianMeasure, g1: &GaussianMeasure) -> f64 {
    let o = orient(g0, g1);
    ggw_from_spectra(&o.d0, &o.d1)
}

/// Lower bound on the (unrestricted) Gromov-Wasserstein squared value.
pub fn lgw2_squared(g0: &GaussianMeasure, g1: &GaussianMeasure) -> f64 {
    let o = orient(g0, g1);
    lgw_from_spectra(&o.d0, &o.d1)
}

/// Exact `GW2^2` when the sorted reduced spectra are proportional
/// (`D1 = lambda D0`, requiring equal dimensions after reduction),
/// `None` otherwise.
///
/// In the proportional case the optimal map is affine with matrix
/// `sqrt(lambda) P1 diag(signs) P0^T`, which is exactly what [`ggw_map`]
/// returns, so no separate map constructor is needed here.
pub fn gw2_proportional(g0: &GaussianMeasure, g1: &GaussianMeasure) -> Option<f64> {
    let o = orient(g0, g1);
    proportional_from_spectra(&o.d0, &o.d1)
}

/// Full bound report: `LGW2^2`, `GGW2^2`, the exact value when available,
/// the gap, and the a-priori gap cap.
pub fn bounds(g0: &GaussianMeasure, g1: &GaussianMeasure) -> GwBounds {
    let o = orient(g0, g1);
    let lower = lgw_from_spectra(&o.d0, &o.d1);
    let upper = ggw_from_spectra(&o.d0, &o.d1);
    let gap = upper - lower;
    debug_assert!(
        (gap - gap_from_spectra(&o.d0, &o.d1)).abs() <= 1e-9 * upper.max(1.0),
        "gap disagrees with its Cauchy-Schwarz form"
    );
    let m = o.d0.len().max(1);
    let gap_cap = 8.0
        * frob_sq(&o.d0).sqrt()
        * frob_sq(&o.d1).sqrt()
        * (1.0 - 1.0 / (m as f64).sqrt());
    GwBounds {
        lower,
        upper,
        exact: proportional_from_spectra(&o.d0, &o.d1),
        gap,
        gap_cap,
        swapped: o.swapped,
    }
}

/// Quadratic Wasserstein distance squared between Gaussians of equal
/// dimension:
/// `|m1 - m0|^2 + tr(S0 + S1 - 2 (S0^1/2 S1 S0^1/2)^1/2)`.
///
/// The optimal map is affine and is returned whenever the source covariance
/// is positive definite.
pub fn w2_squared(
    g0: &GaussianMeasure,
    g1: &GaussianMeasure,
) -> Result<(f64, Option<AffineMap>)> {
    if g0.dim() != g1.dim() {
        return Err(GwError::DimError(format!(
            "W2 requires equal dimensions, got {} and {}",
            g0.dim(),
            g1.dim()
        )));
    }
    let root0 = sym_sqrt(g0.covariance())?;
    let middle = SymmetricMatrix::new(
        root0.as_matrix() * g1.covariance().as_matrix() * root0.as_matrix(),
    )?;
    let middle_root = sym_sqrt(&middle)?;
    let value = (g1.mean() - g0.mean()).norm_squared() + g0.covariance().trace()
        + g1.covariance().trace()
        - 2.0 * middle_root.trace();

    let map = if psd_classify(g0.covariance(), DEFAULT_PSD_TOL) == PsdClass::PositiveDefinite {
        let inv_root0 = sorted_eig(g0.covariance()).map_eigenvalues(|l| 1.0 / l.sqrt());
        let matrix = inv_root0.as_matrix() * middle_root.as_matrix() * inv_root0.as_matrix();
        let offset = g1.mean() - &matrix * g0.mean();
        Some(AffineMap::new(matrix, offset)?)
    } else {
        None
    };
    Ok((value, map))
}

/// Affine map realizing `GGW2^2`, oriented so the source has rank at least
/// that of the target:
/// `T(x) = m1 + P1 A P0^T (x - m0)` where `A` carries
/// `diag(signs) (D1^(r1))^1/2 (D0^(r1))^-1/2` in its top-left block and
/// zeros elsewhere. With full-rank target and `r1 = n` this is the
/// non-degenerate block `[diag(signs) D1^1/2 (D0^(n))^-1/2, 0]`.
///
/// `signs` supplies the reflection freedom (one entry of `+-1` per target
/// rank); `None` means all `+1`.
pub fn ggw_map(
    g0: &GaussianMeasure,
    g1: &GaussianMeasure,
    signs: Option<&[f64]>,
) -> Result<AffineMap> {
    let dec0 = sorted_eig(g0.covariance());
    let dec1 = sorted_eig(g1.covariance());
    let r0 = dec0.rank();
    let r1 = dec1.rank();
    if r0 < r1 {
        return Err(GwError::OrientationError(format!(
            "source rank {r0} is below target rank {r1}; swap the arguments"
        )));
    }
    let default_signs = vec![1.0; r1];
    let signs = match signs {
        Some(s) => {
            if s.len() != r1 {
                return Err(GwError::DimError(format!(
                    "expected {r1} signs (target rank), got {}",
                    s.len()
                )));
            }
            if s.iter().any(|&v| v != 1.0 && v != -1.0) {
                return Err(GwError::InvalidMatrix("signs must be +1 or -1".into()));
            }
            s
        }
        None => &default_signs,
    };

    let (m, n) = (g0.dim(), g1.dim());
    let mut a = DMatrix::zeros(n, m);
    for i in 0..r1 {
        a[(i, i)] = signs[i] * (dec1.eigenvalues()[i] / dec0.eigenvalues()[i]).sqrt();
    }
    let matrix = dec1.basis() * a * dec0.basis().transpose();
    let offset = g1.mean() - &matrix * g0.mean();
    AffineMap::new(matrix, offset)
}

/// Project a measure onto its support: PCA-align, drop the trailing
/// near-zero eigenvalues, and return the centered rank-`r` measure together
/// with `r`. A zero covariance reduces to the point mass at the origin of
/// `R^1` with rank 0. All bound quantities are invariant under this
/// reduction.
pub fn reduce_degenerate(g: &GaussianMeasure) -> (GaussianMeasure, usize) {
    let (_, aligned) = pca_align(g);
    let spectrum = reduced_spectrum(&aligned);
    let rank = spectrum.len();
    if rank == 0 {
        let point = GaussianMeasure::new(DVector::zeros(1), SymmetricMatrix::zeros(1))
            .expect("point mass is a valid measure");
        return (point, 0);
    }
    let reduced = GaussianMeasure::centered_diagonal(&spectrum)
        .expect("reduced spectrum is positive and finite");
    (reduced, rank)
}
