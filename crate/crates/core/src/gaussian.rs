//! Gaussian measures on Euclidean spaces, affine maps between them, and
//! weighted point clouds sampled from them.
//!
//! The canonical frame used throughout the crate is the PCA alignment of a
//! measure: centered, rotated so the covariance is diagonal with
//! non-increasing entries. [`pca_align`] produces that frame together with
//! the affine map realizing it.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{GwError, Result};
use crate::spectral::{psd_classify, sorted_eig, PsdClass, SymmetricMatrix, DEFAULT_PSD_TOL};

/// Gaussian measure `N(mean, covariance)`; the covariance may be singular
/// (degenerate measures are first-class citizens here).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMeasure {
    mean: DVector<f64>,
    covariance: SymmetricMatrix,
}

impl GaussianMeasure {
    /// Validated constructor: dimensions must agree and the covariance must
    /// not be indefinite.
    pub fn new(mean: DVector<f64>, covariance: SymmetricMatrix) -> Result<Self> {
        if mean.len() != covariance.dim() {
            return Err(GwError::DimError(format!(
                "mean has length {} but covariance is {}x{}",
                mean.len(),
                covariance.dim(),
                covariance.dim()
            )));
        }
        if !mean.iter().all(|v| v.is_finite()) {
            return Err(GwError::InvalidMatrix("mean has non-finite entries".into()));
        }
        if psd_classify(&covariance, DEFAULT_PSD_TOL) == PsdClass::Indefinite {
            return Err(GwError::NotPsd("covariance must not be indefinite".into()));
        }
        Ok(Self { mean, covariance })
    }

    /// Standard normal on `R^dim`.
    pub fn standard(dim: usize) -> Self {
        Self {
            mean: DVector::zeros(dim),
            covariance: SymmetricMatrix::identity(dim),
        }
    }

    /// Centered measure with the given diagonal covariance.
    pub fn centered_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(
            DVector::zeros(diag.len()),
            SymmetricMatrix::diagonal(diag)?,
        )
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &SymmetricMatrix {
        &self.covariance
    }
}

/// Affine map `x -> offset + matrix * x` from `R^input_dim` to
/// `R^output_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    matrix: DMatrix<f64>,
    offset: DVector<f64>,
}

impl AffineMap {
    pub fn new(matrix: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        if matrix.nrows() != offset.len() {
            return Err(GwError::DimError(format!(
                "matrix has {} rows but offset has length {}",
                matrix.nrows(),
                offset.len()
            )));
        }
        Ok(Self { matrix, offset })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: DMatrix::identity(dim, dim),
            offset: DVector::zeros(dim),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    pub fn input_dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.input_dim() {
            return Err(GwError::DimError(format!(
                "map expects input of length {}, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        Ok(&self.offset + &self.matrix * x)
    }

    /// `self . inner`: apply `inner` first, then `self`.
    pub fn compose(&self, inner: &AffineMap) -> Result<AffineMap> {
        if inner.output_dim() != self.input_dim() {
            return Err(GwError::DimError(format!(
                "cannot compose: inner output dim {} vs outer input dim {}",
                inner.output_dim(),
                self.input_dim()
            )));
        }
        AffineMap::new(
            &self.matrix * &inner.matrix,
            &self.offset + &self.matrix * &inner.offset,
        )
    }
}

/// Weighted point cloud: `k` points in `R^d` (rows) with non-negative
/// weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: DMatrix<f64>,
    weights: DVector<f64>,
}

impl PointCloud {
    pub fn new(points: DMatrix<f64>, weights: DVector<f64>) -> Result<Self> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(GwError::DimError("point cloud must be non-empty".into()));
        }
        if weights.len() != points.nrows() {
            return Err(GwError::DimError(format!(
                "{} points but {} weights",
                points.nrows(),
                weights.len()
            )));
        }
        if !points.iter().all(|v| v.is_finite()) {
            return Err(GwError::InvalidMatrix("points have non-finite entries".into()));
        }
        if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(GwError::InvalidWeights(
                "weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(GwError::InvalidWeights(format!(
                "weights sum to {total}, expected 1 within 1e-12"
            )));
        }
        Ok(Self { points, weights })
    }

    /// Uniform weights `1/k`.
    pub fn uniform(points: DMatrix<f64>) -> Result<Self> {
        let k = points.nrows();
        if k == 0 {
            return Err(GwError::DimError("point cloud must be non-empty".into()));
        }
        let weights = DVector::from_element(k, 1.0 / k as f64);
        Self::new(points, weights)
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// Row-major `k x d` point matrix.
    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn weighted_mean(&self) -> DVector<f64> {
        self.points.transpose() * &self.weights
    }

    /// Weighted mean and covariance of the cloud.
    pub fn empirical_moments(&self) -> (DVector<f64>, SymmetricMatrix) {
        let mean = self.weighted_mean();
        let d = self.dim();
        let mut cov = DMatrix::zeros(d, d);
        for i in 0..self.len() {
            let x = self.points.row(i).transpose() - &mean;
            cov += self.weights[i] * &x * x.transpose();
        }
        let cov = SymmetricMatrix::new(cov).expect("finite covariance");
        (mean, cov)
    }

    /// Same cloud with the weighted mean subtracted from every point.
    pub fn centered(&self) -> PointCloud {
        let mean = self.weighted_mean();
        let mut points = self.points.clone();
        for i in 0..points.nrows() {
            for j in 0..points.ncols() {
                points[(i, j)] -= mean[j];
            }
        }
        PointCloud {
            points,
            weights: self.weights.clone(),
        }
    }

    /// Image of the cloud under an affine map (weights unchanged).
    pub fn map(&self, t: &AffineMap) -> Result<PointCloud> {
        if t.input_dim() != self.dim() {
            return Err(GwError::DimError(format!(
                "map expects input dim {}, cloud has dim {}",
                t.input_dim(),
                self.dim()
            )));
        }
        let mut points = DMatrix::zeros(self.len(), t.output_dim());
        for i in 0..self.len() {
            let y = t.apply(&self.points.row(i).transpose())?;
            points.set_row(i, &y.transpose());
        }
        Ok(PointCloud {
            points,
            weights: self.weights.clone(),
        })
    }
}

/// Center and rotate a measure into its PCA frame.
///
/// Returns the map `T(x) = P^T (x - mean)` (with `P` the sorted eigenbasis
/// of the covariance) and the aligned measure, which is centered with
/// diagonal covariance sorted non-increasing. Pushing the input through the
/// map reproduces the aligned measure.
pub fn pca_align(g: &GaussianMeasure) -> (AffineMap, GaussianMeasure) {
    let dec = sorted_eig(g.covariance());
    let pt = dec.basis().transpose();
    let offset = -(&pt * g.mean());
    let map = AffineMap {
        matrix: pt,
        offset,
    };
    let aligned = GaussianMeasure {
        mean: DVector::zeros(g.dim()),
        covariance: SymmetricMatrix::new(DMatrix::from_diagonal(dec.eigenvalues()))
            .expect("finite diagonal"),
    };
    (map, aligned)
}

/// Law of the image of a Gaussian under an affine map:
/// mean goes to `T(mean)`, covariance to `M Sigma M^T`.
pub fn push_forward(g: &GaussianMeasure, t: &AffineMap) -> Result<GaussianMeasure> {
    if t.input_dim() != g.dim() {
        return Err(GwError::DimError(format!(
            "map expects input dim {}, measure has dim {}",
            t.input_dim(),
            g.dim()
        )));
    }
    let mean = t.apply(g.mean())?;
    let cov = t.matrix() * g.covariance().as_matrix() * t.matrix().transpose();
    Ok(GaussianMeasure {
        mean,
        covariance: SymmetricMatrix::new(cov)?,
    })
}

/// Draw `k` iid samples with uniform weights, reproducibly.
///
/// The factor is the eigen square root `L = P diag(sqrt(lambda))` (negative
/// eigenvalues within tolerance clamped to zero), so rank-deficient
/// covariances sample correctly on their support. The generator is
/// `ChaCha12` seeded with `seed`; each point's coordinates are drawn in
/// order from a single stream.
pub fn sample(g: &GaussianMeasure, k: usize, seed: u64) -> PointCloud {
    assert!(k >= 1, "sample size must be at least 1");
    let dec = sorted_eig(g.covariance());
    let factor = dec.basis() * DMatrix::from_diagonal(&dec.eigenvalues().map(|l| l.max(0.0).sqrt()));
    let dim = g.dim();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut points = DMatrix::zeros(k, dim);
    for i in 0..k {
        let z = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = g.mean() + &factor * z;
        points.set_row(i, &x.transpose());
    }
    PointCloud {
        points,
        weights: DVector::from_element(k, 1.0 / k as f64),
    }
}

/// Fourth moment `E[X_i X_j X_k X_l]` of a centered Gaussian via the
/// Isserlis pairing formula:
/// `S_ij S_kl + S_ik S_jl + S_il S_jk`.
pub fn isserlis_fourth_moment(
    cov: &SymmetricMatrix,
    i: usize,
    j: usize,
    k: usize,
    l: usize,
) -> Result<f64> {
    let d = cov.dim();
    if i >= d || j >= d || k >= d || l >= d {
        return Err(GwError::DimError(format!(
            "index out of range for dimension {d}: ({i},{j},{k},{l})"
        )));
    }
    let s = cov.as_matrix();
    Ok(s[(i, j)] * s[(k, l)] + s[(i, k)] * s[(j, l)] + s[(i, l)] * s[(j, k)])
}

/// Covariance matrix of the squared coordinates of a centered Gaussian:
/// `Cov(X_i^2, X_j^2) = 2 S_ij^2`.
pub fn squared_coordinate_covariance(cov: &SymmetricMatrix) -> SymmetricMatrix {
    let s = cov.as_matrix();
    let m = DMatrix::from_fn(cov.dim(), cov.dim(), |i, j| 2.0 * s[(i, j)] * s[(i, j)]);
    SymmetricMatrix::new(m).expect("finite entries")
}
