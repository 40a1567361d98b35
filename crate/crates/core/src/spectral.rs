//! Deterministic symmetric linear algebra: sorted eigendecompositions,
//! positive semi-definiteness classification, matrix square roots and
//! Schur-complement feasibility checks.
//!
//! Everything here is dense `f64` and aimed at desk scale (dimensions up to
//! a few hundred). Eigenvalues are always reported in non-increasing order
//! with a fixed tie-break so that repeated runs produce identical bases.

use nalgebra::{DMatrix, DVector};

use crate::error::{GwError, Result};

/// Default relative tolerance for positive semi-definiteness decisions.
///
/// Covariance matrices estimated from data are usually only PSD up to
/// rounding; the tolerance is relative to `max(1, lambda_max)`.
pub const DEFAULT_PSD_TOL: f64 = 1e-9;

/// Relative threshold below which an eigenvalue counts as zero when
/// computing ranks and dropping degenerate directions.
pub const RANK_EPS: f64 = 1e-12;

/// Positive (semi-)definiteness classification of a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsdClass {
    PositiveDefinite,
    PositiveSemiDefinite,
    Indefinite,
}

/// Square real matrix stored in exactly symmetric form.
///
/// Construction symmetrizes the input as `(A + A^T) / 2` and rejects
/// non-finite entries, so downstream spectral routines never have to
/// re-validate.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    mat: DMatrix<f64>,
}

impl SymmetricMatrix {
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        if mat.nrows() == 0 || mat.nrows() != mat.ncols() {
            return Err(GwError::InvalidMatrix(format!(
                "expected a non-empty square matrix, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if !mat.iter().all(|v| v.is_finite()) {
            return Err(GwError::InvalidMatrix(
                "matrix has non-finite entries".into(),
            ));
        }
        let sym = (&mat + mat.transpose()) * 0.5;
        Ok(Self { mat: sym })
    }

    /// Build from nested rows; rejects ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(GwError::InvalidMatrix(format!(
                    "row {} has length {}, expected {}",
                    i,
                    row.len(),
                    n
                )));
            }
        }
        let mat = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::new(mat)
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        if diag.is_empty() {
            return Err(GwError::InvalidMatrix("empty diagonal".into()));
        }
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            mat: DMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mat.norm()
    }
}

/// Orthogonal eigenbasis plus eigenvalues sorted in non-increasing order.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    basis: DMatrix<f64>,
    eigenvalues: DVector<f64>,
}

impl SpectralDecomposition {
    /// Columns are eigenvectors, in the order of `eigenvalues`.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `basis * diag(eigenvalues) * basis^T`, re-symmetrized.
    pub fn reconstruct(&self) -> SymmetricMatrix {
        let d = DMatrix::from_diagonal(&self.eigenvalues);
        let m = &self.basis * d * self.basis.transpose();
        SymmetricMatrix::new(m).expect("reconstruction of a finite decomposition")
    }

    /// Rebuild a symmetric matrix after transforming each eigenvalue.
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> SymmetricMatrix {
        let d = DMatrix::from_diagonal(&self.eigenvalues.map(f));
        let m = &self.basis * d * self.basis.transpose();
        SymmetricMatrix::new(m).expect("recombination of a finite decomposition")
    }

    /// Number of eigenvalues above `RANK_EPS * max(lambda_max, 0)`.
    pub fn rank(&self) -> usize {
        let lmax = self.eigenvalues[0].max(0.0);
        if lmax <= 0.0 {
            return 0;
        }
        self.eigenvalues
            .iter()
            .filter(|&&l| l > RANK_EPS * lmax)
            .count()
    }
}

/// Eigendecomposition with eigenvalues sorted in non-increasing order.
///
/// Determinism conventions:
/// - ties between equal eigenvalues keep the column order produced by the
///   underlying solver (stable sort on the eigenvalue only);
/// - each eigenvector is sign-normalized so that its first component of
///   largest absolute value is non-negative.
pub fn sorted_eig(s: &SymmetricMatrix) -> SpectralDecomposition {
    let eig = s.mat.clone().symmetric_eigen();
    let n = s.dim();

    let mut order: Vec<usize> = (0..n).collect();
    // Stable: equal eigenvalues keep the solver's column order.
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
    });

    let mut basis = DMatrix::zeros(n, n);
    let mut values = DVector::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        let mut col: DVector<f64> = eig.eigenvectors.column(src).into();
        // First component of largest absolute value made non-negative.
        let mut lead = 0;
        for i in 1..n {
            if col[i].abs() > col[lead].abs() {
                lead = i;
            }
        }
        if col[lead] < 0.0 {
            col.neg_mut();
        }
        basis.set_column(dst, &col);
    }

    SpectralDecomposition {
        basis,
        eigenvalues: values,
    }
}

/// Classify by eigenvalue signs relative to `tol * max(1, |lambda_max|)`.
pub fn psd_classify(s: &SymmetricMatrix, tol: f64) -> PsdClass {
    let dec = sorted_eig(s);
    let lambda_max = dec.eigenvalues[0];
    let lambda_min = dec.eigenvalues[dec.dim() - 1];
    let scale = 1.0_f64.max(lambda_max.abs());
    if lambda_min > tol * scale {
        PsdClass::PositiveDefinite
    } else if lambda_min >= -tol * scale {
        PsdClass::PositiveSemiDefinite
    } else {
        PsdClass::Indefinite
    }
}

/// Unique symmetric PSD square root.
///
/// Eigenvalues that are negative but within the PSD tolerance are clamped
/// to zero; a genuinely indefinite input is rejected.
pub fn sym_sqrt(s: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    if psd_classify(s, DEFAULT_PSD_TOL) == PsdClass::Indefinite {
        return Err(GwError::NotPsd(
            "square root requires a positive semi-definite matrix".into(),
        ));
    }
    Ok(sorted_eig(s).map_eigenvalues(|l| l.max(0.0).sqrt()))
}

/// `sigma1 - K^T sigma0^{-1} K`, the Schur complement of the joint block
/// matrix `[[sigma0, K], [K^T, sigma1]]`.
pub fn schur_complement(
    sigma0: &SymmetricMatrix,
    sigma1: &SymmetricMatrix,
    k: &DMatrix<f64>,
) -> Result<SymmetricMatrix> {
    let m = sigma0.dim();
    let n = sigma1.dim();
    if k.nrows() != m || k.ncols() != n {
        return Err(GwError::DimError(format!(
            "cross block must be {}x{}, got {}x{}",
            m,
            n,
            k.nrows(),
            k.ncols()
        )));
    }
    if psd_classify(sigma0, DEFAULT_PSD_TOL) != PsdClass::PositiveDefinite {
        return Err(GwError::SingularBlock(
            "top-left block must be positive definite".into(),
        ));
    }
    let inv0 = sorted_eig(sigma0).map_eigenvalues(|l| 1.0 / l);
    let s = sigma1.as_matrix() - k.transpose() * inv0.as_matrix() * k;
    SymmetricMatrix::new(s)
}

/// True iff the joint block matrix `[[sigma0, K], [K^T, sigma1]]` is PSD,
/// decided through its Schur complement.
pub fn schur_feasible(
    sigma0: &SymmetricMatrix,
    sigma1: &SymmetricMatrix,
    k: &DMatrix<f64>,
    tol: f64,
) -> Result<bool> {
    let s = schur_complement(sigma0, sigma1, k)?;
    Ok(psd_classify(&s, tol) != PsdClass::Indefinite)
}
